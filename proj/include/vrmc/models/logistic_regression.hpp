#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "vrmc/dataset.hpp"
#include "vrmc/model.hpp"
#include "vrmc/rng.hpp"

namespace vrmc {

/// Features and {-1,+1} labels for binary classification, features stored
/// row-major without the label column.
struct ClassificationData {
    Dataset features;
    std::vector<double> labels;
};

/// Bayesian logistic regression with an isotropic Gaussian prior.
///
///   theta ~ N(0, prior_scale^2 I)
///   p(y_i | x_i, theta) = sigma(y_i theta.x_i),  y_i in {-1,+1}
///   d/dtheta log p(theta)     = -theta / prior_scale^2
///   d/dtheta log p(d_i|theta) = y_i x_i sigma(-y_i theta.x_i)
class LogisticRegressionModel final : public GradientModel {
public:
    LogisticRegressionModel(ClassificationData train, double prior_scale = 1.0);

    std::size_t dim() const override { return data_.features.cols(); }
    std::size_t data_size() const override { return data_.features.rows(); }

    void add_log_prior_grad(const ParamVector& theta, double weight,
                            ParamVector& out) const override;
    void add_datum_loglik_grad(const ParamVector& theta, std::size_t i, double weight,
                               ParamVector& out) const override;
    double log_prior(const ParamVector& theta) const override;
    double datum_loglik(const ParamVector& theta, std::size_t i) const override;

    double prior_scale() const noexcept { return prior_scale_; }
    const ClassificationData& data() const noexcept { return data_; }

private:
    ClassificationData data_;
    double prior_scale_;
};

struct ClassificationMetrics {
    double nll;         // mean per-datum negative log-likelihood
    double error_rate;  // 0/1 error under sign(theta.x); theta.x == 0 predicts +1
};

/// Test-set metrics; the test feature dimension must match the model's.
ClassificationMetrics logistic_loss_metrics(const LogisticRegressionModel& model,
                                            const ParamVector& theta,
                                            const ClassificationData& test);

/// Splits the label column off a raw table (label last); label values <= 0
/// map to -1, everything else to +1 (accepts {0,1} and {-1,+1} encodings).
ClassificationData classification_data_from_dataset(const Dataset& raw);

/// Synthetic draw from the model itself: features i.i.d. N(0,1), labels
/// sampled with p(y=+1|x) = sigma(theta_true.x).
ClassificationData generate_logistic_data(std::size_t N, const ParamVector& theta_true,
                                          RngStream& rng);

/// Random train/test split; test_fraction in (0,1) and both sides non-empty.
std::pair<ClassificationData, ClassificationData> split_classification_data(
    const ClassificationData& data, double test_fraction, RngStream& rng);

/// Standardizes each feature to zero mean and unit variance using statistics
/// fitted on the train side (constant features are left centered only), then
/// appends a constant-1 intercept feature to both sides.
void standardize_and_add_intercept(ClassificationData& train, ClassificationData& test);

}  // namespace vrmc
