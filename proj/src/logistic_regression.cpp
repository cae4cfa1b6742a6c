#include "vrmc/models/logistic_regression.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace vrmc {

namespace {

// log(1 + e^u) without overflow for large |u|.
double softplus(double u) {
    return std::max(u, 0.0) + std::log1p(std::exp(-std::abs(u)));
}

// sigma(-u) = 1 / (1 + e^u)
double sigmoid_neg(double u) { return 1.0 / (1.0 + std::exp(u)); }

double dot_row(const double* row, const ParamVector& theta) {
    double s = 0.0;
    for (std::size_t j = 0; j < theta.size(); ++j) {
        s += row[j] * theta[j];
    }
    return s;
}

void validate_classification(const ClassificationData& data) {
    if (data.features.rows() != data.labels.size()) {
        throw std::invalid_argument("feature rows and label count differ");
    }
    for (const double y : data.labels) {
        if (y != 1.0 && y != -1.0) {
            throw std::invalid_argument("labels must be -1 or +1");
        }
    }
}

}  // namespace

LogisticRegressionModel::LogisticRegressionModel(ClassificationData train, double prior_scale)
    : data_(std::move(train)), prior_scale_(prior_scale) {
    validate_classification(data_);
    if (!(prior_scale_ > 0.0)) {
        throw std::invalid_argument("prior scale must be positive");
    }
}

void LogisticRegressionModel::add_log_prior_grad(const ParamVector& theta, double weight,
                                                 ParamVector& out) const {
    const double c = -weight / (prior_scale_ * prior_scale_);
    for (std::size_t j = 0; j < theta.size(); ++j) {
        out[j] += c * theta[j];
    }
}

void LogisticRegressionModel::add_datum_loglik_grad(const ParamVector& theta, std::size_t i,
                                                    double weight, ParamVector& out) const {
    const double* x = data_.features.row(i);
    const double y = data_.labels[i];
    const double margin = y * dot_row(x, theta);
    const double c = weight * y * sigmoid_neg(margin);
    for (std::size_t j = 0; j < theta.size(); ++j) {
        out[j] += c * x[j];
    }
}

double LogisticRegressionModel::log_prior(const ParamVector& theta) const {
    const double var = prior_scale_ * prior_scale_;
    const double d = static_cast<double>(dim());
    return -0.5 * squared_norm(theta) / var -
           0.5 * d * std::log(2.0 * std::numbers::pi * var);
}

double LogisticRegressionModel::datum_loglik(const ParamVector& theta, std::size_t i) const {
    const double margin = data_.labels[i] * dot_row(data_.features.row(i), theta);
    return -softplus(-margin);
}

ClassificationMetrics logistic_loss_metrics(const LogisticRegressionModel& model,
                                            const ParamVector& theta,
                                            const ClassificationData& test) {
    validate_classification(test);
    if (test.features.cols() != model.dim() || theta.size() != model.dim()) {
        throw std::invalid_argument("test feature dimension does not match the model");
    }
    double nll = 0.0;
    std::size_t errors = 0;
    const std::size_t n = test.features.rows();
    for (std::size_t i = 0; i < n; ++i) {
        const double score = dot_row(test.features.row(i), theta);
        const double y = test.labels[i];
        nll += softplus(-y * score);
        const double predicted = score >= 0.0 ? 1.0 : -1.0;
        if (predicted != y) {
            ++errors;
        }
    }
    const double dn = static_cast<double>(n);
    return {nll / dn, static_cast<double>(errors) / dn};
}

ClassificationData classification_data_from_dataset(const Dataset& raw) {
    if (raw.cols() < 2) {
        throw std::invalid_argument("classification data needs at least one feature column "
                                    "plus the label column");
    }
    const std::size_t p = raw.cols() - 1;
    std::vector<double> features;
    features.reserve(raw.rows() * p);
    std::vector<double> labels;
    labels.reserve(raw.rows());
    for (std::size_t r = 0; r < raw.rows(); ++r) {
        const double* row = raw.row(r);
        features.insert(features.end(), row, row + p);
        labels.push_back(row[p] <= 0.0 ? -1.0 : 1.0);
    }
    return {Dataset(raw.rows(), p, std::move(features)), std::move(labels)};
}

ClassificationData generate_logistic_data(std::size_t N, const ParamVector& theta_true,
                                          RngStream& rng) {
    if (N == 0) {
        throw std::invalid_argument("generate_logistic_data: N must be >= 1");
    }
    const std::size_t p = theta_true.size();
    if (p == 0) {
        throw std::invalid_argument("generate_logistic_data: empty parameter vector");
    }
    std::vector<double> features(N * p);
    std::vector<double> labels(N);
    for (std::size_t i = 0; i < N; ++i) {
        double score = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            const double x = rng.gaussian();
            features[i * p + j] = x;
            score += x * theta_true[j];
        }
        const double p_plus = 1.0 / (1.0 + std::exp(-score));
        labels[i] = rng.uniform01() <= p_plus ? 1.0 : -1.0;
    }
    return {Dataset(N, p, std::move(features)), std::move(labels)};
}

std::pair<ClassificationData, ClassificationData> split_classification_data(
    const ClassificationData& data, double test_fraction, RngStream& rng) {
    validate_classification(data);
    const std::size_t n = data.features.rows();
    const std::size_t p = data.features.cols();
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw std::invalid_argument("test fraction must be in (0,1)");
    }
    std::size_t n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    n_test = std::clamp<std::size_t>(n_test, 1, n - 1);

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        order[i] = i;
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::size_t j = i + rng.uniform_below(n - i);
        std::swap(order[i], order[j]);
    }

    const auto take = [&](std::size_t begin, std::size_t count) {
        std::vector<double> features;
        features.reserve(count * p);
        std::vector<double> labels;
        labels.reserve(count);
        for (std::size_t k = begin; k < begin + count; ++k) {
            const double* row = data.features.row(order[k]);
            features.insert(features.end(), row, row + p);
            labels.push_back(data.labels[order[k]]);
        }
        return ClassificationData{Dataset(count, p, std::move(features)), std::move(labels)};
    };
    return {take(n_test, n - n_test), take(0, n_test)};
}

void standardize_and_add_intercept(ClassificationData& train, ClassificationData& test) {
    validate_classification(train);
    validate_classification(test);
    const std::size_t p = train.features.cols();
    if (test.features.cols() != p) {
        throw std::invalid_argument("train and test feature dimensions differ");
    }
    const std::size_t n_train = train.features.rows();
    std::vector<double> mean(p, 0.0);
    std::vector<double> scale(p, 1.0);
    for (std::size_t r = 0; r < n_train; ++r) {
        const double* row = train.features.row(r);
        for (std::size_t j = 0; j < p; ++j) {
            mean[j] += row[j];
        }
    }
    for (std::size_t j = 0; j < p; ++j) {
        mean[j] /= static_cast<double>(n_train);
    }
    for (std::size_t j = 0; j < p; ++j) {
        double ss = 0.0;
        for (std::size_t r = 0; r < n_train; ++r) {
            const double d = train.features.at(r, j) - mean[j];
            ss += d * d;
        }
        const double sd = std::sqrt(ss / static_cast<double>(n_train));
        scale[j] = sd > 0.0 ? sd : 1.0;
    }

    const auto transform = [&](ClassificationData& side) {
        const std::size_t n = side.features.rows();
        std::vector<double> out;
        out.reserve(n * (p + 1));
        for (std::size_t r = 0; r < n; ++r) {
            const double* row = side.features.row(r);
            for (std::size_t j = 0; j < p; ++j) {
                out.push_back((row[j] - mean[j]) / scale[j]);
            }
            out.push_back(1.0);
        }
        side.features = Dataset(n, p + 1, std::move(out));
    };
    transform(train);
    transform(test);
}

}  // namespace vrmc
