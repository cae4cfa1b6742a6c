#pragma once

#include <vector>

#include "vrmc/dataset.hpp"
#include "vrmc/model.hpp"
#include "vrmc/rng.hpp"

namespace vrmc {

/// Conjugate scalar location model: theta ~ N(0,1), x_i ~ N(theta,1).
///
///   d/dtheta log p(theta)   = -theta
///   d/dtheta log p(x_i|theta) = x_i - theta
///   theta | D ~ N(N*xbar/(N+1), 1/(N+1))
class GaussianMeanModel final : public GradientModel {
public:
    explicit GaussianMeanModel(std::vector<double> data);

    /// Single-column dataset; other shapes are rejected.
    static GaussianMeanModel from_dataset(const Dataset& dataset);

    std::size_t dim() const override { return 1; }
    std::size_t data_size() const override { return data_.size(); }

    void add_log_prior_grad(const ParamVector& theta, double weight,
                            ParamVector& out) const override {
        out[0] += weight * -theta[0];
    }

    void add_datum_loglik_grad(const ParamVector& theta, std::size_t i, double weight,
                               ParamVector& out) const override {
        out[0] += weight * (data_[i] - theta[0]);
    }

    double log_prior(const ParamVector& theta) const override;
    double datum_loglik(const ParamVector& theta, std::size_t i) const override;

    const std::vector<double>& data() const noexcept { return data_; }
    double data_mean() const noexcept { return mean_; }

    /// N*xbar / (N+1)
    double posterior_mean() const noexcept;
    /// 1 / (N+1)
    double posterior_variance() const noexcept;

private:
    std::vector<double> data_;
    double mean_;
};

/// N i.i.d. draws from N(theta_true, 1).
std::vector<double> generate_gaussian_data(std::size_t N, double theta_true, RngStream& rng);

/// Exact posterior average of phi under the analytic posterior: closed forms
/// for the built-in "theta" and "theta_sq" functions, otherwise adaptive
/// Simpson quadrature against the posterior density over mean +/- 10 SD
/// refined to relative 1e-10.
double gaussian_posterior_phi_bar(const GaussianMeanModel& model, const TestFunction& phi);

}  // namespace vrmc
