#include "vrmc/models/gaussian_mean.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>

#include "vrmc/errors.hpp"

namespace vrmc {

namespace {

constexpr double kLogSqrt2Pi = 0.9189385332046727;  // log sqrt(2*pi)

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa,
                        double fm, double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0) {
        throw std::runtime_error("quadrature failed to converge");
    }
    if (std::abs(delta) <= 15.0 * tol) {
        return left + right + delta / 15.0;
    }
    return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 60);
}

}  // namespace

GaussianMeanModel::GaussianMeanModel(std::vector<double> data) : data_(std::move(data)) {
    if (data_.empty()) {
        throw std::invalid_argument("GaussianMeanModel needs at least one datum");
    }
    double sum = 0.0;
    for (const double x : data_) {
        sum += x;
    }
    mean_ = sum / static_cast<double>(data_.size());
}

GaussianMeanModel GaussianMeanModel::from_dataset(const Dataset& dataset) {
    if (dataset.cols() != 1) {
        throw std::invalid_argument("GaussianMeanModel expects a single-column dataset, got " +
                                    std::to_string(dataset.cols()) + " columns");
    }
    return GaussianMeanModel(dataset.column(0));
}

double GaussianMeanModel::log_prior(const ParamVector& theta) const {
    return -0.5 * theta[0] * theta[0] - kLogSqrt2Pi;
}

double GaussianMeanModel::datum_loglik(const ParamVector& theta, std::size_t i) const {
    const double r = data_[i] - theta[0];
    return -0.5 * r * r - kLogSqrt2Pi;
}

double GaussianMeanModel::posterior_mean() const noexcept {
    const double N = static_cast<double>(data_.size());
    return N * mean_ / (N + 1.0);
}

double GaussianMeanModel::posterior_variance() const noexcept {
    return 1.0 / (static_cast<double>(data_.size()) + 1.0);
}

std::vector<double> generate_gaussian_data(std::size_t N, double theta_true, RngStream& rng) {
    if (N == 0) {
        throw std::invalid_argument("generate_gaussian_data: N must be >= 1");
    }
    std::vector<double> data(N);
    for (std::size_t i = 0; i < N; ++i) {
        data[i] = theta_true + rng.gaussian();
    }
    return data;
}

double gaussian_posterior_phi_bar(const GaussianMeanModel& model, const TestFunction& phi) {
    const double mu = model.posterior_mean();
    const double var = model.posterior_variance();
    if (phi.name == "theta") {
        return mu;
    }
    if (phi.name == "theta_sq") {
        return var + mu * mu;
    }
    const double sd = std::sqrt(var);
    const double a = mu - 10.0 * sd;
    const double b = mu + 10.0 * sd;
    const double inv_norm = 1.0 / (sd * std::sqrt(2.0 * std::numbers::pi));
    const auto integrand = [&](double t) {
        const double z = (t - mu) / sd;
        ParamVector point{t};
        return phi(point) * inv_norm * std::exp(-0.5 * z * z);
    };
    // Scale-free tolerance: refine against the size of a first coarse pass.
    const double coarse = std::abs(integrate(integrand, a, b, 1e-6)) + 1e-300;
    try {
        return integrate(integrand, a, b, 1e-10 * coarse);
    } catch (const std::runtime_error&) {
        throw std::runtime_error("quadrature failed for test function '" + phi.name + "'");
    }
}

}  // namespace vrmc
