#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "vrmc/minibatch.hpp"

namespace vrmc {

/// Dense parameter vector in R^d.
using ParamVector = std::vector<double>;

inline double dot(const ParamVector& a, const ParamVector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

inline double squared_norm(const ParamVector& v) { return dot(v, v); }

inline double norm(const ParamVector& v) { return std::sqrt(squared_norm(v)); }

/// y += a * x
inline void axpy(double a, const ParamVector& x, ParamVector& y) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] += a * x[i];
    }
}

inline bool all_finite(const ParamVector& v) {
    for (const double x : v) {
        if (!std::isfinite(x)) {
            return false;
        }
    }
    return true;
}

/// Contract for a Bayesian model over N data points with hand-coded
/// closed-form gradients. Gradients follow the log-posterior (ascent)
/// convention throughout: the sampler ADDS h * g.
///
/// Implementations must be immutable after construction; every member here
/// is safe for concurrent read-only use from many chains.
class GradientModel {
public:
    virtual ~GradientModel() = default;

    virtual std::size_t dim() const = 0;

    /// Number of data points N.
    virtual std::size_t data_size() const = 0;

    /// out += weight * d/dtheta log p(theta)
    virtual void add_log_prior_grad(const ParamVector& theta, double weight,
                                    ParamVector& out) const = 0;

    /// out += weight * d/dtheta log p(d_i | theta)
    virtual void add_datum_loglik_grad(const ParamVector& theta, std::size_t i, double weight,
                                       ParamVector& out) const = 0;

    virtual double log_prior(const ParamVector& theta) const = 0;

    virtual double datum_loglik(const ParamVector& theta, std::size_t i) const = 0;

    ParamVector log_prior_grad(const ParamVector& theta) const {
        ParamVector out(dim(), 0.0);
        add_log_prior_grad(theta, 1.0, out);
        return out;
    }

    ParamVector datum_loglik_grad(const ParamVector& theta, std::size_t i) const {
        ParamVector out(dim(), 0.0);
        add_datum_loglik_grad(theta, i, 1.0, out);
        return out;
    }
};

/// g = d/dtheta log p(theta) + sum_i d/dtheta log p(d_i | theta), accumulated
/// in ascending datum order. Throws NumericOverflowError naming the first
/// datum whose contribution is non-finite.
ParamVector full_gradient(const GradientModel& model, const ParamVector& theta);
void full_gradient_into(const GradientModel& model, const ParamVector& theta, ParamVector& out);

/// g = d/dtheta log p(theta) + (N/n) * sum_{i in batch} d/dtheta log p(d_i | theta).
/// Expectation over uniform batches equals full_gradient.
ParamVector stochastic_gradient(const GradientModel& model, const ParamVector& theta,
                                const MinibatchIndexSet& batch);
void stochastic_gradient_into(const GradientModel& model, const ParamVector& theta,
                              const MinibatchIndexSet& batch, ParamVector& out);

/// Scalar test function phi(theta) with a stable name used in configs and
/// reports. The built-ins read the first coordinate.
struct TestFunction {
    std::string name;
    std::function<double(const ParamVector&)> fn;

    double operator()(const ParamVector& theta) const { return fn(theta); }
};

/// phi(theta) = theta[0], named "theta".
TestFunction phi_identity();

/// phi(theta) = theta[0]^2, named "theta_sq".
TestFunction phi_square();

/// Lookup by name; accepts "theta", "theta_sq" (alias "theta^2").
/// Throws std::invalid_argument for unknown names.
TestFunction phi_by_name(const std::string& name);

}  // namespace vrmc
