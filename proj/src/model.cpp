#include "vrmc/model.hpp"

#include <stdexcept>

#include "vrmc/errors.hpp"

namespace vrmc {

namespace {

// Error path: redo the accumulation one term at a time to name the first
// non-finite contribution.
[[noreturn]] void report_overflow(const GradientModel& model, const ParamVector& theta,
                                  const MinibatchIndexSet* batch) {
    ParamVector probe(model.dim(), 0.0);
    model.add_log_prior_grad(theta, 1.0, probe);
    if (!all_finite(probe)) {
        throw NumericOverflowError(NumericOverflowError::prior_term);
    }
    const auto check_datum = [&](std::size_t i) {
        ParamVector term(model.dim(), 0.0);
        model.add_datum_loglik_grad(theta, i, 1.0, term);
        if (!all_finite(term)) {
            throw NumericOverflowError(i);
        }
    };
    if (batch != nullptr) {
        for (const std::size_t i : *batch) {
            check_datum(i);
        }
    } else {
        for (std::size_t i = 0; i < model.data_size(); ++i) {
            check_datum(i);
        }
    }
    // Individually finite terms overflowed in accumulation; blame the sum's
    // last datum for a deterministic report.
    throw NumericOverflowError(batch != nullptr ? batch->back() : model.data_size() - 1);
}

void validate_theta(const GradientModel& model, const ParamVector& theta) {
    if (theta.size() != model.dim()) {
        throw std::invalid_argument("parameter dimension " + std::to_string(theta.size()) +
                                    " does not match model dimension " +
                                    std::to_string(model.dim()));
    }
}

}  // namespace

void full_gradient_into(const GradientModel& model, const ParamVector& theta, ParamVector& out) {
    validate_theta(model, theta);
    out.assign(model.dim(), 0.0);
    model.add_log_prior_grad(theta, 1.0, out);
    for (std::size_t i = 0; i < model.data_size(); ++i) {
        model.add_datum_loglik_grad(theta, i, 1.0, out);
    }
    if (!all_finite(out)) {
        report_overflow(model, theta, nullptr);
    }
}

ParamVector full_gradient(const GradientModel& model, const ParamVector& theta) {
    ParamVector out;
    full_gradient_into(model, theta, out);
    return out;
}

void stochastic_gradient_into(const GradientModel& model, const ParamVector& theta,
                              const MinibatchIndexSet& batch, ParamVector& out) {
    validate_theta(model, theta);
    const std::size_t N = model.data_size();
    if (batch.empty() || batch.size() > N) {
        throw std::invalid_argument("minibatch size " + std::to_string(batch.size()) +
                                    " out of range [1, " + std::to_string(N) + "]");
    }
    if (batch.back() >= N) {
        throw std::invalid_argument("minibatch index " + std::to_string(batch.back()) +
                                    " out of range [0, " + std::to_string(N) + ")");
    }
    out.assign(model.dim(), 0.0);
    model.add_log_prior_grad(theta, 1.0, out);
    const double weight = static_cast<double>(N) / static_cast<double>(batch.size());
    for (const std::size_t i : batch) {
        model.add_datum_loglik_grad(theta, i, weight, out);
    }
    if (!all_finite(out)) {
        report_overflow(model, theta, &batch);
    }
}

ParamVector stochastic_gradient(const GradientModel& model, const ParamVector& theta,
                                const MinibatchIndexSet& batch) {
    ParamVector out;
    stochastic_gradient_into(model, theta, batch, out);
    return out;
}

TestFunction phi_identity() {
    return {"theta", [](const ParamVector& theta) { return theta[0]; }};
}

TestFunction phi_square() {
    return {"theta_sq", [](const ParamVector& theta) { return theta[0] * theta[0]; }};
}

TestFunction phi_by_name(const std::string& name) {
    if (name == "theta") {
        return phi_identity();
    }
    if (name == "theta_sq" || name == "theta^2") {
        return phi_square();
    }
    throw std::invalid_argument("unknown test function: " + name);
}

}  // namespace vrmc
