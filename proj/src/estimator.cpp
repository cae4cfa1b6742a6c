#include "vrmc/estimator.hpp"

#include <stdexcept>
#include <string>

#include "vrmc/errors.hpp"

namespace vrmc {

EstimatorSpec EstimatorSpec::plain(std::size_t n) {
    EstimatorSpec spec;
    spec.mode = EstimatorMode::plain;
    spec.n = n;
    return spec;
}

EstimatorSpec EstimatorSpec::vr(std::size_t n1, std::size_t n2, std::size_t m) {
    EstimatorSpec spec;
    spec.mode = EstimatorMode::vr;
    spec.n1 = n1;
    spec.n2 = n2;
    spec.m = m;
    if (n2 >= n1) {
        throw std::invalid_argument("vr estimator requires n2 < n1 (got n1=" +
                                    std::to_string(n1) + ", n2=" + std::to_string(n2) + ")");
    }
    if (n2 == 0 || m == 0) {
        throw std::invalid_argument("vr estimator requires n2 >= 1 and m >= 1");
    }
    return spec;
}

EstimatorSpec EstimatorSpec::svrg_ld(std::size_t n2, std::size_t m) {
    EstimatorSpec spec;
    spec.mode = EstimatorMode::svrg_ld;
    spec.n2 = n2;
    spec.m = m;
    if (n2 == 0 || m == 0) {
        throw std::invalid_argument("svrg_ld estimator requires n2 >= 1 and m >= 1");
    }
    return spec;
}

std::string EstimatorSpec::label() const {
    switch (mode) {
        case EstimatorMode::plain:
            return "plain-" + std::to_string(n);
        case EstimatorMode::vr:
            return "vr-" + std::to_string(n1) + "-" + std::to_string(n2) + "-" +
                   std::to_string(m);
        case EstimatorMode::svrg_ld:
            return "svrg_ld-" + std::to_string(n2) + "-" + std::to_string(m);
    }
    return "unknown";
}

ParamVector anchor_likelihood_gradient(const GradientModel& model, const ParamVector& theta,
                                       const MinibatchIndexSet& batch) {
    if (batch.empty()) {
        throw std::invalid_argument("anchor batch must be non-empty");
    }
    ParamVector out(model.dim(), 0.0);
    const double weight =
        static_cast<double>(model.data_size()) / static_cast<double>(batch.size());
    for (const std::size_t i : batch) {
        model.add_datum_loglik_grad(theta, i, weight, out);
    }
    if (!all_finite(out)) {
        throw NumericOverflowError(batch.back());
    }
    return out;
}

std::size_t refresh_anchor(VrState& state, const GradientModel& model, const ParamVector& theta,
                           std::size_t n1, RngStream& rng) {
    MinibatchIndexSet batch = sample_without_replacement(model.data_size(), n1, rng);
    state.anchor = theta;
    state.anchor_grad = anchor_likelihood_gradient(model, theta, batch);
    state.steps_since_refresh = 0;
    state.initialized = true;
    return n1;
}

ParamVector vr_gradient_with_batch(const VrState& state, const GradientModel& model,
                                   const ParamVector& theta, const MinibatchIndexSet& batch) {
    if (!state.initialized) {
        throw ContractViolationError("vr gradient requested before any anchor refresh");
    }
    if (batch.empty()) {
        throw std::invalid_argument("correction batch must be non-empty");
    }
    ParamVector out = state.anchor_grad;
    model.add_log_prior_grad(theta, 1.0, out);
    const double weight =
        static_cast<double>(model.data_size()) / static_cast<double>(batch.size());
    // Accumulate the two sides separately and add their difference, so the
    // correction cancels exactly (not just approximately) when theta sits on
    // the anchor. Folding both signs into one running sum loses that.
    ParamVector at_theta(model.dim(), 0.0);
    ParamVector at_anchor(model.dim(), 0.0);
    for (const std::size_t i : batch) {
        model.add_datum_loglik_grad(theta, i, weight, at_theta);
        model.add_datum_loglik_grad(state.anchor, i, weight, at_anchor);
    }
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] += at_theta[k] - at_anchor[k];
    }
    if (!all_finite(out)) {
        throw NumericOverflowError(batch.back());
    }
    return out;
}

ParamVector vr_gradient(VrState& state, const GradientModel& model, const ParamVector& theta,
                        std::size_t n2, RngStream& rng) {
    if (!state.initialized) {
        throw ContractViolationError("vr gradient requested before any anchor refresh");
    }
    const MinibatchIndexSet batch = sample_without_replacement(model.data_size(), n2, rng);
    return vr_gradient_with_batch(state, model, theta, batch);
}

GradientEstimator::GradientEstimator(const EstimatorSpec& spec, const GradientModel& model)
    : spec_(spec), sampler_(model.data_size()) {
    const std::size_t N = model.data_size();
    switch (spec_.mode) {
        case EstimatorMode::plain:
            if (spec_.n == 0 || spec_.n > N) {
                throw std::invalid_argument("plain minibatch size " + std::to_string(spec_.n) +
                                            " out of range [1, " + std::to_string(N) + "]");
            }
            break;
        case EstimatorMode::svrg_ld:
            spec_.n1 = N;
            [[fallthrough]];
        case EstimatorMode::vr:
            if (spec_.n1 > N) {
                throw std::invalid_argument("anchor minibatch size " + std::to_string(spec_.n1) +
                                            " exceeds the dataset size " + std::to_string(N));
            }
            if (spec_.n2 >= spec_.n1) {
                throw std::invalid_argument("vr estimator requires n2 < n1 (got n1=" +
                                            std::to_string(spec_.n1) +
                                            ", n2=" + std::to_string(spec_.n2) + ")");
            }
            break;
    }
}

std::size_t GradientEstimator::next_gradient(const GradientModel& model,
                                             const ParamVector& theta, std::size_t l,
                                             RngStream& rng, ParamVector& out) {
    if (spec_.mode == EstimatorMode::plain) {
        sampler_.draw(spec_.n, rng, batch_);
        stochastic_gradient_into(model, theta, batch_, out);
        return spec_.n;
    }

    std::size_t cost = 0;
    if (l % spec_.m == 0) {
        sampler_.draw(spec_.n1, rng, batch_);
        state_.anchor = theta;
        state_.anchor_grad = anchor_likelihood_gradient(model, theta, batch_);
        state_.initialized = true;
        cost += spec_.n1;
    }
    state_.steps_since_refresh = l % spec_.m;
    sampler_.draw(spec_.n2, rng, batch_);
    out = vr_gradient_with_batch(state_, model, theta, batch_);
    cost += 2 * spec_.n2;
    return cost;
}

std::size_t GradientEstimator::total_cost(const EstimatorSpec& spec, std::size_t L) {
    if (spec.mode == EstimatorMode::plain) {
        return spec.n * L;
    }
    if (spec.n1 == 0) {
        throw std::logic_error("total_cost needs a resolved spec (svrg_ld n1 unbound)");
    }
    const std::size_t refreshes = (L + spec.m - 1) / spec.m;
    return 2 * spec.n2 * L + spec.n1 * refreshes;
}

std::size_t GradientEstimator::steps_within_budget(const EstimatorSpec& spec,
                                                   std::size_t budget) {
    std::size_t lo = 0;
    std::size_t hi = budget;  // cost(L) >= L, so L can never exceed the budget
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo + 1) / 2;
        if (total_cost(spec, mid) <= budget) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    return lo;
}

}  // namespace vrmc
