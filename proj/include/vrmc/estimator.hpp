#pragma once

#include <cstddef>
#include <string>

#include "vrmc/minibatch.hpp"
#include "vrmc/model.hpp"
#include "vrmc/rng.hpp"

namespace vrmc {

enum class EstimatorMode { plain, vr, svrg_ld };

/// Unbound estimator description. svrg_ld is the anchor-over-the-full-dataset
/// special case: its n1 is resolved to N when bound to a model, after which
/// it runs the identical vr code path (and so produces identical draws).
struct EstimatorSpec {
    EstimatorMode mode = EstimatorMode::plain;
    std::size_t n = 0;   // plain minibatch size
    std::size_t n1 = 0;  // vr anchor minibatch size (0 until bound for svrg_ld)
    std::size_t n2 = 0;  // vr correction minibatch size
    std::size_t m = 0;   // vr anchor refresh interval

    static EstimatorSpec plain(std::size_t n);
    static EstimatorSpec vr(std::size_t n1, std::size_t n2, std::size_t m);
    static EstimatorSpec svrg_ld(std::size_t n2, std::size_t m);

    /// Comma-free coordinate label: "plain-10", "vr-100-10-10", "svrg_ld-10-10".
    std::string label() const;
};

/// Mutable control-variate state: the anchor parameter, its cached scaled
/// likelihood gradient (NO prior term), and the refresh phase.
struct VrState {
    ParamVector anchor;
    ParamVector anchor_grad;  // (N/n1) * sum_{i in pi} d/dtheta log p(d_i | anchor)
    std::size_t steps_since_refresh = 0;
    bool initialized = false;
};

/// (N/|batch|) * sum_{i in batch} d/dtheta log p(d_i | theta): the likelihood
/// part of the anchor gradient for an explicit index set (deterministic).
ParamVector anchor_likelihood_gradient(const GradientModel& model, const ParamVector& theta,
                                       const MinibatchIndexSet& batch);

/// Rebases the state on theta: draws a size-n1 batch without replacement,
/// caches anchor := theta and anchor_grad := (N/n1) sum of per-datum
/// gradients, and resets the refresh counter. Charges n1 gradient
/// evaluations (the returned count).
std::size_t refresh_anchor(VrState& state, const GradientModel& model, const ParamVector& theta,
                           std::size_t n1, RngStream& rng);

/// Control-variate gradient for an explicit correction batch:
///   anchor_grad + d/dtheta log p(theta)
///   + (N/|batch|) * sum_{i in batch} (grad_i(theta) - grad_i(anchor)).
/// Throws ContractViolationError if no refresh has happened yet.
ParamVector vr_gradient_with_batch(const VrState& state, const GradientModel& model,
                                   const ParamVector& theta, const MinibatchIndexSet& batch);

/// Draws the size-n2 correction batch (independently of the anchor batch) and
/// evaluates vr_gradient_with_batch. Expectation over both batch draws equals
/// full_gradient(theta). Charges 2*n2 gradient evaluations: n2 at theta plus
/// n2 recomputed at the anchor (the anchor cache is O(d), not O(n1*d)).
ParamVector vr_gradient(VrState& state, const GradientModel& model, const ParamVector& theta,
                        std::size_t n2, RngStream& rng);

/// A gradient estimator bound to one chain. Owns the vr state and sampling
/// scratch; parallel chains each hold their own instance over a shared model.
class GradientEstimator {
public:
    /// Validates the spec against the model (plain: 1 <= n <= N;
    /// vr: 1 <= n2 < n1 <= N, m >= 1) and resolves svrg_ld's n1 = N.
    GradientEstimator(const EstimatorSpec& spec, const GradientModel& model);

    EstimatorMode mode() const noexcept { return spec_.mode; }

    /// Spec with svrg_ld's n1 resolved.
    const EstimatorSpec& spec() const noexcept { return spec_; }

    /// Gradient for iteration l written into out; returns the gradient
    /// evaluations charged. vr modes refresh the anchor whenever l % m == 0
    /// (cost n1 + 2*n2 on those iterations, 2*n2 otherwise).
    std::size_t next_gradient(const GradientModel& model, const ParamVector& theta,
                              std::size_t l, RngStream& rng, ParamVector& out);

    const VrState& state() const noexcept { return state_; }

    /// Exact cumulative gradient evaluations for iterations 0..L-1:
    /// plain n*L; vr 2*n2*L + n1*ceil(L/m).
    static std::size_t total_cost(const EstimatorSpec& resolved_spec, std::size_t L);

    /// Largest L whose total cost fits the budget (0 if even one step does not).
    static std::size_t steps_within_budget(const EstimatorSpec& resolved_spec,
                                           std::size_t budget);

private:
    EstimatorSpec spec_;
    VrState state_;
    MinibatchSampler sampler_;
    MinibatchIndexSet batch_;
};

}  // namespace vrmc
