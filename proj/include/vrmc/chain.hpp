#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <vector>

#include "vrmc/estimator.hpp"
#include "vrmc/model.hpp"
#include "vrmc/rng.hpp"
#include "vrmc/schedule.hpp"

namespace vrmc {

struct ChainConfig {
    std::size_t L = 1;                               // total iterations, >= 1
    StepSizeSchedule schedule = StepSizeSchedule::fixed(1e-3);
    std::uint64_t seed = 0;
    std::uint64_t chain_index = 0;                   // stream id within the seed
    std::size_t burn_in = 0;                         // recorded iterations skipped, < L
    std::size_t record_every = 1;                    // thinning stride, >= 1
    ParamVector theta0;                              // empty means zeros(dim)
};

/// Recorded samples theta_1..theta_L (post-step states; the initial state is
/// kept separately and is not a sample), thinned by burn_in/record_every.
struct ChainTrace {
    ParamVector initial_theta;
    std::vector<std::size_t> iterations;   // strictly increasing, in 1..L
    std::vector<ParamVector> samples;
    std::vector<std::size_t> grad_evals;   // cumulative cost at each record
    std::vector<double> step_sizes;        // h used by the recording step
    std::size_t total_grad_evals = 0;

    std::size_t size() const noexcept { return samples.size(); }
};

/// theta + h*g + sqrt(2h)*zeta for a caller-supplied zeta (no rng; test and
/// composition hook).
ParamVector sgld_step_with_noise(const ParamVector& theta, const ParamVector& g, double h,
                                 const ParamVector& zeta);

/// One SGLD transition: theta + h*g + sqrt(2h)*zeta, zeta ~ N(0, I_d) drawn
/// from rng (exactly dim gaussians). Throws DivergedChainError carrying
/// (iteration, h) if any coordinate of the result is non-finite.
ParamVector sgld_step(const ParamVector& theta, const ParamVector& g, double h, RngStream& rng,
                      std::size_t iteration = 0);

/// Stepwise chain driver for harnesses that need per-iteration access
/// (running averages, checkpointing). Owns the chain's two rng streams.
class ChainRunner {
public:
    ChainRunner(const GradientModel& model, GradientEstimator& estimator,
                const ChainConfig& config);

    /// Advances one iteration; returns the new iteration index (1-based).
    /// Must not be called more than config.L times.
    std::size_t step();

    bool done() const noexcept { return iteration_ >= config_.L; }
    std::size_t iteration() const noexcept { return iteration_; }
    const ParamVector& theta() const noexcept { return theta_; }
    std::size_t grad_evals() const noexcept { return grad_evals_; }
    double last_step_size() const noexcept { return last_h_; }
    const ParamVector& initial_theta() const noexcept { return theta0_; }

private:
    const GradientModel& model_;
    GradientEstimator& estimator_;
    ChainConfig config_;
    RngStream minibatch_rng_;
    RngStream noise_rng_;
    ParamVector theta0_;
    ParamVector theta_;
    ParamVector grad_;
    std::size_t iteration_ = 0;
    std::size_t grad_evals_ = 0;
    double last_h_ = 0.0;
};

/// Runs L transitions and records the trace. Charges estimator costs into
/// grad_evals (n per plain step; n2 at theta plus n2 at the anchor per vr
/// step, plus n1 at each refresh). Propagates DivergedChainError with the
/// failing iteration.
ChainTrace run_chain(const GradientModel& model, GradientEstimator& estimator,
                     const ChainConfig& config);

/// CSV export: iteration,grad_evals,h,theta_0..theta_{d-1} for d <= 64;
/// larger d writes summary columns theta_mean,theta_min,theta_max instead.
void trace_to_csv(const ChainTrace& trace, std::ostream& out);

}  // namespace vrmc
