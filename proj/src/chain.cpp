#include "vrmc/chain.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>
#include <string>

#include "vrmc/errors.hpp"

namespace vrmc {

namespace {

void validate_config(const GradientModel& model, const ChainConfig& config) {
    if (config.L == 0) {
        throw std::invalid_argument("chain length L must be >= 1");
    }
    if (config.burn_in >= config.L) {
        throw std::invalid_argument("burn_in must be < L");
    }
    if (config.record_every == 0) {
        throw std::invalid_argument("record_every must be >= 1");
    }
    if (!config.theta0.empty() && config.theta0.size() != model.dim()) {
        throw std::invalid_argument("theta0 dimension " + std::to_string(config.theta0.size()) +
                                    " does not match model dimension " +
                                    std::to_string(model.dim()));
    }
}

std::string format_double(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace

ParamVector sgld_step_with_noise(const ParamVector& theta, const ParamVector& g, double h,
                                 const ParamVector& zeta) {
    if (!(h > 0.0)) {
        throw std::invalid_argument("step size must be positive");
    }
    if (g.size() != theta.size() || zeta.size() != theta.size()) {
        throw std::invalid_argument("sgld_step: dimension mismatch");
    }
    const double noise_scale = std::sqrt(2.0 * h);
    ParamVector next(theta.size());
    for (std::size_t j = 0; j < theta.size(); ++j) {
        next[j] = theta[j] + h * g[j] + noise_scale * zeta[j];
    }
    return next;
}

ParamVector sgld_step(const ParamVector& theta, const ParamVector& g, double h, RngStream& rng,
                      std::size_t iteration) {
    ParamVector zeta(theta.size());
    for (std::size_t j = 0; j < theta.size(); ++j) {
        zeta[j] = rng.gaussian();
    }
    ParamVector next = sgld_step_with_noise(theta, g, h, zeta);
    if (!all_finite(next)) {
        throw DivergedChainError(iteration, h);
    }
    return next;
}

ChainRunner::ChainRunner(const GradientModel& model, GradientEstimator& estimator,
                         const ChainConfig& config)
    : model_(model),
      estimator_(estimator),
      config_(config),
      minibatch_rng_(config.seed, config.chain_index, StreamPurpose::minibatch),
      noise_rng_(config.seed, config.chain_index, StreamPurpose::noise) {
    validate_config(model, config);
    theta0_ = config.theta0.empty() ? ParamVector(model.dim(), 0.0) : config.theta0;
    if (!all_finite(theta0_)) {
        throw std::invalid_argument("theta0 must be finite");
    }
    theta_ = theta0_;
}

std::size_t ChainRunner::step() {
    if (done()) {
        throw ContractViolationError("chain already ran its configured L iterations");
    }
    const std::size_t l = iteration_;
    last_h_ = config_.schedule.at(l);
    grad_evals_ += estimator_.next_gradient(model_, theta_, l, minibatch_rng_, grad_);
    theta_ = sgld_step(theta_, grad_, last_h_, noise_rng_, l);
    return ++iteration_;
}

ChainTrace run_chain(const GradientModel& model, GradientEstimator& estimator,
                     const ChainConfig& config) {
    ChainRunner runner(model, estimator, config);
    ChainTrace trace;
    trace.initial_theta = runner.initial_theta();
    while (!runner.done()) {
        const std::size_t iter = runner.step();
        if (iter > config.burn_in && (iter - config.burn_in - 1) % config.record_every == 0) {
            trace.iterations.push_back(iter);
            trace.samples.push_back(runner.theta());
            trace.grad_evals.push_back(runner.grad_evals());
            trace.step_sizes.push_back(runner.last_step_size());
        }
    }
    trace.total_grad_evals = runner.grad_evals();
    return trace;
}

void trace_to_csv(const ChainTrace& trace, std::ostream& out) {
    constexpr std::size_t kMaxExportDim = 64;
    const std::size_t d = trace.samples.empty() ? 0 : trace.samples.front().size();
    out << "iteration,grad_evals,h";
    if (d <= kMaxExportDim) {
        for (std::size_t j = 0; j < d; ++j) {
            out << ",theta_" << j;
        }
    } else {
        out << ",theta_mean,theta_min,theta_max";
    }
    out << "\n";
    for (std::size_t k = 0; k < trace.size(); ++k) {
        out << trace.iterations[k] << ',' << trace.grad_evals[k] << ','
            << format_double(trace.step_sizes[k]);
        const ParamVector& s = trace.samples[k];
        if (d <= kMaxExportDim) {
            for (std::size_t j = 0; j < d; ++j) {
                out << ',' << format_double(s[j]);
            }
        } else {
            double sum = 0.0;
            double lo = s[0];
            double hi = s[0];
            for (const double v : s) {
                sum += v;
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            out << ',' << format_double(sum / static_cast<double>(d)) << ','
                << format_double(lo) << ',' << format_double(hi);
        }
        out << "\n";
    }
}

}  // namespace vrmc
