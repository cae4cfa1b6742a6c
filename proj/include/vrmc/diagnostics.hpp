#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "vrmc/chain.hpp"
#include "vrmc/model.hpp"

namespace vrmc {

/// Arithmetic mean of phi over the trace's retained samples.
/// Throws std::invalid_argument on an empty trace.
double sample_average(const ChainTrace& trace, const TestFunction& phi);

/// Mean of (phi_hat - phi_bar)^2 across independent runs.
double mse_of_runs(const std::vector<double>& phi_hats, double phi_bar);

/// Gradient-dispersion functional of the per-datum gradients a_i at theta:
///   Gamma = (1/N^2) sum_{i,j} a_i.a_j - (1/(N(N-1))) sum_{i!=j} a_i.a_j
/// computed in O(N d) via sum_{i,j} a_i.a_j = |sum_i a_i|^2. Always >= 0 up
/// to roundoff. N == 1 has no i!=j term; defined as |a_1|^2 (so the
/// (N-n) factor still zeroes the n=1 variance identity).
double gamma_at(const GradientModel& model, const ParamVector& theta);

/// Exact minibatch-noise second moment by exhaustive enumeration: averages
///   |DeltaV|^2,  DeltaV = sum_i a_i - (N/n) sum_{i in S} a_i
/// over all C(N,n) subsets S. Equals ((N-n)N^2/n) * gamma_at identically.
/// Throws EnumerationLimitError when C(N,n) > 10^6.
double deltaV_variance_exact(const GradientModel& model, const ParamVector& theta,
                             std::size_t n);

/// ((N-n)N^2/n) * gamma_at(model, theta): the closed form for the above.
double deltaV_variance_formula(const GradientModel& model, const ParamVector& theta,
                               std::size_t n);

/// Closed-form decomposition of the vr estimator's noise second moment into
/// the alpha-only, beta-only, and cross terms (A, B, C); total = A + B + C.
struct VrVarianceDecomposition {
    double total;
    double A;
    double B;
    double C;
};

/// Exact vr-estimator noise second moment at fixed (theta_l, anchor):
/// enumerates all C(N,n1) x C(N,n2) batch pairs for
///   DeltaV = [sum_i a_i - (N/n1) sum_{i in pi} b_i]
///          + (N/n2) sum_{i in correction} (b_i - a_i)
/// (a at theta_l, b at the anchor) and returns the enumerated total together
/// with the closed-form A, B, C, which must match total = A+B+C exactly.
/// Throws EnumerationLimitError when C(N,n1)*C(N,n2) > 10^6.
VrVarianceDecomposition vr_deltaV_variance_exact(const GradientModel& model,
                                                 const ParamVector& theta_l,
                                                 const ParamVector& anchor, std::size_t n1,
                                                 std::size_t n2);

/// Variance-reduction gain at the anchor (alpha == beta evaluation):
///   lambda = (N^3 (n1-n2)/(n1 n2)) * GammaTilde = -(B + C),
/// GammaTilde being the gamma functional of the anchor gradients. >= 0 for
/// n1 > n2; n2 >= n1 throws std::invalid_argument.
double lambda_at(const GradientModel& model, const ParamVector& anchor, std::size_t n1,
                 std::size_t n2);

/// Mean per-datum gradient gap between each state and its window anchor:
/// for each recorded iteration l, |mean_i(grad_i(theta_l) - grad_i(theta_a))|
/// with a = l - (l mod m). Requires a contiguous trace (burn_in 0,
/// record_every 1); the initial state serves as the first anchor.
std::vector<double> anchor_drift(const GradientModel& model, const ChainTrace& trace,
                                 std::size_t m);

/// One-stop variance summary; vr fields are present only for vr-mode reports.
/// The plain-minibatch quantities of a vr report use n = n2 (the per-step
/// correction batch size, the natural plain baseline).
struct VarianceReport {
    double gamma;
    double deltaV_formula;
    double deltaV_exact;
    std::optional<VrVarianceDecomposition> decomposition;
    std::optional<double> lambda;
};

VarianceReport plain_variance_report(const GradientModel& model, const ParamVector& theta,
                                     std::size_t n);

VarianceReport vr_variance_report(const GradientModel& model, const ParamVector& theta_l,
                                  const ParamVector& anchor, std::size_t n1, std::size_t n2);

/// Flat JSON object with keys gamma, deltaV_formula, deltaV_exact and, when
/// present, A, B, C, lambda.
std::string to_json_string(const VarianceReport& report);

}  // namespace vrmc
