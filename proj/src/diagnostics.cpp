#include "vrmc/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "vrmc/detail/combinatorics.hpp"
#include "vrmc/errors.hpp"

namespace vrmc {

namespace {

using detail::binomial_capped;
using detail::for_each_subset;

constexpr std::uint64_t kSubsetEvalLimit = 1'000'000;

std::vector<ParamVector> per_datum_gradients(const GradientModel& model,
                                             const ParamVector& theta) {
    const std::size_t n_data = model.data_size();
    std::vector<ParamVector> grads(n_data);
    for (std::size_t i = 0; i < n_data; ++i) {
        grads[i].assign(model.dim(), 0.0);
        model.add_datum_loglik_grad(theta, i, 1.0, grads[i]);
    }
    return grads;
}

ParamVector vector_sum(const std::vector<ParamVector>& vs, std::size_t dim) {
    ParamVector total(dim, 0.0);
    for (const ParamVector& v : vs) {
        axpy(1.0, v, total);
    }
    return total;
}

/// Gamma from precomputed per-datum gradients (see gamma_at).
double gamma_of(const std::vector<ParamVector>& grads, std::size_t dim) {
    const std::size_t n_data = grads.size();
    double diag = 0.0;  // sum_i |a_i|^2
    for (const ParamVector& g : grads) {
        diag += squared_norm(g);
    }
    if (n_data == 1) {
        return diag;
    }
    const double full = squared_norm(vector_sum(grads, dim));  // sum_{i,j} a_i.a_j
    const double nd = static_cast<double>(n_data);
    return full / (nd * nd) - (full - diag) / (nd * (nd - 1.0));
}

void check_batch_size(std::size_t n, std::size_t n_data, const char* what) {
    if (n == 0 || n > n_data) {
        throw std::invalid_argument(std::string(what) + " must be in [1, N=" +
                                    std::to_string(n_data) + "], got " + std::to_string(n));
    }
}

}  // namespace

double sample_average(const ChainTrace& trace, const TestFunction& phi) {
    if (trace.samples.empty()) {
        throw std::invalid_argument("sample_average: empty trace");
    }
    double s = 0.0;
    for (const ParamVector& theta : trace.samples) {
        s += phi(theta);
    }
    return s / static_cast<double>(trace.samples.size());
}

double mse_of_runs(const std::vector<double>& phi_hats, double phi_bar) {
    if (phi_hats.empty()) {
        throw std::invalid_argument("mse_of_runs: need at least one run");
    }
    double s = 0.0;
    for (const double phi_hat : phi_hats) {
        const double e = phi_hat - phi_bar;
        s += e * e;
    }
    return s / static_cast<double>(phi_hats.size());
}

double gamma_at(const GradientModel& model, const ParamVector& theta) {
    return gamma_of(per_datum_gradients(model, theta), model.dim());
}

double deltaV_variance_exact(const GradientModel& model, const ParamVector& theta,
                             std::size_t n) {
    const std::size_t n_data = model.data_size();
    check_batch_size(n, n_data, "deltaV_variance_exact: n");
    const auto count = binomial_capped(n_data, n, kSubsetEvalLimit);
    if (!count) {
        throw EnumerationLimitError("deltaV_variance_exact: C(" + std::to_string(n_data) +
                                    "," + std::to_string(n) + ") exceeds " +
                                    std::to_string(kSubsetEvalLimit) + " subsets");
    }
    const auto grads = per_datum_gradients(model, theta);
    const ParamVector total = vector_sum(grads, model.dim());
    const double scale = static_cast<double>(n_data) / static_cast<double>(n);

    double acc = 0.0;
    ParamVector delta(model.dim());
    for_each_subset(n_data, n, [&](const std::vector<std::size_t>& subset) {
        delta = total;
        for (const std::size_t i : subset) {
            axpy(-scale, grads[i], delta);
        }
        acc += squared_norm(delta);
    });
    return acc / static_cast<double>(*count);
}

double deltaV_variance_formula(const GradientModel& model, const ParamVector& theta,
                               std::size_t n) {
    const std::size_t n_data = model.data_size();
    check_batch_size(n, n_data, "deltaV_variance_formula: n");
    const double nd = static_cast<double>(n_data);
    return (nd - static_cast<double>(n)) * nd * nd / static_cast<double>(n) *
           gamma_at(model, theta);
}

VrVarianceDecomposition vr_deltaV_variance_exact(const GradientModel& model,
                                                 const ParamVector& theta_l,
                                                 const ParamVector& anchor, std::size_t n1,
                                                 std::size_t n2) {
    const std::size_t n_data = model.data_size();
    check_batch_size(n1, n_data, "vr_deltaV_variance_exact: n1");
    check_batch_size(n2, n_data, "vr_deltaV_variance_exact: n2");
    const auto c1 = binomial_capped(n_data, n1, kSubsetEvalLimit);
    const auto c2 = binomial_capped(n_data, n2, kSubsetEvalLimit);
    if (!c1 || !c2 || *c1 > kSubsetEvalLimit / *c2) {
        throw EnumerationLimitError("vr_deltaV_variance_exact: C(N,n1)*C(N,n2) exceeds " +
                                    std::to_string(kSubsetEvalLimit) + " pairs");
    }

    const std::size_t dim = model.dim();
    const auto alpha = per_datum_gradients(model, theta_l);
    const auto beta = per_datum_gradients(model, anchor);
    const ParamVector alpha_sum = vector_sum(alpha, dim);
    const double w1 = static_cast<double>(n_data) / static_cast<double>(n1);
    const double w2 = static_cast<double>(n_data) / static_cast<double>(n2);

    // DeltaV(pi, corr) = [sum_i alpha_i - w1 sum_{i in pi} beta_i]
    //                  + w2 sum_{i in corr} (beta_i - alpha_i)
    // The two factors are independent, so precompute each family once.
    std::vector<ParamVector> anchor_terms;
    anchor_terms.reserve(*c1);
    for_each_subset(n_data, n1, [&](const std::vector<std::size_t>& pi) {
        ParamVector u = alpha_sum;
        for (const std::size_t i : pi) {
            axpy(-w1, beta[i], u);
        }
        anchor_terms.push_back(std::move(u));
    });
    std::vector<ParamVector> correction_terms;
    correction_terms.reserve(*c2);
    for_each_subset(n_data, n2, [&](const std::vector<std::size_t>& corr) {
        ParamVector v(dim, 0.0);
        for (const std::size_t i : corr) {
            axpy(w2, beta[i], v);
            axpy(-w2, alpha[i], v);
        }
        correction_terms.push_back(std::move(v));
    });

    double acc = 0.0;
    ParamVector delta(dim);
    for (const ParamVector& u : anchor_terms) {
        for (const ParamVector& v : correction_terms) {
            delta = u;
            axpy(1.0, v, delta);
            acc += squared_norm(delta);
        }
    }
    const double total =
        acc / (static_cast<double>(*c1) * static_cast<double>(*c2));

    // Closed forms. With D.. the diagonal sums and T.. the full double sums:
    //   D_aa = sum_i |alpha_i|^2          T_aa = |sum_i alpha_i|^2
    // the three terms reduce to linear combinations of (D, T - D) pairs.
    double d_aa = 0.0, d_bb = 0.0, d_ab = 0.0;
    for (std::size_t i = 0; i < n_data; ++i) {
        d_aa += squared_norm(alpha[i]);
        d_bb += squared_norm(beta[i]);
        d_ab += dot(alpha[i], beta[i]);
    }
    const ParamVector beta_sum = vector_sum(beta, dim);
    const double t_aa = squared_norm(alpha_sum);
    const double t_bb = squared_norm(beta_sum);
    const double t_ab = dot(alpha_sum, beta_sum);

    const double nd = static_cast<double>(n_data);
    const double f1 = static_cast<double>(n1);
    const double f2 = static_cast<double>(n2);
    const double off1 = (nd - f1) / (f1 * (nd - 1.0));  // weight of the i != j part
    const double off2 = (nd - f2) / (f2 * (nd - 1.0));

    VrVarianceDecomposition out;
    out.A = (nd / f2 - 1.0) * d_aa - off2 * (t_aa - d_aa);
    out.B = (nd / f2 + nd / f1 - 2.0) * d_bb - (off1 + off2) * (t_bb - d_bb);
    out.C = 2.0 * (1.0 - nd / f2) * d_ab + 2.0 * off2 * (t_ab - d_ab);
    out.total = total;
    return out;
}

double lambda_at(const GradientModel& model, const ParamVector& anchor, std::size_t n1,
                 std::size_t n2) {
    const std::size_t n_data = model.data_size();
    check_batch_size(n1, n_data, "lambda_at: n1");
    check_batch_size(n2, n_data, "lambda_at: n2");
    if (n2 >= n1) {
        throw std::invalid_argument("lambda_at: requires n2 < n1 (got n1=" +
                                    std::to_string(n1) + ", n2=" + std::to_string(n2) + ")");
    }
    const double nd = static_cast<double>(n_data);
    const double gain = nd * nd * nd * (static_cast<double>(n1) - static_cast<double>(n2)) /
                        (static_cast<double>(n1) * static_cast<double>(n2));
    return gain * gamma_at(model, anchor);
}

std::vector<double> anchor_drift(const GradientModel& model, const ChainTrace& trace,
                                 std::size_t m) {
    if (m == 0) {
        throw std::invalid_argument("anchor_drift: m must be >= 1");
    }
    for (std::size_t j = 0; j < trace.iterations.size(); ++j) {
        if (trace.iterations[j] != j + 1) {
            throw std::invalid_argument(
                "anchor_drift: needs a contiguous trace (burn_in 0, record_every 1)");
        }
    }
    const std::size_t dim = model.dim();
    const std::size_t n_data = model.data_size();
    const double inv_n = 1.0 / static_cast<double>(n_data);

    // Likelihood-only gradient sum at theta.
    const auto grad_sum = [&](const ParamVector& theta) {
        ParamVector out(dim, 0.0);
        for (std::size_t i = 0; i < n_data; ++i) {
            model.add_datum_loglik_grad(theta, i, 1.0, out);
        }
        return out;
    };

    const auto state_at = [&](std::size_t l) -> const ParamVector& {
        return l == 0 ? trace.initial_theta : trace.samples[l - 1];
    };

    std::vector<double> drifts;
    drifts.reserve(trace.samples.size());
    std::size_t cached_anchor = 0;
    ParamVector anchor_sum = grad_sum(state_at(0));
    for (std::size_t j = 0; j < trace.samples.size(); ++j) {
        const std::size_t l = j + 1;
        const std::size_t a = l - (l % m);
        if (a != cached_anchor) {
            anchor_sum = grad_sum(state_at(a));
            cached_anchor = a;
        }
        ParamVector gap = grad_sum(trace.samples[j]);
        axpy(-1.0, anchor_sum, gap);
        for (double& x : gap) {
            x *= inv_n;
        }
        drifts.push_back(norm(gap));
    }
    return drifts;
}

VarianceReport plain_variance_report(const GradientModel& model, const ParamVector& theta,
                                     std::size_t n) {
    VarianceReport report;
    report.gamma = gamma_at(model, theta);
    report.deltaV_formula = deltaV_variance_formula(model, theta, n);
    report.deltaV_exact = deltaV_variance_exact(model, theta, n);
    return report;
}

VarianceReport vr_variance_report(const GradientModel& model, const ParamVector& theta_l,
                                  const ParamVector& anchor, std::size_t n1,
                                  std::size_t n2) {
    VarianceReport report;
    report.gamma = gamma_at(model, theta_l);
    report.deltaV_formula = deltaV_variance_formula(model, theta_l, n2);
    report.deltaV_exact = deltaV_variance_exact(model, theta_l, n2);
    report.decomposition = vr_deltaV_variance_exact(model, theta_l, anchor, n1, n2);
    report.lambda = lambda_at(model, anchor, n1, n2);
    return report;
}

std::string to_json_string(const VarianceReport& report) {
    nlohmann::json j;
    j["gamma"] = report.gamma;
    j["deltaV_formula"] = report.deltaV_formula;
    j["deltaV_exact"] = report.deltaV_exact;
    if (report.decomposition) {
        j["A"] = report.decomposition->A;
        j["B"] = report.decomposition->B;
        j["C"] = report.decomposition->C;
    }
    if (report.lambda) {
        j["lambda"] = *report.lambda;
    }
    return j.dump();
}

}  // namespace vrmc
