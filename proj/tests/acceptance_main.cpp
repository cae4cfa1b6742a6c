// Release gate: one PASS/FAIL line per check, exit 1 if anything fails.
//
// The enumeration identities run through the same self-check oracles the CLI
// exposes; the study-level checks re-run the three experiments in process and
// assert the orderings the library is supposed to deliver.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vrmc/chain.hpp"
#include "vrmc/estimator.hpp"
#include "vrmc/experiments.hpp"
#include "vrmc/model.hpp"
#include "vrmc/models/gaussian_mean.hpp"
#include "vrmc/rng.hpp"
#include "vrmc/schedule.hpp"

namespace {

using vrmc::ChainConfig;
using vrmc::ChainTrace;
using vrmc::EstimatorSpec;
using vrmc::ExperimentConfig;
using vrmc::ExperimentResult;
using vrmc::GaussianMeanModel;
using vrmc::GradientEstimator;
using vrmc::MetricRow;
using vrmc::ParamVector;
using vrmc::RngStream;
using vrmc::StepSizeSchedule;
using vrmc::StreamPurpose;

constexpr std::uint64_t kSeed = 12345;

double median(std::vector<double> v) {
    if (v.empty()) {
        throw std::runtime_error("median of an empty set");
    }
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

// coordinate -> repeat -> checkpoint rows, preserving emission order.
using SeriesMap = std::map<std::string, std::map<std::size_t, std::vector<const MetricRow*>>>;

SeriesMap group_rows(const std::vector<MetricRow>& rows) {
    SeriesMap series;
    for (const MetricRow& row : rows) {
        series[row.coordinate][row.repeat].push_back(&row);
    }
    return series;
}

/// Median over repeats of the final-checkpoint sq_err. Fails (via detail and
/// the ok flag) if any repeat ended without a metric, i.e. diverged.
double median_final_sq_err(const SeriesMap& series, const std::string& coordinate,
                           std::ostream& detail, bool& ok) {
    const auto it = series.find(coordinate);
    if (it == series.end()) {
        detail << "missing coordinate " << coordinate << "\n";
        ok = false;
        return 0.0;
    }
    std::vector<double> finals;
    for (const auto& [repeat, checkpoints] : it->second) {
        if (checkpoints.empty() || !checkpoints.back()->sq_err.has_value()) {
            detail << coordinate << " repeat " << repeat << " has no final metric\n";
            ok = false;
            return 0.0;
        }
        finals.push_back(*checkpoints.back()->sq_err);
    }
    return median(finals);
}

/// Per-checkpoint-index medians of sq_err across repeats; every repeat must
/// have the same checkpoint count.
std::vector<double> checkpoint_medians(const SeriesMap& series, const std::string& coordinate,
                                       std::ostream& detail, bool& ok) {
    const auto it = series.find(coordinate);
    if (it == series.end()) {
        detail << "missing coordinate " << coordinate << "\n";
        ok = false;
        return {};
    }
    const std::size_t k_count = it->second.begin()->second.size();
    std::vector<double> medians;
    for (std::size_t k = 0; k < k_count; ++k) {
        std::vector<double> vals;
        for (const auto& [repeat, checkpoints] : it->second) {
            if (checkpoints.size() != k_count || !checkpoints[k]->sq_err.has_value()) {
                detail << coordinate << " repeat " << repeat << " breaks the checkpoint grid\n";
                ok = false;
                return {};
            }
            vals.push_back(*checkpoints[k]->sq_err);
        }
        medians.push_back(median(vals));
    }
    return medians;
}

// ---------------------------------------------------------------------------
// checks

bool plain_noise_enumeration(std::ostream& detail) {
    return vrmc::check_deltaV_equivalence(kSeed, detail);
}

bool vr_noise_decomposition(std::ostream& detail) {
    return vrmc::check_vr_decomposition(kSeed, detail);
}

bool vr_unbiasedness(std::ostream& detail) {
    bool ok = true;
    RngStream data_rng(kSeed, 0, StreamPurpose::data_gen);
    const ParamVector theta{0.2};
    const ParamVector anchor{0.9};
    for (std::size_t N = 2; N <= 6; ++N) {
        std::vector<double> data(N);
        for (double& x : data) {
            x = 2.0 * data_rng.gaussian();
        }
        const GaussianMeanModel model(data);
        for (std::size_t n1 = 2; n1 <= N; ++n1) {
            for (std::size_t n2 = 1; n2 < n1; ++n2) {
                ok = vrmc::check_vr_unbiasedness_exhaustive(model, theta, anchor, n1, n2, 1e-12,
                                                            detail) &&
                     ok;
            }
        }
    }
    return vrmc::check_vr_unbiasedness_monte_carlo(kSeed, detail) && ok;
}

bool variance_gap_sign(std::ostream& detail) { return vrmc::check_lambda_sign(kSeed, detail); }

bool finite_difference_agreement(std::ostream& detail) {
    return vrmc::check_finite_difference_gradients(kSeed, detail);
}

/// Long full-gradient chain against the conjugate posterior: first moment
/// within 3 batch-means standard errors, second moment within 10%, and the
/// discretization bias in the variance must shrink when h is halved.
bool posterior_calibration(std::ostream& detail) {
    RngStream data_rng(4242, 0, StreamPurpose::data_gen);
    const GaussianMeanModel model(vrmc::generate_gaussian_data(100, 1.0, data_rng));
    const double mu = model.posterior_mean();
    const double sigma2 = model.posterior_variance();

    const std::size_t L = 200000;
    const std::size_t burn = 10000;

    const auto first_coords = [&](double h, std::uint64_t chain_id) {
        GradientEstimator estimator(EstimatorSpec::plain(model.data_size()), model);
        ChainConfig cc;
        cc.L = L;
        cc.schedule = StepSizeSchedule::fixed(h);
        cc.seed = 777;
        cc.chain_index = chain_id;
        cc.burn_in = burn;
        const ChainTrace trace = vrmc::run_chain(model, estimator, cc);
        std::vector<double> xs;
        xs.reserve(trace.size());
        for (const ParamVector& s : trace.samples) {
            xs.push_back(s[0]);
        }
        return xs;
    };

    const std::vector<double> head = first_coords(1e-3, 0);
    const std::size_t n = head.size();
    double mean = 0.0;
    for (const double x : head) {
        mean += x;
    }
    mean /= static_cast<double>(n);

    const std::size_t batches = 100;
    const std::size_t blen = n / batches;
    std::vector<double> batch_means(batches, 0.0);
    for (std::size_t b = 0; b < batches; ++b) {
        double s = 0.0;
        for (std::size_t i = b * blen; i < (b + 1) * blen; ++i) {
            s += head[i];
        }
        batch_means[b] = s / static_cast<double>(blen);
    }
    double grand = 0.0;
    for (const double bm : batch_means) {
        grand += bm;
    }
    grand /= static_cast<double>(batches);
    double bvar = 0.0;
    for (const double bm : batch_means) {
        bvar += (bm - grand) * (bm - grand);
    }
    bvar /= static_cast<double>(batches - 1);
    const double mcse = std::sqrt(bvar / static_cast<double>(batches));

    double var = 0.0;
    for (const double x : head) {
        var += (x - mean) * (x - mean);
    }
    var /= static_cast<double>(n - 1);

    const bool mean_ok = std::abs(mean - mu) <= 3.0 * mcse;
    const bool var_ok = std::abs(var - sigma2) <= 0.10 * sigma2;

    // Pool several chains per step size so the bias comparison is not noise.
    const auto pooled_variance = [&](double h) {
        double s = 0.0;
        double s2 = 0.0;
        std::size_t count = 0;
        for (std::uint64_t chain = 0; chain < 8; ++chain) {
            for (const double x : first_coords(h, chain)) {
                s += x;
                s2 += x * x;
                ++count;
            }
        }
        const double m = s / static_cast<double>(count);
        return s2 / static_cast<double>(count) - m * m;
    };
    const double bias_coarse = std::abs(pooled_variance(1e-3) - sigma2);
    const double bias_fine = std::abs(pooled_variance(5e-4) - sigma2);
    const bool halving_ok = bias_fine < bias_coarse;

    detail << "posterior mean " << mu << ", chain mean " << mean << " (mcse " << mcse << ")\n"
           << "posterior variance " << sigma2 << ", chain variance " << var << "\n"
           << "pooled variance bias: h=1e-3 " << bias_coarse << ", h=5e-4 " << bias_fine << "\n";
    return mean_ok && var_ok && halving_ok;
}

/// Fixed-budget sweep: at equal total gradient evaluations the final
/// squared-error medians must increase with the minibatch size.
bool budget_sweep_ordering(std::ostream& detail) {
    const ExperimentConfig cfg = vrmc::parse_experiment_config(R"({
        "experiment": "budget_sweep",
        "model": {"kind": "gaussian_mean", "N": 1000, "theta_true": 1.0, "data_seed": 9000},
        "phi": "theta_sq",
        "h": 1e-6,
        "budget": 100000,
        "n_values": [1, 10, 100],
        "repeats": 20,
        "seed": 42,
        "checkpoints": 20,
        "theta0": 0.0
    })");
    const ExperimentResult result = vrmc::run_experiment(cfg, 0);
    const SeriesMap series = group_rows(result.rows);
    bool ok = result.warnings.empty();
    const double m1 = median_final_sq_err(series, "plain-1", detail, ok);
    const double m10 = median_final_sq_err(series, "plain-10", detail, ok);
    const double m100 = median_final_sq_err(series, "plain-100", detail, ok);
    detail << "final median sq_err: n=1 " << m1 << ", n=10 " << m10 << ", n=100 " << m100 << "\n";
    return ok && m1 <= m10 && m10 <= m100;
}

/// Control-variate chain vs the plain chain with the same per-step batch
/// size: the vr median error must win at 70% of the checkpoints past one
/// data pass, and at the final checkpoint.
bool vr_budget_dominance(std::ostream& detail) {
    const ExperimentConfig cfg = vrmc::parse_experiment_config(R"({
        "experiment": "vr_compare",
        "model": {"kind": "gaussian_mean", "N": 1000, "theta_true": 1.0, "data_seed": 9000},
        "phi": "theta_sq",
        "h": 1e-3,
        "budget": 200000,
        "n1": 100, "n2": 10, "m": 10,
        "repeats": 20,
        "seed": 42,
        "checkpoints": 20,
        "theta0": 0.0
    })");
    const ExperimentResult result = vrmc::run_experiment(cfg, 0);
    const SeriesMap series = group_rows(result.rows);
    bool ok = result.warnings.empty();
    const std::vector<double> plain = checkpoint_medians(series, "plain-10", detail, ok);
    const std::vector<double> vr = checkpoint_medians(series, "vr-100-10-10", detail, ok);
    if (!ok || plain.size() != vr.size() || plain.empty()) {
        detail << "checkpoint grids do not line up\n";
        return false;
    }

    // Data passes completed at checkpoint k, read off the plain series.
    const auto& plain_rows = series.at("plain-10").begin()->second;
    std::size_t considered = 0;
    std::size_t wins = 0;
    for (std::size_t k = 0; k < plain.size(); ++k) {
        if (plain_rows[k]->data_passes <= 1.0) {
            continue;
        }
        ++considered;
        if (vr[k] <= plain[k]) {
            ++wins;
        }
    }
    const bool final_win = vr.back() <= plain.back();
    detail << "wins past one data pass: " << wins << "/" << considered << "; final medians vr "
           << vr.back() << " vs plain " << plain.back() << "\n";
    return considered > 0 && 10 * wins >= 7 * considered && final_win;
}

/// Anchor-batch sweep: every anchor size must beat the plain baseline's
/// final median error under the same budget.
bool anchor_size_sweep(std::ostream& detail) {
    const ExperimentConfig cfg = vrmc::parse_experiment_config(R"({
        "experiment": "n1_sweep",
        "model": {"kind": "gaussian_mean", "N": 1000, "theta_true": 1.0, "data_seed": 9000},
        "phi": "theta_sq",
        "h": 1e-3,
        "budget": 200000,
        "n1_values": [20, 50, 100, 200],
        "n2": 10, "m": 10,
        "repeats": 20,
        "seed": 42,
        "checkpoints": 20,
        "theta0": 0.0
    })");
    const ExperimentResult result = vrmc::run_experiment(cfg, 0);
    const SeriesMap series = group_rows(result.rows);
    bool ok = result.warnings.empty();
    const double baseline = median_final_sq_err(series, "plain-10", detail, ok);
    detail << "plain-10 final median sq_err " << baseline << "\n";
    for (const std::size_t n1 : {20, 50, 100, 200}) {
        const std::string label = "vr-" + std::to_string(n1) + "-10-10";
        const double m = median_final_sq_err(series, label, detail, ok);
        detail << label << " final median sq_err " << m << "\n";
        ok = ok && m < baseline;
    }
    return ok;
}

/// The same config and seed must reproduce the metric and summary tables
/// byte for byte, whatever the worker count.
bool reproducible_tables(std::ostream& detail) {
    const ExperimentConfig cfg = vrmc::parse_experiment_config(R"({
        "experiment": "vr_compare",
        "model": {"kind": "gaussian_mean", "N": 200, "theta_true": 0.7, "data_seed": 31},
        "h": 1e-3,
        "budget": 20000,
        "n1": 40, "n2": 5, "m": 8,
        "repeats": 6,
        "seed": 9,
        "checkpoints": 8
    })");
    const auto tables = [](const ExperimentResult& r) {
        std::ostringstream metric;
        std::ostringstream summary;
        vrmc::write_metric_csv(r.rows, metric);
        vrmc::write_summary_csv(r.rows, summary);
        return std::make_pair(metric.str(), summary.str());
    };
    const auto a = tables(vrmc::run_experiment(cfg, 2));
    const auto b = tables(vrmc::run_experiment(cfg, 5));
    if (a != b) {
        detail << "metric or summary tables differ between identical runs\n";
        return false;
    }
    return true;
}

}  // namespace

int main() {
    struct Check {
        const char* name;
        std::function<bool(std::ostream&)> fn;
    };
    const std::vector<Check> checks = {
        {"enumerated plain-gradient noise matches the closed form", plain_noise_enumeration},
        {"enumerated vr noise matches its three-term decomposition", vr_noise_decomposition},
        {"vr gradient is unbiased (exhaustive grid and Monte Carlo)", vr_unbiasedness},
        {"variance-gap statistic is nonnegative and guards its domain", variance_gap_sign},
        {"full-gradient chain reproduces the analytic posterior", posterior_calibration},
        {"equal-cost sweep favors smaller minibatches", budget_sweep_ordering},
        {"vr chain dominates the matched plain baseline", vr_budget_dominance},
        {"every anchor size beats the plain baseline", anchor_size_sweep},
        {"closed-form gradients match central finite differences", finite_difference_agreement},
        {"identical configs reproduce byte-identical tables", reproducible_tables},
    };

    std::size_t failures = 0;
    for (const Check& check : checks) {
        std::ostringstream detail;
        bool ok = false;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            ok = check.fn(detail);
        } catch (const std::exception& e) {
            detail << "exception: " << e.what() << "\n";
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cout << (ok ? "PASS" : "FAIL") << "  " << check.name << "  [" << std::fixed
                  << std::setprecision(2) << secs << "s]\n";
        if (!ok) {
            ++failures;
            std::istringstream lines(detail.str());
            std::string line;
            while (std::getline(lines, line)) {
                std::cout << "      " << line << "\n";
            }
        }
    }

    if (failures == 0) {
        std::cout << "all " << checks.size() << " checks passed\n";
        return 0;
    }
    std::cout << failures << " of " << checks.size() << " checks failed\n";
    return 1;
}
