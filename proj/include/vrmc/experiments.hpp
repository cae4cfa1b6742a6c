#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vrmc/estimator.hpp"
#include "vrmc/model.hpp"
#include "vrmc/models/gaussian_mean.hpp"
#include "vrmc/models/logistic_regression.hpp"
#include "vrmc/schedule.hpp"

namespace vrmc {

enum class ExperimentKind { budget_sweep, vr_compare, n1_sweep, oracle_check };

std::string to_string(ExperimentKind kind);

/// Accepts both underscore and hyphen spellings ("vr_compare", "vr-compare").
/// Throws ConfigError for unknown names.
ExperimentKind experiment_kind_from_string(const std::string& name);

struct ModelConfig {
    enum class Kind { gaussian_mean, logistic } kind = Kind::gaussian_mean;

    // synthetic draws (used when data_csv is empty)
    std::size_t N = 0;
    double theta_true_scalar = 1.0;  // gaussian_mean location
    ParamVector theta_true;          // logistic coefficient vector
    std::uint64_t data_seed = 0;
    bool data_seed_pinned = false;   // explicit in the config (a --seed override skips it)
    bool split_seed_pinned = false;

    // file-backed data
    std::string data_csv;

    // logistic options
    double test_fraction = 0.2;
    std::uint64_t split_seed = 0;
    bool standardize = false;
    double prior_scale = 1.0;
};

/// A model instance plus the pieces the metric loop needs: the logistic view
/// and its held-out test split when applicable.
struct BuiltModel {
    std::unique_ptr<GradientModel> model;
    const GaussianMeanModel* gaussian = nullptr;  // non-null for gaussian_mean
    const LogisticRegressionModel* logistic = nullptr;
    std::unique_ptr<ClassificationData> test_data;  // logistic only
};

BuiltModel build_model(const ModelConfig& config);

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::oracle_check;
    ModelConfig model;
    std::string phi = "theta_sq";
    StepSizeSchedule schedule = StepSizeSchedule::fixed(1e-3);
    std::uint64_t budget = 0;   // total gradient-evaluation allowance T
    std::size_t repeats = 1;
    std::uint64_t seed = 0;
    std::size_t checkpoints = 20;
    std::string out;            // CSV filename; empty means "<experiment>.csv"
    ParamVector theta0;         // empty means zeros

    std::vector<std::size_t> n_values;      // budget_sweep minibatch sizes
    std::vector<EstimatorSpec> estimators;  // vr_compare coordinate list
    std::vector<std::size_t> n1_values;     // n1_sweep anchor batch sizes
    std::size_t n2 = 10;                    // n1_sweep correction batch size
    std::size_t m = 10;                     // n1_sweep refresh interval

    std::string csv_name() const { return out.empty() ? to_string(kind) + ".csv" : out; }
};

/// Parses and validates a JSON config document. Structural problems, unknown
/// enum values, missing required fields, and statically invalid estimator
/// combinations (e.g. an n1 sweep value <= n2) all throw ConfigError.
ExperimentConfig parse_experiment_config(const std::string& json_text);

/// Reads the file and delegates to parse_experiment_config.
ExperimentConfig load_experiment_config(const std::string& path);

/// Single {"mode": ...} object, as found in a config's "estimators" list.
EstimatorSpec parse_estimator_spec(const std::string& json_text);

/// One checkpoint record. Metric fields are left empty where they do not
/// apply (sq_err needs an analytic posterior average; nll/error_rate need a
/// classification test set) and on the terminal record of a diverged chain.
struct MetricRow {
    std::string experiment;
    std::string coordinate;
    std::size_t repeat = 0;
    std::uint64_t grad_evals = 0;
    double data_passes = 0.0;
    std::optional<double> phi_hat;
    std::optional<double> sq_err;
    std::optional<double> nll;
    std::optional<double> error_rate;
};

/// Header plus one RFC-4180 line per row, columns:
/// experiment,coordinate,repeat,grad_evals,data_passes,phi_hat,sq_err,nll,error_rate
void write_metric_csv(const std::vector<MetricRow>& rows, std::ostream& out);

/// Per-coordinate medians of the final-checkpoint metrics across completed
/// repeats (diverged repeats are excluded), columns:
/// experiment,coordinate,repeats,grad_evals,median_sq_err,median_nll,median_error_rate
void write_summary_csv(const std::vector<MetricRow>& rows, std::ostream& out);

struct ExperimentResult {
    std::vector<MetricRow> rows;            // (coordinate, repeat, checkpoint) order
    std::vector<std::string> warnings;      // one per diverged chain
};

/// Runs the configured study. Chains fan out over a worker pool
/// ((coordinate, repeat) jobs); results are merged in job order, so the
/// output is independent of thread count. threads == 0 picks the hardware
/// concurrency. Statically invalid run parameters (budget smaller than one
/// step, sweep batch size exceeding N) throw std::invalid_argument.
ExperimentResult run_experiment(const ExperimentConfig& config, std::size_t threads = 0);

/// run_experiment plus file emission: writes <out_dir>/<csv_name> and the
/// companion <stem>_summary.csv, printing divergence warnings to warn_stream.
/// Returns the metric CSV path.
std::string run_experiment_to_files(const ExperimentConfig& config, const std::string& out_dir,
                                    std::size_t threads, std::ostream& warn_stream);

// ---------------------------------------------------------------------------
// Self-check suite: enumeration oracles and statistical sanity checks, each
// printing one PASS/FAIL line (with the failing inputs on FAIL).

/// Enumerated E|DeltaV|^2 vs the (N-n)N^2 Gamma/n closed form, N in 2..8,
/// every n, random data; relative tolerance 1e-10.
bool check_deltaV_equivalence(std::uint64_t seed, std::ostream& out);

/// Enumerated vr noise total vs A+B+C, N in 3..5, all n2 < n1, random
/// (theta, anchor); relative tolerance 1e-10.
bool check_vr_decomposition(std::uint64_t seed, std::ostream& out);

/// Exhaustive average of the vr gradient over every (anchor batch,
/// correction batch) pair must reproduce full_gradient(theta) componentwise.
/// Exposed with an injectable model so a corrupted gradient field is caught.
bool check_vr_unbiasedness_exhaustive(const GradientModel& model, const ParamVector& theta,
                                      const ParamVector& anchor, std::size_t n1,
                                      std::size_t n2, double tol, std::ostream& out);

/// Monte Carlo version on a larger instance (N=50, 1e5 draws): the sample
/// mean of the vr gradient must sit within 4 standard errors of the truth.
bool check_vr_unbiasedness_monte_carlo(std::uint64_t seed, std::ostream& out);

/// lambda_at >= -1e-10 on 100 random instances with n1 > n2, equality with
/// -(B+C) from the enumeration on a small case, and rejection of n2 >= n1.
bool check_lambda_sign(std::uint64_t seed, std::ostream& out);

/// Central finite differences vs closed-form gradients for both built-in
/// models at 20 random points, relative tolerance 1e-6.
bool check_finite_difference_gradients(std::uint64_t seed, std::ostream& out);

/// Runs every check above; returns true only if all pass.
bool run_oracle_check(std::uint64_t seed, std::ostream& out);

}  // namespace vrmc
