#include "vrmc/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>
#include <utility>

#include <json.hpp>

#include "vrmc/chain.hpp"
#include "vrmc/detail/combinatorics.hpp"
#include "vrmc/diagnostics.hpp"
#include "vrmc/errors.hpp"

namespace vrmc {

namespace {

using nlohmann::json;

std::string format_double(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::string csv_quote(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) {
        return field;
    }
    std::string quoted = "\"";
    for (const char c : field) {
        if (c == '"') {
            quoted += '"';
        }
        quoted += c;
    }
    quoted += '"';
    return quoted;
}

std::string opt_field(const std::optional<double>& v) {
    return v ? format_double(*v) : std::string{};
}

// ---------------------------------------------------------------------------
// config parsing

std::uint64_t as_uint64(const json& v, const std::string& what) {
    if (v.is_number_unsigned()) {
        return v.get<std::uint64_t>();
    }
    if (v.is_number_integer()) {
        const auto x = v.get<long long>();
        if (x < 0) {
            throw ConfigError(what + " must be a nonnegative integer");
        }
        return static_cast<std::uint64_t>(x);
    }
    throw ConfigError(what + " must be an integer");
}

std::size_t as_count(const json& v, const std::string& what, std::size_t min_value) {
    const std::uint64_t x = as_uint64(v, what);
    if (x < min_value) {
        throw ConfigError(what + " must be >= " + std::to_string(min_value));
    }
    return static_cast<std::size_t>(x);
}

double as_real(const json& v, const std::string& what) {
    if (!v.is_number()) {
        throw ConfigError(what + " must be a number");
    }
    return v.get<double>();
}

const json& require(const json& j, const char* key) {
    if (!j.contains(key)) {
        throw ConfigError(std::string("missing required config key '") + key + "'");
    }
    return j.at(key);
}

ParamVector as_real_vector(const json& v, const std::string& what) {
    ParamVector out;
    if (v.is_number()) {
        out.push_back(v.get<double>());
        return out;
    }
    if (!v.is_array() || v.empty()) {
        throw ConfigError(what + " must be a number or a non-empty array of numbers");
    }
    for (const json& x : v) {
        out.push_back(as_real(x, what + " entry"));
    }
    return out;
}

EstimatorSpec estimator_from_json(const json& j) {
    if (!j.is_object()) {
        throw ConfigError("estimator entries must be objects with a 'mode' key");
    }
    const std::string mode = require(j, "mode").get<std::string>();
    try {
        if (mode == "plain" || mode == "sgld") {
            return EstimatorSpec::plain(as_count(require(j, "n"), "estimator n", 1));
        }
        if (mode == "vr") {
            return EstimatorSpec::vr(as_count(require(j, "n1"), "estimator n1", 1),
                                     as_count(require(j, "n2"), "estimator n2", 1),
                                     as_count(require(j, "m"), "estimator m", 1));
        }
        if (mode == "svrg_ld" || mode == "svrg-ld" || mode == "svrg") {
            return EstimatorSpec::svrg_ld(as_count(require(j, "n2"), "estimator n2", 1),
                                          as_count(require(j, "m"), "estimator m", 1));
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("estimator: ") + e.what());
    }
    throw ConfigError("unknown estimator mode '" + mode + "'");
}

ModelConfig model_from_json(const json& j, std::uint64_t master_seed) {
    if (!j.is_object()) {
        throw ConfigError("'model' must be an object");
    }
    ModelConfig mc;
    const std::string kind = j.value("kind", std::string("gaussian_mean"));
    if (kind == "gaussian_mean" || kind == "gaussian") {
        mc.kind = ModelConfig::Kind::gaussian_mean;
    } else if (kind == "logistic" || kind == "logistic_regression") {
        mc.kind = ModelConfig::Kind::logistic;
    } else {
        throw ConfigError("unknown model kind '" + kind + "'");
    }
    mc.data_seed_pinned = j.contains("data_seed");
    mc.data_seed = mc.data_seed_pinned ? as_uint64(j.at("data_seed"), "data_seed") : master_seed;
    mc.split_seed_pinned = j.contains("split_seed");
    mc.split_seed =
        mc.split_seed_pinned ? as_uint64(j.at("split_seed"), "split_seed") : mc.data_seed;
    mc.data_csv = j.value("data_csv", std::string{});

    if (mc.kind == ModelConfig::Kind::gaussian_mean) {
        if (mc.data_csv.empty()) {
            mc.N = as_count(require(j, "N"), "model N", 1);
            mc.theta_true_scalar =
                j.contains("theta_true") ? as_real(j.at("theta_true"), "theta_true") : 1.0;
        }
        return mc;
    }

    mc.test_fraction = j.contains("test_fraction")
                           ? as_real(j.at("test_fraction"), "test_fraction")
                           : 0.2;
    if (!(mc.test_fraction > 0.0) || !(mc.test_fraction < 1.0)) {
        throw ConfigError("test_fraction must be inside (0, 1)");
    }
    mc.prior_scale =
        j.contains("prior_scale") ? as_real(j.at("prior_scale"), "prior_scale") : 1.0;
    if (!(mc.prior_scale > 0.0)) {
        throw ConfigError("prior_scale must be positive");
    }
    // raw feature files are standardized by default; synthetic draws are not
    mc.standardize = j.value("standardize", !mc.data_csv.empty());
    if (mc.data_csv.empty()) {
        mc.N = as_count(require(j, "N"), "model N", 2);
        mc.theta_true = as_real_vector(require(j, "theta_true"), "theta_true");
    }
    return mc;
}

StepSizeSchedule schedule_from_json(const json& j) {
    if (j.contains("h") && j.contains("schedule")) {
        throw ConfigError("give either 'h' or 'schedule', not both");
    }
    try {
        if (j.contains("h")) {
            return StepSizeSchedule::fixed(as_real(j.at("h"), "h"));
        }
        const json& s = require(j, "schedule");
        const std::string type = require(s, "type").get<std::string>();
        if (type == "fixed") {
            return StepSizeSchedule::fixed(as_real(require(s, "h"), "schedule h"));
        }
        if (type == "decay") {
            return StepSizeSchedule::decay(as_real(require(s, "a"), "schedule a"),
                                           as_real(require(s, "b"), "schedule b"));
        }
        throw ConfigError("unknown schedule type '" + type + "'");
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("schedule: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// experiment execution

struct Coordinate {
    std::string label;
    EstimatorSpec spec;  // resolved against the model
    std::size_t L = 0;
    std::vector<std::uint64_t> targets;  // ascending unique checkpoint costs
};

struct RunContext {
    const ExperimentConfig* config = nullptr;
    const GradientModel* model = nullptr;
    const LogisticRegressionModel* logistic = nullptr;
    const ClassificationData* test_data = nullptr;
    const TestFunction* phi = nullptr;
    std::optional<double> phi_bar;
    std::string experiment_name;
};

struct JobOutput {
    std::vector<MetricRow> rows;
    std::optional<std::string> warning;
};

MetricRow base_row(const RunContext& ctx, const Coordinate& coord, std::size_t repeat,
                   std::uint64_t grad_evals) {
    MetricRow row;
    row.experiment = ctx.experiment_name;
    row.coordinate = coord.label;
    row.repeat = repeat;
    row.grad_evals = grad_evals;
    row.data_passes =
        static_cast<double>(grad_evals) / static_cast<double>(ctx.model->data_size());
    return row;
}

bool opt_finite(const std::optional<double>& v) { return !v || std::isfinite(*v); }

JobOutput run_single_job(const RunContext& ctx, const Coordinate& coord, std::size_t repeat) {
    const ExperimentConfig& config = *ctx.config;
    const GradientModel& model = *ctx.model;

    GradientEstimator estimator(coord.spec, model);
    ChainConfig cc;
    cc.L = coord.L;
    cc.schedule = config.schedule;
    cc.seed = config.seed;
    cc.chain_index = repeat;
    cc.theta0 = config.theta0;
    ChainRunner runner(model, estimator, cc);

    JobOutput out;
    double phi_sum = 0.0;
    ParamVector theta_sum(model.dim(), 0.0);
    std::size_t next_target = 0;
    const auto flag_divergence = [&](const std::string& why) {
        out.rows.push_back(base_row(ctx, coord, repeat, runner.grad_evals()));
        out.warning = "coordinate " + coord.label + " repeat " + std::to_string(repeat) +
                      ": " + why + "; remaining checkpoints dropped";
    };

    try {
        for (std::size_t l = 1; l <= coord.L; ++l) {
            runner.step();
            phi_sum += (*ctx.phi)(runner.theta());
            axpy(1.0, runner.theta(), theta_sum);
            if (next_target >= coord.targets.size() ||
                runner.grad_evals() < coord.targets[next_target]) {
                continue;
            }
            MetricRow row = base_row(ctx, coord, repeat, runner.grad_evals());
            row.phi_hat = phi_sum / static_cast<double>(l);
            if (ctx.phi_bar) {
                const double err = *row.phi_hat - *ctx.phi_bar;
                row.sq_err = err * err;
            }
            if (ctx.logistic != nullptr && ctx.test_data != nullptr) {
                ParamVector theta_mean = theta_sum;
                for (double& x : theta_mean) {
                    x /= static_cast<double>(l);
                }
                const ClassificationMetrics metrics =
                    logistic_loss_metrics(*ctx.logistic, theta_mean, *ctx.test_data);
                row.nll = metrics.nll;
                row.error_rate = metrics.error_rate;
            }
            if (!opt_finite(row.phi_hat) || !opt_finite(row.sq_err) || !opt_finite(row.nll) ||
                !opt_finite(row.error_rate)) {
                flag_divergence("running metrics became non-finite at iteration " +
                                std::to_string(l));
                return out;
            }
            out.rows.push_back(std::move(row));
            while (next_target < coord.targets.size() &&
                   coord.targets[next_target] <= runner.grad_evals()) {
                ++next_target;
            }
        }
    } catch (const DivergedChainError& e) {
        flag_divergence("diverged at iteration " + std::to_string(e.iteration()) +
                        " (h=" + format_double(e.step_size()) + ")");
    } catch (const NumericOverflowError& e) {
        flag_divergence(std::string("gradient overflow (") + e.what() + ")");
    }
    return out;
}

std::vector<Coordinate> make_coordinates(const ExperimentConfig& config,
                                         const GradientModel& model) {
    std::vector<EstimatorSpec> specs;
    switch (config.kind) {
        case ExperimentKind::budget_sweep:
            for (const std::size_t n : config.n_values) {
                specs.push_back(EstimatorSpec::plain(n));
            }
            break;
        case ExperimentKind::vr_compare:
            specs = config.estimators;
            break;
        case ExperimentKind::n1_sweep:
            specs.push_back(EstimatorSpec::plain(config.n2));
            for (const std::size_t n1 : config.n1_values) {
                specs.push_back(EstimatorSpec::vr(n1, config.n2, config.m));
            }
            break;
        case ExperimentKind::oracle_check:
            break;
    }

    std::vector<Coordinate> coords;
    coords.reserve(specs.size());
    for (const EstimatorSpec& spec : specs) {
        const GradientEstimator probe(spec, model);  // validates spec against N
        Coordinate coord;
        coord.label = spec.label();
        coord.spec = probe.spec();
        coord.L = GradientEstimator::steps_within_budget(coord.spec, config.budget);
        if (coord.L == 0) {
            throw std::invalid_argument("budget " + std::to_string(config.budget) +
                                        " cannot fund a single step of " + coord.label);
        }
        const std::uint64_t total =
            GradientEstimator::total_cost(coord.spec, coord.L);
        const std::uint64_t k_checkpoints = config.checkpoints;
        for (std::uint64_t k = 1; k <= k_checkpoints; ++k) {
            coord.targets.push_back((k * total + k_checkpoints - 1) / k_checkpoints);
        }
        coord.targets.erase(std::unique(coord.targets.begin(), coord.targets.end()),
                            coord.targets.end());
        coords.push_back(std::move(coord));
    }
    return coords;
}

std::optional<double> median_of(std::vector<double> values) {
    if (values.empty()) {
        return std::nullopt;
    }
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    if (values.size() % 2 == 1) {
        return values[mid];
    }
    return 0.5 * (values[mid - 1] + values[mid]);
}

}  // namespace

std::string to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::budget_sweep: return "budget_sweep";
        case ExperimentKind::vr_compare: return "vr_compare";
        case ExperimentKind::n1_sweep: return "n1_sweep";
        case ExperimentKind::oracle_check: return "oracle_check";
    }
    return "unknown";
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
    std::string canon = name;
    std::replace(canon.begin(), canon.end(), '-', '_');
    if (canon == "budget_sweep") return ExperimentKind::budget_sweep;
    if (canon == "vr_compare") return ExperimentKind::vr_compare;
    if (canon == "n1_sweep") return ExperimentKind::n1_sweep;
    if (canon == "oracle_check") return ExperimentKind::oracle_check;
    throw ConfigError("unknown experiment '" + name + "'");
}

BuiltModel build_model(const ModelConfig& config) {
    BuiltModel built;
    if (config.kind == ModelConfig::Kind::gaussian_mean) {
        std::unique_ptr<GaussianMeanModel> model;
        if (!config.data_csv.empty()) {
            model = std::make_unique<GaussianMeanModel>(
                GaussianMeanModel::from_dataset(Dataset::from_csv(config.data_csv)));
        } else {
            RngStream rng(config.data_seed, 0, StreamPurpose::data_gen);
            model = std::make_unique<GaussianMeanModel>(
                generate_gaussian_data(config.N, config.theta_true_scalar, rng));
        }
        built.gaussian = model.get();
        built.model = std::move(model);
        return built;
    }

    ClassificationData all;
    if (!config.data_csv.empty()) {
        all = classification_data_from_dataset(Dataset::from_csv(config.data_csv));
    } else {
        if (config.theta_true.empty()) {
            throw ConfigError("synthetic logistic data needs a theta_true vector");
        }
        RngStream rng(config.data_seed, 0, StreamPurpose::data_gen);
        all = generate_logistic_data(config.N, config.theta_true, rng);
    }
    RngStream split_rng(config.split_seed, 1, StreamPurpose::data_gen);
    auto [train, test] = split_classification_data(all, config.test_fraction, split_rng);
    if (config.standardize) {
        standardize_and_add_intercept(train, test);
    }
    auto model = std::make_unique<LogisticRegressionModel>(std::move(train),
                                                           config.prior_scale);
    built.logistic = model.get();
    built.model = std::move(model);
    built.test_data = std::make_unique<ClassificationData>(std::move(test));
    return built;
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) {
        throw ConfigError("config root must be a JSON object");
    }
    try {
        ExperimentConfig cfg;
        cfg.kind = experiment_kind_from_string(require(j, "experiment").get<std::string>());
        cfg.seed = j.contains("seed") ? as_uint64(j.at("seed"), "seed") : 0;
        cfg.repeats = j.contains("repeats") ? as_count(j.at("repeats"), "repeats", 1) : 1;
        cfg.checkpoints =
            j.contains("checkpoints") ? as_count(j.at("checkpoints"), "checkpoints", 1) : 20;
        cfg.out = j.value("out", std::string{});
        cfg.phi = j.value("phi", std::string("theta_sq"));
        phi_by_name(cfg.phi);  // validate the name now, not mid-run
        if (j.contains("theta0")) {
            cfg.theta0 = as_real_vector(j.at("theta0"), "theta0");
        }
        if (cfg.kind == ExperimentKind::oracle_check) {
            return cfg;
        }

        if (!j.contains("h") && !j.contains("schedule")) {
            throw ConfigError("a step size is required: give 'h' or a 'schedule' object");
        }
        cfg.schedule = schedule_from_json(j);

        if (j.contains("budget") && j.contains("T")) {
            throw ConfigError("give either 'budget' or its alias 'T', not both");
        }
        if (j.contains("budget")) {
            cfg.budget = as_uint64(j.at("budget"), "budget");
        } else if (j.contains("T")) {
            cfg.budget = as_uint64(j.at("T"), "T");
        }
        if (cfg.budget == 0) {
            throw ConfigError("a positive gradient-evaluation 'budget' is required");
        }

        cfg.model = model_from_json(require(j, "model"), cfg.seed);

        switch (cfg.kind) {
            case ExperimentKind::budget_sweep: {
                const json& values = require(j, "n_values");
                if (!values.is_array() || values.empty()) {
                    throw ConfigError("'n_values' must be a non-empty array");
                }
                for (const json& v : values) {
                    cfg.n_values.push_back(as_count(v, "n_values entry", 1));
                }
                break;
            }
            case ExperimentKind::vr_compare: {
                if (j.contains("estimators")) {
                    const json& estimators = j.at("estimators");
                    if (!estimators.is_array() || estimators.empty()) {
                        throw ConfigError("'estimators' must be a non-empty array");
                    }
                    for (const json& e : estimators) {
                        cfg.estimators.push_back(estimator_from_json(e));
                    }
                } else {
                    const std::size_t n1 =
                        j.contains("n1") ? as_count(j.at("n1"), "n1", 1) : 100;
                    const std::size_t n2 =
                        j.contains("n2") ? as_count(j.at("n2"), "n2", 1) : 10;
                    const std::size_t m = j.contains("m") ? as_count(j.at("m"), "m", 1) : 10;
                    try {
                        cfg.estimators.push_back(EstimatorSpec::plain(n2));
                        cfg.estimators.push_back(EstimatorSpec::vr(n1, n2, m));
                    } catch (const std::invalid_argument& e) {
                        throw ConfigError(std::string("estimator: ") + e.what());
                    }
                }
                break;
            }
            case ExperimentKind::n1_sweep: {
                const json& values = require(j, "n1_values");
                if (!values.is_array() || values.empty()) {
                    throw ConfigError("'n1_values' must be a non-empty array");
                }
                cfg.n2 = j.contains("n2") ? as_count(j.at("n2"), "n2", 1) : 10;
                cfg.m = j.contains("m") ? as_count(j.at("m"), "m", 1) : 10;
                for (const json& v : values) {
                    const std::size_t n1 = as_count(v, "n1_values entry", 1);
                    if (n1 <= cfg.n2) {
                        throw ConfigError("n1 sweep value " + std::to_string(n1) +
                                          " must exceed n2=" + std::to_string(cfg.n2));
                    }
                    cfg.n1_values.push_back(n1);
                }
                break;
            }
            case ExperimentKind::oracle_check:
                break;
        }
        return cfg;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open config file '" + path + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_experiment_config(buffer.str());
}

EstimatorSpec parse_estimator_spec(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("estimator is not valid JSON: ") + e.what());
    }
    try {
        return estimator_from_json(j);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("estimator: ") + e.what());
    }
}

void write_metric_csv(const std::vector<MetricRow>& rows, std::ostream& out) {
    out << "experiment,coordinate,repeat,grad_evals,data_passes,phi_hat,sq_err,nll,"
           "error_rate\n";
    for (const MetricRow& row : rows) {
        out << csv_quote(row.experiment) << ',' << csv_quote(row.coordinate) << ','
            << row.repeat << ',' << row.grad_evals << ',' << format_double(row.data_passes)
            << ',' << opt_field(row.phi_hat) << ',' << opt_field(row.sq_err) << ','
            << opt_field(row.nll) << ',' << opt_field(row.error_rate) << "\n";
    }
}

void write_summary_csv(const std::vector<MetricRow>& rows, std::ostream& out) {
    out << "experiment,coordinate,repeats,grad_evals,median_sq_err,median_nll,"
           "median_error_rate\n";

    std::vector<std::string> order;
    for (const MetricRow& row : rows) {
        if (std::find(order.begin(), order.end(), row.coordinate) == order.end()) {
            order.push_back(row.coordinate);
        }
    }
    for (const std::string& coordinate : order) {
        // last row of each (coordinate, repeat) series; metric-less means diverged
        std::vector<const MetricRow*> finals;
        for (const MetricRow& row : rows) {
            if (row.coordinate != coordinate) {
                continue;
            }
            if (!finals.empty() && finals.back()->repeat == row.repeat) {
                finals.back() = &row;
            } else {
                finals.push_back(&row);
            }
        }
        std::string experiment;
        std::uint64_t grad_evals = 0;
        std::size_t used = 0;
        std::vector<double> sq_errs, nlls, error_rates;
        for (const MetricRow* row : finals) {
            if (!row->phi_hat) {
                continue;
            }
            ++used;
            experiment = row->experiment;
            grad_evals = std::max(grad_evals, row->grad_evals);
            if (row->sq_err) sq_errs.push_back(*row->sq_err);
            if (row->nll) nlls.push_back(*row->nll);
            if (row->error_rate) error_rates.push_back(*row->error_rate);
        }
        if (used == 0 && !finals.empty()) {
            experiment = finals.front()->experiment;
        }
        out << csv_quote(experiment) << ',' << csv_quote(coordinate) << ',' << used << ',';
        if (used > 0) {
            out << grad_evals;
        }
        out << ',' << opt_field(median_of(std::move(sq_errs))) << ','
            << opt_field(median_of(std::move(nlls))) << ','
            << opt_field(median_of(std::move(error_rates))) << "\n";
    }
}

ExperimentResult run_experiment(const ExperimentConfig& config, std::size_t threads) {
    if (config.kind == ExperimentKind::oracle_check) {
        throw std::invalid_argument(
            "oracle_check produces a PASS/FAIL report, not metric rows; call "
            "run_oracle_check");
    }
    const BuiltModel built = build_model(config.model);
    const GradientModel& model = *built.model;
    if (config.kind == ExperimentKind::budget_sweep && built.gaussian == nullptr) {
        throw ConfigError(
            "budget_sweep needs the gaussian_mean model (analytic posterior average)");
    }
    if (!config.theta0.empty() && config.theta0.size() != model.dim()) {
        throw std::invalid_argument("theta0 has dimension " +
                                    std::to_string(config.theta0.size()) + " but the model needs " +
                                    std::to_string(model.dim()));
    }

    const TestFunction phi = phi_by_name(config.phi);
    RunContext ctx;
    ctx.config = &config;
    ctx.model = &model;
    ctx.logistic = built.logistic;
    ctx.test_data = built.test_data.get();
    ctx.phi = &phi;
    if (built.gaussian != nullptr) {
        ctx.phi_bar = gaussian_posterior_phi_bar(*built.gaussian, phi);
    }
    ctx.experiment_name = to_string(config.kind);

    const std::vector<Coordinate> coords = make_coordinates(config, model);
    const std::size_t repeats = config.repeats;
    const std::size_t total_jobs = coords.size() * repeats;

    std::vector<JobOutput> outputs(total_jobs);
    std::vector<std::exception_ptr> errors(total_jobs);
    std::atomic<std::size_t> cursor{0};
    const auto worker = [&]() {
        while (true) {
            const std::size_t job = cursor.fetch_add(1);
            if (job >= total_jobs) {
                return;
            }
            try {
                outputs[job] = run_single_job(ctx, coords[job / repeats], job % repeats);
            } catch (...) {
                errors[job] = std::current_exception();
            }
        }
    };

    std::size_t n_threads = threads;
    if (n_threads == 0) {
        n_threads = std::max(1u, std::thread::hardware_concurrency());
    }
    n_threads = std::min(n_threads, total_jobs);
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) {
        pool.emplace_back(worker);
    }
    worker();
    for (std::thread& t : pool) {
        t.join();
    }
    for (const std::exception_ptr& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }

    ExperimentResult result;
    for (JobOutput& out : outputs) {
        result.rows.insert(result.rows.end(), std::make_move_iterator(out.rows.begin()),
                           std::make_move_iterator(out.rows.end()));
        if (out.warning) {
            result.warnings.push_back(std::move(*out.warning));
        }
    }
    return result;
}

std::string run_experiment_to_files(const ExperimentConfig& config, const std::string& out_dir,
                                    std::size_t threads, std::ostream& warn_stream) {
    const ExperimentResult result = run_experiment(config, threads);

    namespace fs = std::filesystem;
    const fs::path dir = out_dir.empty() ? fs::path(".") : fs::path(out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw ConfigError("cannot create output directory '" + dir.string() +
                          "': " + ec.message());
    }
    const std::string name = config.csv_name();
    const fs::path csv_path = dir / name;
    std::string stem = name;
    if (stem.size() > 4 && stem.ends_with(".csv")) {
        stem.resize(stem.size() - 4);
    }
    const fs::path summary_path = dir / (stem + "_summary.csv");

    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) {
        throw ConfigError("cannot write '" + csv_path.string() + "'");
    }
    write_metric_csv(result.rows, csv);

    std::ofstream summary(summary_path, std::ios::binary);
    if (!summary) {
        throw ConfigError("cannot write '" + summary_path.string() + "'");
    }
    write_summary_csv(result.rows, summary);

    for (const std::string& warning : result.warnings) {
        warn_stream << "warning: " << warning << "\n";
    }
    return csv_path.string();
}

// ---------------------------------------------------------------------------
// self-check suite

namespace {

std::string vector_str(const ParamVector& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i > 0) {
            s += ", ";
        }
        s += format_double(v[i]);
    }
    s += "]";
    return s;
}

struct EnumerationGap {
    double scaled_gap = 0.0;
    std::size_t component = 0;
    double truth = 0.0;
    double average = 0.0;
};

/// Worst componentwise |enumeration average - full gradient| scaled by
/// max(1, |truth|), over every (anchor batch, correction batch) pair.
EnumerationGap vr_enumeration_gap(const GradientModel& model, const ParamVector& theta,
                                  const ParamVector& anchor, std::size_t n1, std::size_t n2) {
    const std::size_t n_data = model.data_size();
    const std::size_t dim = model.dim();
    const ParamVector truth = full_gradient(model, theta);
    ParamVector acc(dim, 0.0);
    std::size_t pairs = 0;
    detail::for_each_subset(n_data, n1, [&](const MinibatchIndexSet& pi) {
        VrState state;
        state.anchor = anchor;
        state.anchor_grad = anchor_likelihood_gradient(model, anchor, pi);
        state.initialized = true;
        detail::for_each_subset(n_data, n2, [&](const MinibatchIndexSet& correction) {
            axpy(1.0, vr_gradient_with_batch(state, model, theta, correction), acc);
            ++pairs;
        });
    });
    EnumerationGap gap;
    for (std::size_t c = 0; c < dim; ++c) {
        const double average = acc[c] / static_cast<double>(pairs);
        const double scaled =
            std::abs(average - truth[c]) / std::max(1.0, std::abs(truth[c]));
        if (scaled >= gap.scaled_gap) {
            gap.scaled_gap = scaled;
            gap.component = c;
            gap.truth = truth[c];
            gap.average = average;
        }
    }
    return gap;
}

GaussianMeanModel random_gaussian_model(std::size_t N, RngStream& rng) {
    std::vector<double> data(N);
    for (double& x : data) {
        x = 2.0 * rng.gaussian();
    }
    return GaussianMeanModel(std::move(data));
}

}  // namespace

bool check_deltaV_equivalence(std::uint64_t seed, std::ostream& out) {
    RngStream rng(seed, 10, StreamPurpose::data_gen);
    for (std::size_t N = 2; N <= 8; ++N) {
        const GaussianMeanModel model = random_gaussian_model(N, rng);
        const ParamVector theta{rng.gaussian()};
        for (std::size_t n = 1; n <= N; ++n) {
            const double exact = deltaV_variance_exact(model, theta, n);
            const double formula = deltaV_variance_formula(model, theta, n);
            if (std::abs(exact - formula) > 1e-10 * std::max(1.0, std::abs(formula))) {
                out << "FAIL minibatch-noise enumeration vs closed form: N=" << N
                    << " n=" << n << " exact=" << format_double(exact)
                    << " formula=" << format_double(formula)
                    << " theta=" << vector_str(theta) << " data=" << vector_str(model.data())
                    << "\n";
                return false;
            }
        }
    }
    out << "PASS minibatch-noise enumeration matches (N-n)N^2*Gamma/n (N=2..8, all n)\n";
    return true;
}

bool check_vr_decomposition(std::uint64_t seed, std::ostream& out) {
    RngStream rng(seed, 11, StreamPurpose::data_gen);
    for (std::size_t N = 3; N <= 5; ++N) {
        const GaussianMeanModel model = random_gaussian_model(N, rng);
        const ParamVector theta{rng.gaussian()};
        const ParamVector anchor{theta[0] + 0.25 * rng.gaussian()};
        for (std::size_t n1 = 2; n1 <= N; ++n1) {
            for (std::size_t n2 = 1; n2 < n1; ++n2) {
                const VrVarianceDecomposition d =
                    vr_deltaV_variance_exact(model, theta, anchor, n1, n2);
                const double closed = d.A + d.B + d.C;
                if (std::abs(d.total - closed) > 1e-10 * std::max(1.0, std::abs(d.total)) ||
                    d.total < -1e-10) {
                    out << "FAIL vr-noise decomposition: N=" << N << " n1=" << n1
                        << " n2=" << n2 << " total=" << format_double(d.total)
                        << " A+B+C=" << format_double(closed) << " theta=" << vector_str(theta)
                        << " anchor=" << vector_str(anchor)
                        << " data=" << vector_str(model.data()) << "\n";
                    return false;
                }
            }
        }
    }
    out << "PASS vr-noise enumeration total equals A+B+C (N=3..5, all n2<n1)\n";
    return true;
}

bool check_vr_unbiasedness_exhaustive(const GradientModel& model, const ParamVector& theta,
                                      const ParamVector& anchor, std::size_t n1,
                                      std::size_t n2, double tol, std::ostream& out) {
    const EnumerationGap gap = vr_enumeration_gap(model, theta, anchor, n1, n2);
    if (gap.scaled_gap > tol) {
        out << "FAIL vr-gradient enumeration average vs full gradient: N="
            << model.data_size() << " n1=" << n1 << " n2=" << n2 << " component="
            << gap.component << " average=" << format_double(gap.average)
            << " full=" << format_double(gap.truth) << " theta=" << vector_str(theta)
            << " anchor=" << vector_str(anchor) << "\n";
        return false;
    }
    out << "PASS vr-gradient enumeration average equals the full gradient (N="
        << model.data_size() << ", n1=" << n1 << ", n2=" << n2 << ")\n";
    return true;
}

bool check_vr_unbiasedness_monte_carlo(std::uint64_t seed, std::ostream& out) {
    RngStream data_rng(seed, 12, StreamPurpose::data_gen);
    const GaussianMeanModel model(generate_gaussian_data(50, 1.0, data_rng));
    const ParamVector theta{0.3};
    const ParamVector anchor{0.8};
    constexpr std::size_t kDraws = 100'000;
    constexpr std::size_t kN1 = 20;
    constexpr std::size_t kN2 = 5;

    const double truth = full_gradient(model, theta)[0];
    RngStream rng(seed, 13, StreamPurpose::minibatch);
    double sum = 0.0;
    double sum_sq = 0.0;
    VrState state;
    for (std::size_t k = 0; k < kDraws; ++k) {
        refresh_anchor(state, model, anchor, kN1, rng);
        const double g = vr_gradient(state, model, theta, kN2, rng)[0];
        sum += g;
        sum_sq += g * g;
    }
    const double mean = sum / kDraws;
    const double var = std::max(0.0, sum_sq / kDraws - mean * mean);
    const double se = std::sqrt(var / kDraws);
    if (std::abs(mean - truth) > 4.0 * se) {
        out << "FAIL vr-gradient Monte Carlo mean: mean=" << format_double(mean)
            << " full=" << format_double(truth) << " se=" << format_double(se)
            << " draws=" << kDraws << "\n";
        return false;
    }
    out << "PASS vr-gradient Monte Carlo mean within 4 standard errors (N=50, "
        << kDraws << " draws)\n";
    return true;
}

bool check_lambda_sign(std::uint64_t seed, std::ostream& out) {
    RngStream rng(seed, 14, StreamPurpose::data_gen);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t N = 2 + static_cast<std::size_t>(rng.uniform_below(29));
        const GaussianMeanModel model = random_gaussian_model(N, rng);
        const ParamVector anchor{rng.gaussian()};
        const std::size_t n1 = 2 + static_cast<std::size_t>(rng.uniform_below(N - 1));
        const std::size_t n2 = 1 + static_cast<std::size_t>(rng.uniform_below(n1 - 1));
        const double lambda = lambda_at(model, anchor, n1, n2);
        if (lambda < -1e-10) {
            out << "FAIL variance-gain sign: lambda=" << format_double(lambda) << " N=" << N
                << " n1=" << n1 << " n2=" << n2 << " anchor=" << vector_str(anchor)
                << " data=" << vector_str(model.data()) << "\n";
            return false;
        }
    }

    // lambda must equal -(B+C) when the noise is decomposed at the anchor
    RngStream rng2(seed, 15, StreamPurpose::data_gen);
    const GaussianMeanModel model = random_gaussian_model(4, rng2);
    const ParamVector anchor{rng2.gaussian()};
    const VrVarianceDecomposition d = vr_deltaV_variance_exact(model, anchor, anchor, 3, 1);
    const double lambda = lambda_at(model, anchor, 3, 1);
    if (std::abs(lambda + d.B + d.C) > 1e-10 * std::max(1.0, std::abs(lambda))) {
        out << "FAIL variance-gain cross-check: lambda=" << format_double(lambda)
            << " -(B+C)=" << format_double(-(d.B + d.C)) << "\n";
        return false;
    }

    bool rejected = false;
    try {
        lambda_at(model, anchor, 2, 2);
    } catch (const std::invalid_argument&) {
        rejected = true;
    }
    if (!rejected) {
        out << "FAIL variance-gain guard: n2 >= n1 was not rejected\n";
        return false;
    }
    out << "PASS variance gain nonnegative on 100 random instances, equals -(B+C) at the "
           "anchor, n2 >= n1 rejected\n";
    return true;
}

bool check_finite_difference_gradients(std::uint64_t seed, std::ostream& out) {
    constexpr double kStep = 1e-5;
    constexpr double kTol = 1e-6;

    const auto log_posterior = [](const GradientModel& model, const ParamVector& theta) {
        double value = model.log_prior(theta);
        for (std::size_t i = 0; i < model.data_size(); ++i) {
            value += model.datum_loglik(theta, i);
        }
        return value;
    };
    const auto check_model = [&](const GradientModel& model, const char* name,
                                 RngStream& rng) {
        for (int point = 0; point < 20; ++point) {
            ParamVector theta(model.dim());
            for (double& x : theta) {
                x = 1.5 * rng.gaussian();
            }
            const ParamVector grad = full_gradient(model, theta);
            for (std::size_t c = 0; c < model.dim(); ++c) {
                ParamVector hi = theta, lo = theta;
                hi[c] += kStep;
                lo[c] -= kStep;
                const double fd =
                    (log_posterior(model, hi) - log_posterior(model, lo)) / (2.0 * kStep);
                const double rel =
                    std::abs(fd - grad[c]) / std::max(1.0, std::abs(grad[c]));
                if (rel > kTol) {
                    out << "FAIL finite-difference gradient (" << name << "): component="
                        << c << " closed=" << format_double(grad[c])
                        << " fd=" << format_double(fd) << " theta=" << vector_str(theta)
                        << "\n";
                    return false;
                }
            }
        }
        return true;
    };

    RngStream rng(seed, 16, StreamPurpose::data_gen);
    const GaussianMeanModel gaussian = random_gaussian_model(20, rng);
    if (!check_model(gaussian, "gaussian_mean", rng)) {
        return false;
    }
    RngStream logit_rng(seed, 17, StreamPurpose::data_gen);
    const ParamVector theta_true{1.0, -0.5, 0.25};
    LogisticRegressionModel logistic(generate_logistic_data(40, theta_true, logit_rng));
    if (!check_model(logistic, "logistic", logit_rng)) {
        return false;
    }
    out << "PASS closed-form gradients match central finite differences (both models, 20 "
           "points)\n";
    return true;
}

bool run_oracle_check(std::uint64_t seed, std::ostream& out) {
    int passed = 0;
    int total = 0;
    const auto tally = [&](bool ok) {
        ++total;
        if (ok) {
            ++passed;
        }
        return ok;
    };

    tally(check_finite_difference_gradients(seed, out));
    tally(check_deltaV_equivalence(seed, out));
    tally(check_vr_decomposition(seed, out));

    // exhaustive unbiasedness over the full small-N grid, one summary line
    {
        bool ok = true;
        RngStream rng(seed, 18, StreamPurpose::data_gen);
        for (std::size_t N = 2; N <= 6 && ok; ++N) {
            const GaussianMeanModel model = random_gaussian_model(N, rng);
            const ParamVector theta{rng.gaussian()};
            const ParamVector anchor{theta[0] + 0.5 * rng.gaussian()};
            for (std::size_t n1 = 2; n1 <= N && ok; ++n1) {
                for (std::size_t n2 = 1; n2 < n1 && ok; ++n2) {
                    const EnumerationGap gap =
                        vr_enumeration_gap(model, theta, anchor, n1, n2);
                    if (gap.scaled_gap > 1e-12) {
                        out << "FAIL vr-gradient enumeration average vs full gradient: N="
                            << N << " n1=" << n1 << " n2=" << n2
                            << " component=" << gap.component
                            << " average=" << format_double(gap.average)
                            << " full=" << format_double(gap.truth)
                            << " theta=" << vector_str(theta)
                            << " anchor=" << vector_str(anchor)
                            << " data=" << vector_str(model.data()) << "\n";
                        ok = false;
                    }
                }
            }
        }
        if (ok) {
            out << "PASS vr-gradient enumeration average equals the full gradient (N=2..6, "
                   "all n2<n1)\n";
        }
        tally(ok);
    }

    tally(check_vr_unbiasedness_monte_carlo(seed, out));
    tally(check_lambda_sign(seed, out));

    out << (passed == total ? "self-check result: PASS (" : "self-check result: FAIL (")
        << passed << "/" << total << " checks)\n";
    return passed == total;
}

}  // namespace vrmc
