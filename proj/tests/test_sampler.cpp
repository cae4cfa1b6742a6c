#include <doctest.h>

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vrmc/chain.hpp"
#include "vrmc/errors.hpp"
#include "vrmc/estimator.hpp"
#include "vrmc/models/gaussian_mean.hpp"
#include "vrmc/models/logistic_regression.hpp"
#include "vrmc/rng.hpp"
#include "vrmc/schedule.hpp"

using vrmc::ChainConfig;
using vrmc::ChainRunner;
using vrmc::ChainTrace;
using vrmc::ContractViolationError;
using vrmc::DivergedChainError;
using vrmc::EstimatorSpec;
using vrmc::GaussianMeanModel;
using vrmc::GradientEstimator;
using vrmc::ParamVector;
using vrmc::RngStream;
using vrmc::run_chain;
using vrmc::sgld_step;
using vrmc::sgld_step_with_noise;
using vrmc::StepSizeSchedule;
using vrmc::StreamPurpose;
using vrmc::trace_to_csv;

TEST_CASE("one transition combines drift and scaled noise") {
    CHECK(sgld_step_with_noise({0.7}, {0.0}, 0.25, {0.0}) == ParamVector{0.7});
    CHECK(sgld_step_with_noise({0.0}, {2.0}, 0.5, {0.0}) == ParamVector{1.0});
    // sqrt(2 * 0.5) = 1, so a unit noise draw moves theta by exactly 1.
    CHECK(sgld_step_with_noise({0.0}, {0.0}, 0.5, {1.0}) == ParamVector{1.0});

    CHECK_THROWS_AS(sgld_step_with_noise({0.0}, {0.0}, 0.0, {0.0}), std::invalid_argument);
    CHECK_THROWS_AS(sgld_step_with_noise({0.0}, {0.0, 1.0}, 0.1, {0.0}), std::invalid_argument);
}

TEST_CASE("a transition consumes exactly dim gaussians") {
    RngStream rng(5, 0, StreamPurpose::noise);
    sgld_step({0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, 0.1, rng);
    CHECK(rng.draws_consumed() == 6);  // 2 draws per gaussian

    RngStream a(6, 0, StreamPurpose::noise);
    RngStream b(6, 0, StreamPurpose::noise);
    CHECK(sgld_step({1.0}, {0.5}, 0.01, a) == sgld_step({1.0}, {0.5}, 0.01, b));
}

TEST_CASE("zero-drift transitions have noise variance 2h") {
    RngStream rng(17, 0, StreamPurpose::noise);
    const double h = 0.03;
    const int trials = 100000;
    double sum = 0.0;
    double sumsq = 0.0;
    for (int t = 0; t < trials; ++t) {
        const double moved = sgld_step({0.0}, {0.0}, h, rng)[0];
        sum += moved;
        sumsq += moved * moved;
    }
    const double mean = sum / trials;
    const double var = sumsq / trials - mean * mean;
    const double se_var = 2.0 * h * std::sqrt(2.0 / trials);
    CHECK(std::fabs(var - 2.0 * h) < 4.0 * se_var);
}

TEST_CASE("non-finite proposals raise a diverged-chain report") {
    RngStream rng(1, 0, StreamPurpose::noise);
    try {
        sgld_step({1e308}, {1e308}, 1.0, rng, 7);
        FAIL("expected divergence");
    } catch (const DivergedChainError& e) {
        CHECK(e.iteration() == 7);
        CHECK(e.step_size() == 1.0);
    }
}

TEST_CASE("plain chains charge n evaluations per step") {
    RngStream gen(400, 0, StreamPurpose::data_gen);
    const GaussianMeanModel model(vrmc::generate_gaussian_data(20, 0.0, gen));
    GradientEstimator estimator(EstimatorSpec::plain(5), model);
    ChainConfig config;
    config.L = 40;
    config.schedule = StepSizeSchedule::fixed(1e-3);
    config.seed = 9;
    const ChainTrace trace = run_chain(model, estimator, config);
    REQUIRE(trace.size() == 40);
    CHECK(trace.total_grad_evals == 5 * 40);
    for (std::size_t k = 0; k < trace.size(); ++k) {
        CHECK(trace.iterations[k] == k + 1);
        CHECK(trace.grad_evals[k] == 5 * (k + 1));
        CHECK(trace.step_sizes[k] == 1e-3);
    }
    CHECK(trace.initial_theta == ParamVector{0.0});
    CHECK(GradientEstimator::total_cost(estimator.spec(), 40) == 200);
}

TEST_CASE("control-variate chains charge the refresh plus two correction batches") {
    RngStream gen(401, 0, StreamPurpose::data_gen);
    const GaussianMeanModel model(vrmc::generate_gaussian_data(20, 0.0, gen));

    // m divides L: refreshes at l = 0, 5, 10, 15.
    GradientEstimator estimator(EstimatorSpec::vr(10, 2, 5), model);
    ChainConfig config;
    config.L = 20;
    config.seed = 10;
    const ChainTrace trace = run_chain(model, estimator, config);
    CHECK(trace.total_grad_evals == 2 * 2 * 20 + 10 * 4);
    CHECK(GradientEstimator::total_cost(estimator.spec(), 20) == trace.total_grad_evals);

    // m does not divide L: ceil(7/5) = 2 refreshes.
    GradientEstimator ragged(EstimatorSpec::vr(10, 2, 5), model);
    ChainConfig short_config;
    short_config.L = 7;
    short_config.seed = 10;
    CHECK(run_chain(model, ragged, short_config).total_grad_evals == 2 * 2 * 7 + 10 * 2);
}

TEST_CASE("budgeted step counts sit exactly on the cost boundary") {
    const EstimatorSpec spec = EstimatorSpec::vr(10, 2, 5);
    const std::size_t cost_20 = GradientEstimator::total_cost(spec, 20);
    CHECK(GradientEstimator::steps_within_budget(spec, cost_20) == 20);
    CHECK(GradientEstimator::steps_within_budget(spec, cost_20 - 1) == 19);
    CHECK(GradientEstimator::steps_within_budget(spec, cost_20 + 3) == 20);
    // One step costs n1 + 2*n2 = 14.
    CHECK(GradientEstimator::steps_within_budget(spec, 13) == 0);
    CHECK(GradientEstimator::steps_within_budget(spec, 14) == 1);
}

TEST_CASE("burn-in and thinning control which iterations are recorded") {
    RngStream gen(402, 0, StreamPurpose::data_gen);
    const GaussianMeanModel model(vrmc::generate_gaussian_data(10, 0.0, gen));
    GradientEstimator estimator(EstimatorSpec::plain(10), model);
    ChainConfig config;
    config.L = 10;
    config.burn_in = 3;
    config.record_every = 2;
    config.seed = 11;
    const ChainTrace trace = run_chain(model, estimator, config);
    CHECK(trace.iterations == std::vector<std::size_t>{4, 6, 8, 10});
    CHECK(trace.total_grad_evals == 100);

    ChainConfig bad = config;
    bad.burn_in = 10;
    GradientEstimator e2(EstimatorSpec::plain(10), model);
    CHECK_THROWS_AS(run_chain(model, e2, bad), std::invalid_argument);
    bad.burn_in = 0;
    bad.record_every = 0;
    GradientEstimator e3(EstimatorSpec::plain(10), model);
    CHECK_THROWS_AS(run_chain(model, e3, bad), std::invalid_argument);
}

TEST_CASE("decaying schedules are applied per iteration") {
    RngStream gen(403, 0, StreamPurpose::data_gen);
    const GaussianMeanModel model(vrmc::generate_gaussian_data(10, 0.0, gen));
    GradientEstimator estimator(EstimatorSpec::plain(2), model);
    ChainConfig config;
    config.L = 5;
    config.schedule = StepSizeSchedule::decay(10.0, 1.0);
    config.seed = 12;
    const ChainTrace trace = run_chain(model, estimator, config);
    for (std::size_t k = 0; k < trace.size(); ++k) {
        // Iteration k+1 runs with the schedule evaluated at l = k.
        CHECK(trace.step_sizes[k] == 1.0 / (10.0 + static_cast<double>(k)));
    }
    CHECK_THROWS_AS(StepSizeSchedule::decay(0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(StepSizeSchedule::fixed(-1.0), std::invalid_argument);
}

TEST_CASE("identical configurations replay identical trajectories") {
    RngStream gen(404, 0, StreamPurpose::data_gen);
    const GaussianMeanModel model(vrmc::generate_gaussian_data(30, 0.5, gen));
    ChainConfig config;
    config.L = 50;
    config.seed = 77;
    config.chain_index = 2;

    GradientEstimator e1(EstimatorSpec::vr(15, 3, 5), model);
    GradientEstimator e2(EstimatorSpec::vr(15, 3, 5), model);
    const ChainTrace t1 = run_chain(model, e1, config);
    const ChainTrace t2 = run_chain(model, e2, config);
    CHECK(t1.samples == t2.samples);
    CHECK(t1.grad_evals == t2.grad_evals);

    // A different chain index under the same seed is a different trajectory.
    ChainConfig other = config;
    other.chain_index = 3;
    GradientEstimator e3(EstimatorSpec::vr(15, 3, 5), model);
    CHECK(run_chain(model, e3, other).samples != t1.samples);
}

TEST_CASE("the stepwise runner matches the one-shot driver") {
    RngStream gen(405, 0, StreamPurpose::data_gen);
    const GaussianMeanModel model(vrmc::generate_gaussian_data(12, 1.0, gen));
    ChainConfig config;
    config.L = 25;
    config.seed = 31;
    config.theta0 = {0.25};

    GradientEstimator e1(EstimatorSpec::plain(3), model);
    const ChainTrace trace = run_chain(model, e1, config);

    GradientEstimator e2(EstimatorSpec::plain(3), model);
    ChainRunner runner(model, e2, config);
    CHECK(runner.initial_theta() == ParamVector{0.25});
    std::size_t steps = 0;
    while (!runner.done()) {
        ++steps;
        CHECK(runner.step() == steps);
    }
    CHECK(steps == 25);
    CHECK(runner.theta() == trace.samples.back());
    CHECK(runner.grad_evals() == trace.total_grad_evals);
    CHECK_THROWS_AS(runner.step(), ContractViolationError);
}

TEST_CASE("runaway steps terminate with the failing iteration and step size") {
    const GaussianMeanModel model({0.0, 0.0});
    GradientEstimator estimator(EstimatorSpec::plain(2), model);
    ChainConfig config;
    config.L = 100;
    config.schedule = StepSizeSchedule::fixed(1e8);
    config.seed = 3;
    config.theta0 = {1.0};
    try {
        run_chain(model, estimator, config);
        FAIL("expected divergence");
    } catch (const DivergedChainError& e) {
        CHECK(e.step_size() == 1e8);
        CHECK(e.iteration() > 0);
        CHECK(e.iteration() < 100);
    }
}

TEST_CASE("trace export writes one column per coordinate up to 64") {
    RngStream gen(406, 0, StreamPurpose::data_gen);
    const GaussianMeanModel model(vrmc::generate_gaussian_data(8, 0.0, gen));
    GradientEstimator estimator(EstimatorSpec::plain(4), model);
    ChainConfig config;
    config.L = 3;
    config.seed = 21;
    const ChainTrace trace = run_chain(model, estimator, config);
    std::ostringstream out;
    trace_to_csv(trace, out);
    std::istringstream lines(out.str());
    std::string header;
    std::getline(lines, header);
    CHECK(header == "iteration,grad_evals,h,theta_0");
    std::string row;
    std::size_t rows = 0;
    while (std::getline(lines, row)) {
        ++rows;
    }
    CHECK(rows == 3);
    // First record: iteration 1, cumulative cost 4, h printed round-trip.
    CHECK(out.str().substr(out.str().find('\n') + 1, 8) == "1,4,0.00");
}

TEST_CASE("trace export summarizes coordinates past the column cap") {
    RngStream gen(407, 0, StreamPurpose::data_gen);
    const ParamVector theta_true(70, 0.1);
    const auto data = vrmc::generate_logistic_data(6, theta_true, gen);
    const vrmc::LogisticRegressionModel model(data);
    GradientEstimator estimator(EstimatorSpec::plain(6), model);
    ChainConfig config;
    config.L = 2;
    config.seed = 22;
    const ChainTrace trace = run_chain(model, estimator, config);
    std::ostringstream out;
    trace_to_csv(trace, out);
    std::string header = out.str().substr(0, out.str().find('\n'));
    CHECK(header == "iteration,grad_evals,h,theta_mean,theta_min,theta_max");
}
