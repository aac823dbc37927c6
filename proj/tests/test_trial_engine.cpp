#include <doctest.h>

#include <random>

#include "adtrial/persistence.hpp"
#include "adtrial/sim_env.hpp"
#include "adtrial/trial_engine.hpp"

using namespace adtrial;

namespace {

const std::vector<std::string> kRegions{"e-1", "e-2", "w-1", "w-2"};
constexpr Millis kStage = 14'400'000;  // 4 h

StudyConfig base_config(Method method) {
    StudyConfig config;
    config.method = method;
    config.budget_cap_participants = 200;
    config.n_stages = 3;
    config.stage_duration = kStage;
    config.regions = kRegions;
    config.error_rates = {0.05, 0.10};
    config.initial_incidence = {0.01, 0.33};  // stage-1 plan of 48
    config.min_corrupted_arm = 10;
    config.rng_seed = 42;
    return config;
}

// Declining replay: corrupted events every stage in every populated
// region; control events only in stage 1, east regions only.
ScriptedOutcome declining_outcome() {
    ScriptedOutcome outcome;
    for (const std::string region : {"e-1", "e-2"})
        outcome.events.push_back({0, region, Arm::control, 0, 600'000});
    for (const auto& region : kRegions)
        for (int ordinal = 0; ordinal < 4; ++ordinal)
            outcome.events.push_back(
                {0, region, Arm::corrupted, ordinal, 300'000 + 60'000 * ordinal});
    for (const auto& region : kRegions)
        for (int ordinal = 0; ordinal < 3; ++ordinal)
            outcome.events.push_back(
                {1, region, Arm::corrupted, ordinal, 200'000 + 60'000 * ordinal});
    for (const auto& region : kRegions)
        outcome.events.push_back({2, region, Arm::corrupted, 0, 400'000});
    return outcome;
}

struct AnomalousEnv : SimEnv {
    using SimEnv::SimEnv;
    std::optional<std::string> anomaly(int) override { return "unexpected-exploit"; }
};

}  // namespace

TEST_CASE("get_num_to_deploy") {
    StudyConfig config = base_config(Method::vanilla);
    config.budget_currency = 650.0;
    config.unit_cost = 3.25;
    CHECK(get_num_to_deploy(config) == 200);

    config.budget_currency = 100.0;
    config.unit_cost = 3.0;
    CHECK(get_num_to_deploy(config) == 33);

    config.budget_currency = 0.0;
    CHECK_THROWS_AS(get_num_to_deploy(config), NonpositiveBudgetError);

    config.budget_currency.reset();
    config.unit_cost.reset();
    CHECK(get_num_to_deploy(config) == 200);
}

TEST_CASE("vanilla deploys corrupted only, one window") {
    StudyConfig config = base_config(Method::vanilla);
    config.budget_cap_participants = 140;
    ScriptedEnv env({}, kStage * 3);
    const auto result = run_vanilla(config, env);
    REQUIRE(result.report.stages.size() == 1);
    const auto& plan = result.report.stages[0].plan;
    for (const auto& region : kRegions) {
        CHECK(plan.counts.at({region, Arm::control}) == 0);
        CHECK(plan.counts.at({region, Arm::corrupted}) == 35);
    }
    CHECK(result.report.total_control == 0);
    CHECK(result.report.total_corrupted == 140);
    CHECK(!result.report.causal_attribution);
    CHECK(result.report.stop_reason == StopReason::none);
    // one unbroken window: censoring lands at the full trial horizon
    for (const auto& rec : result.records) CHECK(rec.censored_at == kStage * 3);
}

TEST_CASE("vanilla uneven split follows region order") {
    StudyConfig config = base_config(Method::vanilla);
    config.budget_cap_participants = 6;
    ScriptedEnv env({}, kStage * 3);
    const auto result = run_vanilla(config, env);
    const auto& plan = result.report.stages[0].plan;
    CHECK(plan.counts.at({"e-1", Arm::corrupted}) == 2);
    CHECK(plan.counts.at({"e-2", Arm::corrupted}) == 2);
    CHECK(plan.counts.at({"w-1", Arm::corrupted}) == 1);
    CHECK(plan.counts.at({"w-2", Arm::corrupted}) == 1);
}

TEST_CASE("rct repeats the same plan every stage") {
    StudyConfig config = base_config(Method::rct);
    ScriptedEnv env({}, kStage);
    const auto result = run_rct(config, env);
    REQUIRE(result.report.stages.size() == 3);
    for (const auto& stage : result.report.stages) {
        CHECK(stage.plan.n_total == 48);
        for (const auto& [cell, count] : stage.plan.counts) CHECK(count == 6);
        CHECK(!stage.recomputed_n_total);
    }
    CHECK(result.report.total_deployed == 144);
    CHECK(result.report.total_control == 72);
    CHECK(result.report.total_corrupted == 72);
    CHECK(result.report.stop_reason == StopReason::none);
}

TEST_CASE("rct stops before a stage that would exceed the cap") {
    StudyConfig config = base_config(Method::rct);
    config.budget_cap_participants = 50;
    ScriptedEnv env({}, kStage);
    const auto result = run_rct(config, env);
    REQUIRE(result.report.stages.size() == 1);
    CHECK(result.report.total_deployed == 48);
    CHECK(result.report.stop_reason == StopReason::budget);
    CHECK(result.report.stages[0].endpoint_verdict == StopReason::budget);
}

TEST_CASE("rct with one stage runs exactly one stage") {
    StudyConfig config = base_config(Method::rct);
    config.n_stages = 1;
    ScriptedEnv env({}, kStage);
    const auto result = run_rct(config, env);
    CHECK(result.report.stages.size() == 1);
    CHECK(result.report.stop_reason == StopReason::none);
}

TEST_CASE("degenerate initial incidence is an immediate futility stop") {
    StudyConfig config = base_config(Method::rct);
    config.initial_incidence = {0.3, 0.3};
    ScriptedEnv env({}, kStage);
    const auto result = run_rct(config, env);
    CHECK(result.report.stages.empty());
    CHECK(result.report.total_deployed == 0);
    CHECK(result.report.stop_reason == StopReason::futility_degenerate);
}

TEST_CASE("adaptive drops zero-rate cells in the next stage") {
    StudyConfig config = base_config(Method::adaptive);
    ScriptedOutcome outcome;
    for (const auto& region : kRegions)
        for (int ordinal = 0; ordinal < 2; ++ordinal)
            outcome.events.push_back(
                {0, region, Arm::corrupted, ordinal, 100'000 + 50'000 * ordinal});
    ScriptedEnv env(outcome, kStage);
    const auto result = run_adaptive(config, env);
    REQUIRE(result.report.stages.size() >= 2);
    const auto& stage2 = result.report.stages[1].plan;
    for (const auto& region : kRegions) CHECK(stage2.counts.at({region, Arm::control}) == 0);
}

TEST_CASE("adaptive reproduces the staged control drop-off pattern") {
    StudyConfig config = base_config(Method::adaptive);
    config.initial_incidence = {0.01, 0.33};
    ScriptedEnv env(declining_outcome(), kStage);
    const auto result = run_adaptive(config, env);

    REQUIRE(result.report.stages.size() == 3);
    const auto& s1 = result.report.stages[0].plan;
    const auto& s2 = result.report.stages[1].plan;
    const auto& s3 = result.report.stages[2].plan;
    CHECK(s1.n_total == 48);
    for (const auto& [cell, count] : s1.counts) CHECK(count == 6);

    CHECK(s2.counts.at({"w-1", Arm::control}) == 0);
    CHECK(s2.counts.at({"w-2", Arm::control}) == 0);
    CHECK(s2.counts.at({"e-1", Arm::control}) > 0);
    CHECK(s2.counts.at({"e-2", Arm::control}) > 0);

    for (const auto& region : kRegions) CHECK(s3.counts.at({region, Arm::control}) == 0);
    CHECK(s3.n_total < s1.n_total);
    CHECK(result.report.stop_reason == StopReason::none);
}

TEST_CASE("adaptive equal stage-1 marginals stop as futility") {
    StudyConfig config = base_config(Method::adaptive);
    config.initial_incidence = {0.1, 0.9};
    config.min_corrupted_arm = 0;
    ScriptedOutcome outcome;
    // same event pattern in both arms: identical marginals
    outcome.events.push_back({0, "e-1", Arm::control, 0, 60'000});
    outcome.events.push_back({0, "e-1", Arm::corrupted, 0, 60'000});
    ScriptedEnv env(outcome, kStage);
    const auto result = run_adaptive(config, env);
    CHECK(result.report.stop_reason == StopReason::futility_degenerate);
    REQUIRE(result.report.stages.size() == 1);
}

TEST_CASE("adaptive with no events anywhere stops as futility") {
    // both marginals collapse to 0, so the degenerate-incidence class fires
    StudyConfig config = base_config(Method::adaptive);
    ScriptedEnv env({}, kStage);
    const auto result = run_adaptive(config, env);
    CHECK(result.report.stop_reason == StopReason::futility_degenerate);
    CHECK(result.report.stages.size() == 1);
}

TEST_CASE("evaluate_endpoints order and arithmetic") {
    StudyConfig config = base_config(Method::adaptive);
    AllocationPlan next = equal_split(48, kRegions);
    TrialState state;

    state.cumulative_deployed = 144;
    CHECK(!evaluate_endpoints(state, next, config));

    state.cumulative_deployed = 160;
    CHECK(evaluate_endpoints(state, next, config) == StopReason::budget);

    state.cumulative_deployed = 0;
    AllocationPlan small;
    small.n_total = 9;
    for (const auto& region : kRegions) small.counts[{region, Arm::control}] = 0;
    small.counts[{"e-1", Arm::corrupted}] = 9;
    CHECK(evaluate_endpoints(state, small, config) == StopReason::small_arm);

    state.last_plan = next;
    CHECK(evaluate_endpoints(state, next, config) == StopReason::convergence);

    // (c) is adaptive-only
    StudyConfig rct = base_config(Method::rct);
    CHECK(!evaluate_endpoints(state, next, rct));
}

TEST_CASE("anomaly signal forces an immediate stop") {
    StudyConfig config = base_config(Method::rct);
    HazardSpec spec;
    spec.seed = config.rng_seed;
    AnomalousEnv env(spec, kStage);
    const auto result = run_rct(config, env);
    CHECK(result.report.stop_reason == StopReason::anomaly);
    CHECK(result.report.stages.size() == 1);
}

TEST_CASE("event quantization snaps offsets to the polling grid") {
    StudyConfig config = base_config(Method::rct);
    config.event_time_quantization = 600'000;  // 10-minute polls
    ScriptedOutcome outcome;
    outcome.events.push_back({0, "e-1", Arm::corrupted, 0, 610'000});
    outcome.events.push_back({0, "e-1", Arm::corrupted, 1, 600'000});
    ScriptedEnv env(outcome, kStage);
    const auto result = run_rct(config, env);
    std::vector<Millis> offsets;
    for (const auto& rec : result.records)
        if (rec.event_at) offsets.push_back(*rec.event_at - rec.deployed_at);
    REQUIRE(offsets.size() == 2);
    CHECK(offsets[0] == 1'200'000); // ordinal 0: seen at the next poll
    CHECK(offsets[1] == 600'000);   // ordinal 1: already on the grid
}

TEST_CASE("same config and environment reproduce byte-identical reports") {
    StudyConfig config = base_config(Method::adaptive);
    HazardSpec spec;
    for (const auto& region : kRegions) {
        spec.per_cell_rate[{region, Arm::control}] = 0.05;
        spec.per_cell_rate[{region, Arm::corrupted}] = 1.2;
    }
    spec.seed = config.rng_seed;
    SimEnv env1(spec, kStage), env2(spec, kStage);
    const auto r1 = run_adaptive(config, env1);
    const auto r2 = run_adaptive(config, env2);
    CHECK(report_to_json(r1.report).dump() == report_to_json(r2.report).dump());
    CHECK(r1.records == r2.records);
}

TEST_CASE("cumulative deployment never exceeds the cap") {
    std::mt19937_64 gen(77);
    for (int trial = 0; trial < 50; ++trial) {
        StudyConfig config = base_config(Method::adaptive);
        config.budget_cap_participants = 60;
        config.n_stages = 5;
        config.min_corrupted_arm = 0;
        config.initial_incidence = {0.05, 0.6};
        config.rng_seed = gen();
        HazardSpec spec;
        std::uniform_real_distribution<double> dist(0.0, 2.0);
        for (const auto& region : kRegions) {
            spec.per_cell_rate[{region, Arm::control}] = dist(gen);
            spec.per_cell_rate[{region, Arm::corrupted}] = dist(gen);
        }
        spec.seed = config.rng_seed;
        SimEnv env(spec, kStage);
        const auto result = run_adaptive(config, env);
        CHECK(result.report.total_deployed <= config.budget_cap_participants);
        // every participant terminated by stage end, exactly one way
        for (const auto& rec : result.records)
            CHECK(rec.event_at.has_value() != rec.censored_at.has_value());
    }
}
