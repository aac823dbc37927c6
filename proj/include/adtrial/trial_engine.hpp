#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "adtrial/allocation.hpp"
#include "adtrial/env.hpp"
#include "adtrial/errors.hpp"
#include "adtrial/stat_core.hpp"
#include "adtrial/types.hpp"

namespace adtrial {

enum class Method { vanilla, rct, adaptive };

inline const char* method_name(Method m) {
    switch (m) {
        case Method::vanilla: return "vanilla";
        case Method::rct: return "rct";
        default: return "adaptive";
    }
}

inline std::optional<Method> method_from_name(const std::string& s) {
    if (s == "vanilla") return Method::vanilla;
    if (s == "rct") return Method::rct;
    if (s == "adaptive") return Method::adaptive;
    return std::nullopt;
}

enum class StopReason {
    none,
    budget,
    small_arm,
    convergence,
    futility_degenerate,
    futility_zero_rates,
    anomaly,
};

inline const char* stop_reason_name(StopReason r) {
    switch (r) {
        case StopReason::none: return "completed";
        case StopReason::budget: return "budget-stop";
        case StopReason::small_arm: return "small-arm-stop";
        case StopReason::convergence: return "convergence-stop";
        case StopReason::futility_degenerate: return "futility-degenerate-incidence";
        case StopReason::futility_zero_rates: return "futility-all-zero-rates";
        default: return "anomaly";
    }
}

inline std::optional<StopReason> stop_reason_from_name(const std::string& s) {
    for (StopReason r : {StopReason::none, StopReason::budget, StopReason::small_arm,
                         StopReason::convergence, StopReason::futility_degenerate,
                         StopReason::futility_zero_rates, StopReason::anomaly})
        if (s == stop_reason_name(r)) return r;
    return std::nullopt;
}

// Pre-registered study synopsis.
struct StudyConfig {
    Method method = Method::rct;
    int budget_cap_participants = 0;
    std::optional<double> budget_currency;
    std::optional<double> unit_cost;
    int n_stages = 1;
    Millis stage_duration = 0;
    std::vector<std::string> regions;
    ErrorRates error_rates;
    IncidencePair initial_incidence;
    int min_corrupted_arm = 0;
    std::optional<Millis> event_time_quantization;
    std::uint64_t rng_seed = 0;
};

struct TrialState {
    int stage_index = 0;
    int cumulative_deployed = 0;
    std::optional<AllocationPlan> last_plan;
    IncidencePair current_incidence;
    std::optional<StopReason> stop_reason;
    std::vector<ParticipantRecord> records;
};

struct StageReport {
    int stage_index = 0;
    AllocationPlan plan;
    std::map<CellKey, int> event_counts;
    std::optional<RiskRateTable> risk_rates;
    std::optional<int> recomputed_n_total;
    StopReason endpoint_verdict = StopReason::none;
};

struct TrialReport {
    Method method = Method::rct;
    std::vector<StageReport> stages;
    int total_control = 0;
    int total_corrupted = 0;
    int total_deployed = 0;
    int total_attacks = 0;
    StopReason stop_reason = StopReason::none;
    bool causal_attribution = false;
    std::string config_echo;  // canonical config document
    std::uint64_t seed = 0;
};

struct RunResult {
    TrialReport report;
    std::vector<ParticipantRecord> records;
    // per executed stage, the KM curve of every populated cell
    std::vector<std::map<CellKey, KmCurve>> stage_curves;
};

// Fleet size from the money budget, capped by the participant cap.
inline int get_num_to_deploy(const StudyConfig& config) {
    int n = config.budget_cap_participants;
    if (config.budget_currency && config.unit_cost) {
        if (*config.unit_cost <= 0.0)
            throw NonpositiveBudgetError("unit_cost must be positive");
        const int affordable = static_cast<int>(std::floor(*config.budget_currency / *config.unit_cost));
        n = std::min(n, affordable);
    }
    if (n <= 0) throw NonpositiveBudgetError("budget allows zero participants");
    return n;
}

// Endpoint order is fixed: (a) budget, (b) small corrupted arm,
// (c) converged plan (adaptive only). First match wins.
inline std::optional<StopReason> evaluate_endpoints(const TrialState& state,
                                                    const AllocationPlan& next_plan,
                                                    const StudyConfig& config) {
    if (state.cumulative_deployed + next_plan.n_total > config.budget_cap_participants)
        return StopReason::budget;
    if (next_plan.arm_total(Arm::corrupted) < config.min_corrupted_arm)
        return StopReason::small_arm;
    if (config.method == Method::adaptive && state.last_plan &&
        next_plan.counts == state.last_plan->counts)
        return StopReason::convergence;
    return std::nullopt;
}

namespace detail {

inline Millis quantize_offset(Millis offset, Millis q, Millis window) {
    // polling-interval semantics: an event is seen at the next poll
    const Millis polls = (offset + q - 1) / q;
    return std::min(polls * q, window);
}

// Deploys one stage, waits it out, collects and normalizes events,
// censors survivors. Returns the stage's finished records.
inline std::vector<ParticipantRecord> execute_stage(EnvironmentDriver& env,
                                                    const AllocationPlan& plan, int stage_index,
                                                    Millis stage_start, Millis window,
                                                    const StudyConfig& config) {
    const Millis stage_end = stage_start + window;
    auto deployed = env.deploy_cohort(plan, stage_index);

    std::vector<ParticipantRecord> records;
    records.reserve(deployed.size());
    std::map<std::string, std::size_t> by_id;
    for (const auto& p : deployed) {
        by_id[p.id] = records.size();
        records.push_back({p.id, p.region, p.arm, stage_index, stage_start,
                           std::nullopt, std::nullopt});
    }

    auto events = env.collect_stage(stage_index);
    std::sort(events.begin(), events.end(), [](const auto& a, const auto& b) {
        return std::tie(a.event_at, a.participant_id) < std::tie(b.event_at, b.participant_id);
    });
    for (const auto& ev : events) {
        auto it = by_id.find(ev.participant_id);
        if (it == by_id.end())
            throw TrialError("driver reported event for unknown participant " + ev.participant_id);
        auto& rec = records[it->second];
        if (rec.event_at)
            throw TrialError("driver reported a second event for " + ev.participant_id);
        Millis offset = ev.event_at - rec.deployed_at;
        if (offset < 0 || offset > window)
            throw TrialError("driver event outside stage window for " + ev.participant_id);
        if (config.event_time_quantization && *config.event_time_quantization > 0)
            offset = quantize_offset(offset, *config.event_time_quantization, window);
        rec.event_at = rec.deployed_at + offset;
    }

    env.cleanup(stage_index);
    for (auto& rec : records)
        if (!rec.event_at) rec.censored_at = stage_end;
    return records;
}

inline std::map<CellKey, KmCurve> cell_curves(const std::vector<ParticipantRecord>& stage_records,
                                              Millis window) {
    std::map<CellKey, std::vector<ParticipantRecord>> by_cell;
    for (const auto& rec : stage_records) by_cell[{rec.region, rec.arm}].push_back(rec);
    std::map<CellKey, KmCurve> curves;
    for (const auto& [cell, recs] : by_cell) curves[cell] = km_estimate(recs, window);
    return curves;
}

inline std::map<CellKey, int> count_events(const std::vector<ParticipantRecord>& stage_records) {
    std::map<CellKey, int> counts;
    for (const auto& rec : stage_records) {
        auto& c = counts[{rec.region, rec.arm}];
        if (rec.event_at) ++c;
    }
    return counts;
}

inline void finalize_totals(RunResult& result) {
    auto& rep = result.report;
    rep.total_control = 0;
    rep.total_corrupted = 0;
    rep.total_attacks = 0;
    for (const auto& stage : rep.stages) {
        rep.total_control += stage.plan.arm_total(Arm::control);
        rep.total_corrupted += stage.plan.arm_total(Arm::corrupted);
        for (const auto& [cell, n] : stage.event_counts) rep.total_attacks += n;
    }
    rep.total_deployed = rep.total_control + rep.total_corrupted;
}

}  // namespace detail

// Method 1: one uncontrolled window, corrupted systems only, no interim
// analysis.
inline RunResult run_vanilla(const StudyConfig& config, EnvironmentDriver& env) {
    if (config.method != Method::vanilla)
        throw ConfigError("run_vanilla requires method = vanilla");

    const int n = get_num_to_deploy(config);
    AllocationPlan plan;
    plan.n_total = n;
    const auto counts = split_arm_across_regions(n, config.regions.size());
    for (std::size_t i = 0; i < config.regions.size(); ++i) {
        plan.counts[{config.regions[i], Arm::control}] = 0;
        plan.counts[{config.regions[i], Arm::corrupted}] = counts[i];
    }

    const Millis window = config.stage_duration * config.n_stages;
    auto records = detail::execute_stage(env, plan, 0, 0, window, config);

    RunResult result;
    result.records = records;
    result.stage_curves.push_back(detail::cell_curves(records, window));

    StageReport stage;
    stage.stage_index = 0;
    stage.plan = plan;
    stage.event_counts = detail::count_events(records);
    result.report.method = Method::vanilla;
    result.report.stages.push_back(std::move(stage));
    result.report.causal_attribution = false;
    result.report.seed = config.rng_seed;
    if (auto reason = env.anomaly(0)) result.report.stop_reason = StopReason::anomaly;
    detail::finalize_totals(result);
    return result;
}

namespace detail {

// Shared staged loop for Methods 2 and 3.
inline RunResult run_staged(const StudyConfig& config, EnvironmentDriver& env) {
    const bool adaptive = config.method == Method::adaptive;
    RunResult result;
    result.report.method = config.method;
    result.report.causal_attribution = true;
    result.report.seed = config.rng_seed;

    TrialState state;
    state.current_incidence = config.initial_incidence;

    AllocationPlan plan;
    try {
        const int n_total = power_sample_size(state.current_incidence, config.error_rates);
        plan = equal_split(n_total, config.regions);
    } catch (const DegenerateIncidenceError&) {
        result.report.stop_reason = StopReason::futility_degenerate;
        return result;
    }

    // guard stage 1 against the cap as well
    if (auto stop = evaluate_endpoints(state, plan, config)) {
        result.report.stop_reason = *stop;
        return result;
    }

    for (int stage_index = 0; stage_index < config.n_stages; ++stage_index) {
        const Millis stage_start = static_cast<Millis>(stage_index) * config.stage_duration;
        auto stage_records =
            execute_stage(env, plan, stage_index, stage_start, config.stage_duration, config);
        state.cumulative_deployed += plan.n_total;
        state.records.insert(state.records.end(), stage_records.begin(), stage_records.end());
        result.records.insert(result.records.end(), stage_records.begin(), stage_records.end());

        auto curves = cell_curves(stage_records, config.stage_duration);
        auto rates = risk_rates(curves, stage_records, config.stage_duration);
        result.stage_curves.push_back(curves);

        StageReport stage;
        stage.stage_index = stage_index;
        stage.plan = plan;
        stage.event_counts = count_events(stage_records);
        stage.risk_rates = rates;

        if (auto reason = env.anomaly(stage_index)) {
            result.report.stages.push_back(std::move(stage));
            result.report.stop_reason = StopReason::anomaly;
            break;
        }

        state.last_plan = plan;
        std::optional<AllocationPlan> next_plan;
        std::optional<StopReason> futility;

        if (adaptive) {
            // interim analysis on this stage's records only
            if (auto it = rates.arm_marginals.find(Arm::control); it != rates.arm_marginals.end())
                state.current_incidence.p1 = it->second;
            if (auto it = rates.arm_marginals.find(Arm::corrupted); it != rates.arm_marginals.end())
                state.current_incidence.p2 = it->second;
            try {
                const int n_total =
                    power_sample_size(state.current_incidence, config.error_rates);
                stage.recomputed_n_total = n_total;
                next_plan = weighted_split(n_total, rates, config.regions);
            } catch (const DegenerateIncidenceError&) {
                futility = StopReason::futility_degenerate;
            } catch (const AllZeroRatesError&) {
                futility = StopReason::futility_zero_rates;
            }
        } else {
            next_plan = plan;  // RCT never updates its assumptions
        }

        const bool last_stage = stage_index + 1 == config.n_stages;
        if (!last_stage) {
            if (futility) {
                stage.endpoint_verdict = *futility;
                state.stop_reason = futility;
            } else if (auto stop = evaluate_endpoints(state, *next_plan, config)) {
                stage.endpoint_verdict = *stop;
                state.stop_reason = stop;
            }
        }
        result.report.stages.push_back(std::move(stage));
        if (state.stop_reason) {
            result.report.stop_reason = *state.stop_reason;
            break;
        }
        if (last_stage) break;
        plan = *next_plan;
    }

    finalize_totals(result);
    return result;
}

}  // namespace detail

inline RunResult run_rct(const StudyConfig& config, EnvironmentDriver& env) {
    if (config.method != Method::rct) throw ConfigError("run_rct requires method = rct");
    return detail::run_staged(config, env);
}

inline RunResult run_adaptive(const StudyConfig& config, EnvironmentDriver& env) {
    if (config.method != Method::adaptive)
        throw ConfigError("run_adaptive requires method = adaptive");
    return detail::run_staged(config, env);
}

inline RunResult run_trial(const StudyConfig& config, EnvironmentDriver& env) {
    switch (config.method) {
        case Method::vanilla: return run_vanilla(config, env);
        case Method::rct: return run_rct(config, env);
        default: return run_adaptive(config, env);
    }
}

}  // namespace adtrial
