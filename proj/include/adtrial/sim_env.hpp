#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "adtrial/env.hpp"
#include "adtrial/errors.hpp"
#include "adtrial/rng.hpp"
#include "adtrial/types.hpp"

namespace adtrial {

// Stochastic fleet model: each participant draws an independent
// exponential time-to-compromise with its cell's hazard rate, shifted by
// the region's onset delay. Rates are events per participant per stage
// window.
struct HazardSpec {
    std::map<CellKey, double> per_cell_rate;
    std::map<int, std::map<CellKey, double>> stage_rate_overrides;
    std::map<std::string, Millis> region_onset_delay;
    std::uint64_t seed = 0;

    double rate_for(const CellKey& cell, int stage_index) const {
        if (auto s = stage_rate_overrides.find(stage_index); s != stage_rate_overrides.end())
            if (auto c = s->second.find(cell); c != s->second.end()) return c->second;
        if (auto c = per_cell_rate.find(cell); c != per_cell_rate.end()) return c->second;
        return 0.0;
    }

    Millis delay_for(const std::string& region) const {
        auto it = region_onset_delay.find(region);
        return it == region_onset_delay.end() ? 0 : it->second;
    }
};

// Replay fixture: explicit event list. Events referencing ordinals that
// were never deployed are dropped.
struct ScriptedOutcome {
    struct Event {
        int stage = 0;
        std::string region;
        Arm arm = Arm::control;
        int ordinal = 0;
        Millis offset = 0;  // from stage start
    };
    std::vector<Event> events;
};

namespace detail {

inline std::string participant_id(int stage, const CellKey& cell, int ordinal) {
    return "s" + std::to_string(stage) + "-" + cell.region + "-" +
           arm_name(cell.arm) + "-" + std::to_string(ordinal);
}

struct StageState {
    std::vector<DeployedParticipant> participants;
    std::vector<EventObservation> events;
    bool cleaned = false;
};

class StagedDriverBase : public EnvironmentDriver {
public:
    std::vector<EventObservation> collect_stage(int stage_index) override {
        return stage_at(stage_index).events;
    }

    std::vector<std::string> cleanup(int stage_index) override {
        auto& stage = stage_at(stage_index);
        if (stage.cleaned) return {};
        stage.cleaned = true;
        std::vector<std::string> censored;
        for (const auto& p : stage.participants) {
            bool evented = false;
            for (const auto& e : stage.events)
                if (e.participant_id == p.id) {
                    evented = true;
                    break;
                }
            if (!evented) censored.push_back(p.id);
        }
        return censored;
    }

protected:
    StageState& stage_at(int stage_index) {
        auto it = stages_.find(stage_index);
        if (it == stages_.end())
            throw UnknownStageError("stage " + std::to_string(stage_index) +
                                    " was never deployed");
        return it->second;
    }

    StageState& new_stage(int stage_index) {
        if (stages_.count(stage_index))
            throw DuplicateDeployError("stage " + std::to_string(stage_index) +
                                       " already deployed");
        return stages_[stage_index];
    }

    std::map<int, StageState> stages_;
};

}  // namespace detail

class SimEnv : public detail::StagedDriverBase {
public:
    SimEnv(HazardSpec spec, Millis stage_window_ms)
        : spec_(std::move(spec)), window_(stage_window_ms) {}

    std::vector<DeployedParticipant> deploy_cohort(const AllocationPlan& plan,
                                                   int stage_index) override {
        auto& stage = new_stage(stage_index);
        const Millis stage_start = static_cast<Millis>(stage_index) * window_;
        for (const auto& [cell, count] : plan.counts) {
            const double rate = spec_.rate_for(cell, stage_index);
            const Millis delay = spec_.delay_for(cell.region);
            for (int ordinal = 0; ordinal < count; ++ordinal) {
                DeployedParticipant p{detail::participant_id(stage_index, cell, ordinal),
                                      cell.region, cell.arm};
                if (rate > 0.0) {
                    // substream key: (seed, stage, region, arm, ordinal)
                    std::uint64_t key = rng::mix(spec_.seed, static_cast<std::uint64_t>(stage_index));
                    key = rng::hash_string(key, cell.region);
                    key = rng::mix(key, cell.arm == Arm::control ? 0 : 1);
                    key = rng::mix(key, static_cast<std::uint64_t>(ordinal));
                    const double u = rng::uniform01(key);
                    const double ttc = -std::log1p(-u) / rate * static_cast<double>(window_);
                    const double offset = static_cast<double>(delay) + ttc;
                    if (offset <= static_cast<double>(window_)) {
                        stage.events.push_back(
                            {p.id, stage_start + static_cast<Millis>(std::llround(offset))});
                    }
                }
                stage.participants.push_back(std::move(p));
            }
        }
        return stage.participants;
    }

private:
    HazardSpec spec_;
    Millis window_;
};

class ScriptedEnv : public detail::StagedDriverBase {
public:
    ScriptedEnv(ScriptedOutcome outcome, Millis stage_window_ms)
        : outcome_(std::move(outcome)), window_(stage_window_ms) {}

    std::vector<DeployedParticipant> deploy_cohort(const AllocationPlan& plan,
                                                   int stage_index) override {
        auto& stage = new_stage(stage_index);
        const Millis stage_start = static_cast<Millis>(stage_index) * window_;
        for (const auto& [cell, count] : plan.counts) {
            for (int ordinal = 0; ordinal < count; ++ordinal) {
                stage.participants.push_back(
                    {detail::participant_id(stage_index, cell, ordinal), cell.region, cell.arm});
            }
        }
        for (const auto& ev : outcome_.events) {
            if (ev.stage != stage_index) continue;
            if (ev.offset < 0 || ev.offset > window_)
                throw DomainError("scripted event offset outside stage window");
            const CellKey cell{ev.region, ev.arm};
            auto it = plan.counts.find(cell);
            if (it == plan.counts.end() || ev.ordinal >= it->second) continue;  // never deployed
            stage.events.push_back(
                {detail::participant_id(stage_index, cell, ev.ordinal), stage_start + ev.offset});
        }
        return stage.participants;
    }

private:
    ScriptedOutcome outcome_;
    Millis window_;
};

}  // namespace adtrial
