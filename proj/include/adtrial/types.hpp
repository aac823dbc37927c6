#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace adtrial {

// All timestamps and durations are integer milliseconds since trial start.
using Millis = std::int64_t;

enum class Arm { control, corrupted };

inline const char* arm_name(Arm a) {
    return a == Arm::control ? "control" : "corrupted";
}

inline std::optional<Arm> arm_from_name(const std::string& s) {
    if (s == "control") return Arm::control;
    if (s == "corrupted") return Arm::corrupted;
    return std::nullopt;
}

// One (region, arm) cohort cell.
struct CellKey {
    std::string region;
    Arm arm = Arm::control;

    friend bool operator<(const CellKey& a, const CellKey& b) {
        return std::tie(a.region, a.arm) < std::tie(b.region, b.arm);
    }
    friend bool operator==(const CellKey& a, const CellKey& b) {
        return a.region == b.region && a.arm == b.arm;
    }
};

struct ErrorRates {
    double alpha = 0.05;  // type I
    double beta = 0.10;   // type II
};

struct IncidencePair {
    double p1 = 0.0;  // control incidence
    double p2 = 0.0;  // corrupted incidence
};

struct KmStep {
    Millis time = 0;  // offset from stage start
    double survival = 1.0;
};

// Survival step curve for one cohort. Implicit S = 1 at time 0.
struct KmCurve {
    std::vector<KmStep> steps;
    int n_initial = 0;

    double final_survival() const {
        return steps.empty() ? 1.0 : steps.back().survival;
    }
};

struct RiskRateTable {
    std::map<CellKey, double> cells;
    std::map<Arm, double> arm_marginals;  // absent when the arm had no participants
};

struct AllocationPlan {
    std::map<CellKey, int> counts;
    int n_total = 0;

    int arm_total(Arm arm) const {
        int n = 0;
        for (const auto& [cell, c] : counts)
            if (cell.arm == arm) n += c;
        return n;
    }
    friend bool operator==(const AllocationPlan& a, const AllocationPlan& b) {
        return a.n_total == b.n_total && a.counts == b.counts;
    }
};

struct ParticipantRecord {
    std::string id;
    std::string region;
    Arm arm = Arm::control;
    int stage = 0;
    Millis deployed_at = 0;
    std::optional<Millis> event_at;
    std::optional<Millis> censored_at;

    friend bool operator==(const ParticipantRecord& a, const ParticipantRecord& b) {
        return a.id == b.id && a.region == b.region && a.arm == b.arm &&
               a.stage == b.stage && a.deployed_at == b.deployed_at &&
               a.event_at == b.event_at && a.censored_at == b.censored_at;
    }
};

}  // namespace adtrial
