#pragma once

#include <optional>
#include <string>
#include <vector>

#include "adtrial/types.hpp"

namespace adtrial {

struct DeployedParticipant {
    std::string id;
    std::string region;
    Arm arm = Arm::control;
};

struct EventObservation {
    std::string participant_id;
    Millis event_at = 0;  // absolute, ms since trial start
};

// Environment-driver contract. The simulator implements it; a real
// deployer could as well. Each stage's events are delivered as one batch.
class EnvironmentDriver {
public:
    virtual ~EnvironmentDriver() = default;

    // Creates the stage's participants. Returned order is cell-major:
    // regions in plan order, control before corrupted, ordinals ascending.
    virtual std::vector<DeployedParticipant> deploy_cohort(const AllocationPlan& plan,
                                                           int stage_index) = 0;

    // All events with timestamp within the stage window; idempotent.
    virtual std::vector<EventObservation> collect_stage(int stage_index) = 0;

    // Censors every non-evented participant; returns their ids. A second
    // call returns an empty set.
    virtual std::vector<std::string> cleanup(int stage_index) = 0;

    // Raised by drivers that detect out-of-protocol activity; forces an
    // immediate stop.
    virtual std::optional<std::string> anomaly(int stage_index) {
        (void)stage_index;
        return std::nullopt;
    }
};

}  // namespace adtrial
