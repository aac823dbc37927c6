#pragma once

#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <variant>

#include <json.hpp>

#include "adtrial/errors.hpp"
#include "adtrial/sim_env.hpp"
#include "adtrial/trial_engine.hpp"

namespace adtrial {

// Parsed study-synopsis document: study parameters, exactly one
// environment variant, output settings.
struct ConfigFile {
    StudyConfig study;
    std::variant<HazardSpec, ScriptedOutcome> environment;
    std::optional<std::string> output_dir;
    std::string echo;  // canonical form of the parsed document
};

namespace detail {

constexpr Millis kMillisPerMinute = 60000;

inline Millis minutes_to_millis(double minutes) {
    return static_cast<Millis>(std::llround(minutes * static_cast<double>(kMillisPerMinute)));
}

inline CellKey cell_from_json(const nlohmann::json& j, const char* where) {
    auto arm = arm_from_name(j.at("arm").get<std::string>());
    if (!arm) throw ParseError(std::string(where) + ": unknown arm");
    return {j.at("region").get<std::string>(), *arm};
}

inline StudyConfig parse_study(const nlohmann::json& j) {
    StudyConfig study;
    auto method = method_from_name(j.at("method").get<std::string>());
    if (!method) throw ParseError("study.method must be vanilla, rct, or adaptive");
    study.method = *method;
    study.budget_cap_participants = j.at("budget_cap_participants").get<int>();
    if (j.contains("budget_currency")) study.budget_currency = j["budget_currency"].get<double>();
    if (j.contains("unit_cost")) study.unit_cost = j["unit_cost"].get<double>();
    study.n_stages = j.at("n_stages").get<int>();
    study.stage_duration = minutes_to_millis(j.at("stage_duration_minutes").get<double>());
    study.regions = j.at("regions").get<std::vector<std::string>>();
    study.error_rates.alpha = j.at("alpha").get<double>();
    study.error_rates.beta = j.at("beta").get<double>();
    study.initial_incidence.p1 = j.at("p1").get<double>();
    study.initial_incidence.p2 = j.at("p2").get<double>();
    study.min_corrupted_arm = j.at("min_corrupted_arm").get<int>();
    if (j.contains("event_time_quantization_minutes"))
        study.event_time_quantization =
            minutes_to_millis(j["event_time_quantization_minutes"].get<double>());
    study.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    return study;
}

inline void validate_study(const StudyConfig& study) {
    const auto fail = [](const std::string& field, const std::string& why) {
        throw ConfigError("invalid " + field + ": " + why);
    };
    if (study.budget_cap_participants <= 0)
        fail("study.budget_cap_participants", "must be positive");
    if (study.n_stages < 1) fail("study.n_stages", "must be at least 1");
    if (study.stage_duration <= 0) fail("study.stage_duration_minutes", "must be positive");
    if (study.regions.empty()) fail("study.regions", "must be nonempty");
    if (!(study.error_rates.alpha > 0.0 && study.error_rates.alpha < 1.0))
        fail("study.alpha", "must lie strictly in (0,1)");
    if (!(study.error_rates.beta > 0.0 && study.error_rates.beta < 1.0))
        fail("study.beta", "must lie strictly in (0,1)");
    if (study.initial_incidence.p1 < 0.0 || study.initial_incidence.p1 > 1.0)
        fail("study.p1", "must lie in [0,1]");
    if (study.initial_incidence.p2 < 0.0 || study.initial_incidence.p2 > 1.0)
        fail("study.p2", "must lie in [0,1]");
    if (study.min_corrupted_arm < 0) fail("study.min_corrupted_arm", "must be nonnegative");
    if (study.event_time_quantization && *study.event_time_quantization <= 0)
        fail("study.event_time_quantization_minutes", "must be positive when present");
    if (study.method != Method::vanilla &&
        study.initial_incidence.p1 == study.initial_incidence.p2)
        fail("study.initial_incidence", "p1 must differ from p2 for rct and adaptive methods");
}

inline HazardSpec parse_hazard(const nlohmann::json& j, const StudyConfig& study) {
    HazardSpec spec;
    for (const auto& r : j.at("rates")) {
        const double rate = r.at("rate").get<double>();
        if (rate < 0.0) throw ConfigError("invalid environment.hazard.rates: negative rate");
        spec.per_cell_rate[cell_from_json(r, "environment.hazard.rates")] = rate;
    }
    if (j.contains("stage_overrides")) {
        for (const auto& r : j["stage_overrides"]) {
            const double rate = r.at("rate").get<double>();
            if (rate < 0.0)
                throw ConfigError("invalid environment.hazard.stage_overrides: negative rate");
            spec.stage_rate_overrides[r.at("stage").get<int>()]
                                     [cell_from_json(r, "environment.hazard.stage_overrides")] = rate;
        }
    }
    if (j.contains("onset_delay_minutes")) {
        for (const auto& [region, minutes] : j["onset_delay_minutes"].items()) {
            const Millis delay = minutes_to_millis(minutes.get<double>());
            if (delay < 0 || delay >= study.stage_duration)
                throw ConfigError(
                    "invalid environment.hazard.onset_delay_minutes: must be in [0, "
                    "stage_duration)");
            spec.region_onset_delay[region] = delay;
        }
    }
    spec.seed = j.contains("seed") ? j["seed"].get<std::uint64_t>() : study.rng_seed;
    return spec;
}

inline ScriptedOutcome parse_scripted(const nlohmann::json& j) {
    ScriptedOutcome outcome;
    for (const auto& e : j.at("events")) {
        ScriptedOutcome::Event ev;
        ev.stage = e.at("stage").get<int>();
        const CellKey cell = cell_from_json(e, "environment.scripted.events");
        ev.region = cell.region;
        ev.arm = cell.arm;
        ev.ordinal = e.at("ordinal").get<int>();
        ev.offset = minutes_to_millis(e.at("offset_minutes").get<double>());
        outcome.events.push_back(std::move(ev));
    }
    return outcome;
}

}  // namespace detail

inline ConfigFile parse_config(const nlohmann::json& doc) {
    ConfigFile config;
    try {
        config.study = detail::parse_study(doc.at("study"));

        const auto& env = doc.at("environment");
        const bool has_hazard = env.contains("hazard");
        const bool has_scripted = env.contains("scripted");
        if (has_hazard == has_scripted)
            throw ParseError(
                "environment must contain exactly one of 'hazard' or 'scripted'");
        if (has_hazard)
            config.environment = detail::parse_hazard(env["hazard"], config.study);
        else
            config.environment = detail::parse_scripted(env["scripted"]);

        if (doc.contains("output") && doc["output"].contains("dir"))
            config.output_dir = doc["output"]["dir"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed config: ") + e.what());
    }
    detail::validate_study(config.study);
    config.echo = doc.dump();
    return config;
}

inline ConfigFile load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw StorageError("cannot open config " + path);
    nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ParseError("config is not valid JSON: " + path);
    return parse_config(doc);
}

// Builds the configured driver. The stage window is the full trial for
// vanilla runs, one stage otherwise.
inline std::unique_ptr<EnvironmentDriver> make_driver(const ConfigFile& config) {
    const Millis window = config.study.method == Method::vanilla
                              ? config.study.stage_duration * config.study.n_stages
                              : config.study.stage_duration;
    if (std::holds_alternative<HazardSpec>(config.environment))
        return std::make_unique<SimEnv>(std::get<HazardSpec>(config.environment), window);
    return std::make_unique<ScriptedEnv>(std::get<ScriptedOutcome>(config.environment), window);
}

}  // namespace adtrial
