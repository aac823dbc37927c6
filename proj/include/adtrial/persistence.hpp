#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "adtrial/errors.hpp"
#include "adtrial/trial_engine.hpp"
#include "adtrial/types.hpp"

namespace adtrial {

namespace detail {

// shortest round-trip decimal form, locale-independent
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace detail

// ---- event log (JSON Lines) -------------------------------------------

inline nlohmann::json record_to_json(const ParticipantRecord& rec) {
    nlohmann::json j;
    j["id"] = rec.id;
    j["region"] = rec.region;
    j["arm"] = arm_name(rec.arm);
    j["stage"] = rec.stage;
    j["deployed_at"] = rec.deployed_at;
    j["event_at"] = rec.event_at ? nlohmann::json(*rec.event_at) : nlohmann::json(nullptr);
    j["censored_at"] = rec.censored_at ? nlohmann::json(*rec.censored_at) : nlohmann::json(nullptr);
    return j;
}

inline ParticipantRecord record_from_json(const nlohmann::json& j) {
    ParticipantRecord rec;
    rec.id = j.at("id").get<std::string>();
    rec.region = j.at("region").get<std::string>();
    auto arm = arm_from_name(j.at("arm").get<std::string>());
    if (!arm) throw SchemaViolationError("unknown arm in event log");
    rec.arm = *arm;
    rec.stage = j.at("stage").get<int>();
    rec.deployed_at = j.at("deployed_at").get<Millis>();
    if (!j.at("event_at").is_null()) rec.event_at = j.at("event_at").get<Millis>();
    if (!j.at("censored_at").is_null()) rec.censored_at = j.at("censored_at").get<Millis>();
    return rec;
}

// Appends one JSON object line per finished record. A finished record has
// exactly one of event_at / censored_at.
inline void append_events(const std::vector<ParticipantRecord>& records, std::ostream& sink) {
    for (const auto& rec : records) {
        if (rec.event_at && rec.censored_at)
            throw SchemaViolationError("record " + rec.id + " is both evented and censored");
        if (!rec.event_at && !rec.censored_at)
            throw SchemaViolationError("record " + rec.id + " is neither evented nor censored");
        sink << record_to_json(rec).dump() << "\n";
        if (!sink) throw StorageError("event log write failed");
    }
    sink.flush();
}

inline void append_events(const std::vector<ParticipantRecord>& records,
                          const std::string& path) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw StorageError("cannot open event log " + path);
    append_events(records, out);
}

inline std::vector<ParticipantRecord> read_events(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw StorageError("cannot open event log " + path);
    std::vector<ParticipantRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        records.push_back(record_from_json(nlohmann::json::parse(line)));
    }
    return records;
}

// ---- survival-curve export (CSV) --------------------------------------

// Step-function points at each event time plus a terminal point at stage
// end, in (region, arm, time) order. Values are the estimator's own, no
// recomputation.
inline void export_survival_curves(
    const std::vector<std::map<CellKey, KmCurve>>& stage_curves, Millis stage_window,
    std::ostream& out) {
    out << "time_minutes,region,arm,stage,survival\n";
    for (std::size_t stage = 0; stage < stage_curves.size(); ++stage) {
        for (const auto& [cell, curve] : stage_curves[stage]) {
            const auto emit = [&](Millis t, double s) {
                out << detail::format_double(static_cast<double>(t) / 60000.0) << ','
                    << cell.region << ',' << arm_name(cell.arm) << ',' << stage << ','
                    << detail::format_double(s) << "\n";
            };
            for (const auto& step : curve.steps) emit(step.time, step.survival);
            emit(stage_window, curve.final_survival());
        }
    }
    if (!out) throw StorageError("curve export failed");
}

inline void export_survival_curves(const std::vector<std::map<CellKey, KmCurve>>& stage_curves,
                                   Millis stage_window, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw StorageError("cannot open " + path);
    export_survival_curves(stage_curves, stage_window, out);
}

// ---- report serialization ---------------------------------------------

inline nlohmann::json plan_to_json(const AllocationPlan& plan) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& [cell, count] : plan.counts)
        cells.push_back({{"region", cell.region}, {"arm", arm_name(cell.arm)}, {"count", count}});
    return {{"n_total", plan.n_total}, {"cells", cells}};
}

inline AllocationPlan plan_from_json(const nlohmann::json& j) {
    AllocationPlan plan;
    plan.n_total = j.at("n_total").get<int>();
    for (const auto& c : j.at("cells")) {
        auto arm = arm_from_name(c.at("arm").get<std::string>());
        if (!arm) throw ReportError("unknown arm in plan");
        plan.counts[{c.at("region").get<std::string>(), *arm}] = c.at("count").get<int>();
    }
    return plan;
}

inline nlohmann::json rates_to_json(const RiskRateTable& rates) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& [cell, rate] : rates.cells)
        cells.push_back({{"region", cell.region}, {"arm", arm_name(cell.arm)}, {"rate", rate}});
    nlohmann::json marginals;
    for (const auto& [arm, rate] : rates.arm_marginals) marginals[arm_name(arm)] = rate;
    return {{"cells", cells}, {"arm_marginals", marginals}};
}

inline RiskRateTable rates_from_json(const nlohmann::json& j) {
    RiskRateTable rates;
    for (const auto& c : j.at("cells")) {
        auto arm = arm_from_name(c.at("arm").get<std::string>());
        if (!arm) throw ReportError("unknown arm in risk table");
        rates.cells[{c.at("region").get<std::string>(), *arm}] = c.at("rate").get<double>();
    }
    for (const auto& [name, rate] : j.at("arm_marginals").items()) {
        auto arm = arm_from_name(name);
        if (!arm) throw ReportError("unknown arm in marginals");
        rates.arm_marginals[*arm] = rate.get<double>();
    }
    return rates;
}

inline nlohmann::json report_to_json(const TrialReport& report) {
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& stage : report.stages) {
        nlohmann::json s;
        s["stage_index"] = stage.stage_index;
        s["plan"] = plan_to_json(stage.plan);
        nlohmann::json events = nlohmann::json::array();
        for (const auto& [cell, n] : stage.event_counts)
            events.push_back({{"region", cell.region}, {"arm", arm_name(cell.arm)}, {"events", n}});
        s["event_counts"] = events;
        s["risk_rates"] = stage.risk_rates ? rates_to_json(*stage.risk_rates)
                                           : nlohmann::json(nullptr);
        s["recomputed_n_total"] = stage.recomputed_n_total
                                      ? nlohmann::json(*stage.recomputed_n_total)
                                      : nlohmann::json(nullptr);
        s["endpoint_verdict"] = stop_reason_name(stage.endpoint_verdict);
        stages.push_back(std::move(s));
    }
    nlohmann::json j;
    j["method"] = method_name(report.method);
    j["stages"] = stages;
    j["total_control"] = report.total_control;
    j["total_corrupted"] = report.total_corrupted;
    j["total_deployed"] = report.total_deployed;
    j["total_attacks"] = report.total_attacks;
    j["stop_reason"] = stop_reason_name(report.stop_reason);
    j["causal_attribution"] = report.causal_attribution;
    j["config_echo"] = report.config_echo;
    j["seed"] = report.seed;
    return j;
}

inline TrialReport report_from_json(const nlohmann::json& j) {
    TrialReport report;
    auto method = method_from_name(j.at("method").get<std::string>());
    if (!method) throw ReportError("unknown method in report");
    report.method = *method;
    for (const auto& s : j.at("stages")) {
        StageReport stage;
        stage.stage_index = s.at("stage_index").get<int>();
        stage.plan = plan_from_json(s.at("plan"));
        for (const auto& e : s.at("event_counts")) {
            auto arm = arm_from_name(e.at("arm").get<std::string>());
            if (!arm) throw ReportError("unknown arm in event counts");
            stage.event_counts[{e.at("region").get<std::string>(), *arm}] =
                e.at("events").get<int>();
        }
        if (!s.at("risk_rates").is_null()) stage.risk_rates = rates_from_json(s.at("risk_rates"));
        if (!s.at("recomputed_n_total").is_null())
            stage.recomputed_n_total = s.at("recomputed_n_total").get<int>();
        auto verdict = stop_reason_from_name(s.at("endpoint_verdict").get<std::string>());
        if (!verdict) throw ReportError("unknown endpoint verdict");
        stage.endpoint_verdict = *verdict;
        report.stages.push_back(std::move(stage));
    }
    report.total_control = j.at("total_control").get<int>();
    report.total_corrupted = j.at("total_corrupted").get<int>();
    report.total_deployed = j.at("total_deployed").get<int>();
    report.total_attacks = j.at("total_attacks").get<int>();
    auto reason = stop_reason_from_name(j.at("stop_reason").get<std::string>());
    if (!reason) throw ReportError("unknown stop reason");
    report.stop_reason = *reason;
    report.causal_attribution = j.at("causal_attribution").get<bool>();
    report.config_echo = j.at("config_echo").get<std::string>();
    report.seed = j.at("seed").get<std::uint64_t>();
    return report;
}

inline void write_report(const TrialReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw StorageError("cannot open " + path);
    out << report_to_json(report).dump(2) << "\n";
    if (!out) throw StorageError("report write failed");
}

// Loads a persisted report and checks the totals-equal-sum invariant.
inline TrialReport load_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw StorageError("cannot open report " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ReportError(std::string("corrupt report: ") + e.what());
    }
    TrialReport report = report_from_json(j);

    int control = 0, corrupted = 0, attacks = 0;
    for (const auto& stage : report.stages) {
        control += stage.plan.arm_total(Arm::control);
        corrupted += stage.plan.arm_total(Arm::corrupted);
        for (const auto& [cell, n] : stage.event_counts) attacks += n;
    }
    if (control != report.total_control || corrupted != report.total_corrupted ||
        control + corrupted != report.total_deployed || attacks != report.total_attacks)
        throw ReportError("corrupt report: totals do not equal the per-stage sums");
    return report;
}

// ---- text tables -------------------------------------------------------

// Region order for table columns: the config echo's region list when it
// parses, otherwise the first stage plan's cell order.
inline std::vector<std::string> report_regions(const TrialReport& report) {
    if (!report.config_echo.empty()) {
        auto j = nlohmann::json::parse(report.config_echo, nullptr, false);
        if (!j.is_discarded() && j.contains("study") && j["study"].contains("regions"))
            return j["study"]["regions"].get<std::vector<std::string>>();
    }
    std::vector<std::string> regions;
    if (report.stages.empty()) return regions;
    for (const auto& [cell, count] : report.stages.front().plan.counts)
        if (std::find(regions.begin(), regions.end(), cell.region) == regions.end())
            regions.push_back(cell.region);
    return regions;
}

// Per-stage deployment table: one row per stage, control and corrupted
// counts by region, then the stage total.
inline std::string render_stage_table(const TrialReport& report) {
    const auto regions = report_regions(report);
    std::ostringstream out;
    const auto join = [&](const char* sep) {
        std::string s;
        for (std::size_t i = 0; i < regions.size(); ++i) {
            if (i) s += sep;
            s += regions[i];
        }
        return s;
    };
    out << "Method: " << method_name(report.method) << "\n";
    out << "Stage | Control " << join(" ") << " | Corrupted " << join(" ") << " | Total\n";
    for (const auto& stage : report.stages) {
        out << "Stage " << stage.stage_index + 1 << " |";
        for (Arm arm : {Arm::control, Arm::corrupted}) {
            for (const auto& region : regions) {
                auto it = stage.plan.counts.find({region, arm});
                out << ' ' << (it == stage.plan.counts.end() ? 0 : it->second);
            }
            out << " |";
        }
        out << ' ' << stage.plan.n_total << "\n";
    }
    return out.str();
}

// One-row trial summary: control, corrupted, total deployed, total attacks.
inline std::string render_summary(const TrialReport& report) {
    std::ostringstream out;
    out << "Method | Control | Corrupted | Total Deployed | Total Attacks\n";
    out << method_name(report.method) << " | " << report.total_control << " | "
        << report.total_corrupted << " | " << report.total_deployed << " | "
        << report.total_attacks << "\n";
    return out.str();
}

}  // namespace adtrial
