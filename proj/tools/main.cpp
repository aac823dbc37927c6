// adtrial: deterministic trial orchestration for honeypot fleet studies.
// Subcommands: validate, run, report.

#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "adtrial/config.hpp"
#include "adtrial/persistence.hpp"
#include "adtrial/trial_engine.hpp"

namespace {

constexpr int kExitParse = 2;
constexpr int kExitInvariant = 3;
constexpr int kExitRuntime = 4;
constexpr int kExitIo = 5;

nlohmann::json load_doc(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw adtrial::StorageError("cannot open config " + path);
    nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw adtrial::ParseError("config is not valid JSON: " + path);
    return doc;
}

void print_plan(const adtrial::AllocationPlan& plan, const std::vector<std::string>& regions) {
    for (adtrial::Arm arm : {adtrial::Arm::control, adtrial::Arm::corrupted}) {
        std::cout << "  " << adtrial::arm_name(arm) << ":";
        for (const auto& region : regions) {
            auto it = plan.counts.find({region, arm});
            std::cout << ' ' << region << '=' << (it == plan.counts.end() ? 0 : it->second);
        }
        std::cout << "\n";
    }
}

int cmd_validate(const std::string& config_path) {
    const auto config = adtrial::parse_config(load_doc(config_path));
    const auto& study = config.study;
    std::cout << "config OK: method=" << adtrial::method_name(study.method)
              << " stages=" << study.n_stages << " regions=" << study.regions.size() << "\n";
    if (study.method == adtrial::Method::vanilla) {
        const int n = adtrial::get_num_to_deploy(study);
        adtrial::AllocationPlan plan;
        plan.n_total = n;
        const auto counts = adtrial::split_arm_across_regions(n, study.regions.size());
        for (std::size_t i = 0; i < study.regions.size(); ++i)
            plan.counts[{study.regions[i], adtrial::Arm::corrupted}] = counts[i];
        std::cout << "N=" << n << "\n";
        print_plan(plan, study.regions);
    } else {
        const int n_total =
            adtrial::power_sample_size(study.initial_incidence, study.error_rates);
        std::cout << "N_total=" << n_total << "\n";
        print_plan(adtrial::equal_split(n_total, study.regions), study.regions);
    }
    return 0;
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            std::optional<std::string> method, std::optional<std::string> out_dir) {
    nlohmann::json doc = load_doc(config_path);
    // overrides are folded into the document so the echoed config matches
    // what actually ran
    if (seed) {
        doc["study"]["rng_seed"] = *seed;
        if (doc.contains("environment") && doc["environment"].contains("hazard"))
            doc["environment"]["hazard"].erase("seed");
    }
    if (method) doc["study"]["method"] = *method;
    const auto config = adtrial::parse_config(doc);

    auto driver = adtrial::make_driver(config);
    auto result = adtrial::run_trial(config.study, *driver);
    result.report.config_echo = config.echo;

    const std::string dir = out_dir ? *out_dir : config.output_dir.value_or("out");
    std::filesystem::create_directories(dir);
    {
        std::ofstream events(dir + "/events.jsonl", std::ios::trunc);
        if (!events) throw adtrial::StorageError("cannot open " + dir + "/events.jsonl");
        adtrial::append_events(result.records, events);
    }
    adtrial::write_report(result.report, dir + "/report.json");
    const adtrial::Millis window = config.study.method == adtrial::Method::vanilla
                                       ? config.study.stage_duration * config.study.n_stages
                                       : config.study.stage_duration;
    adtrial::export_survival_curves(result.stage_curves, window, dir + "/curves.csv");
    {
        std::ofstream table(dir + "/stage_table.txt", std::ios::trunc);
        table << adtrial::render_stage_table(result.report);
        std::ofstream summary(dir + "/summary.txt", std::ios::trunc);
        summary << adtrial::render_summary(result.report);
        if (!table || !summary) throw adtrial::StorageError("cannot write tables in " + dir);
    }

    std::cout << "stop_reason: " << adtrial::stop_reason_name(result.report.stop_reason) << "\n";
    std::cout << adtrial::render_summary(result.report);
    std::cout << "artifacts: " << dir << "\n";
    return 0;
}

int cmd_report(const std::string& dir) {
    const auto report = adtrial::load_report(dir + "/report.json");
    std::cout << adtrial::render_stage_table(report);
    std::cout << adtrial::render_summary(report);
    std::cout << "stop_reason: " << adtrial::stop_reason_name(report.stop_reason) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deterministic honeypot-fleet trial orchestrator"};
    app.require_subcommand(1);

    std::string config_path;
    std::string report_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> method;
    std::optional<std::string> out_dir;

    auto* validate = app.add_subcommand("validate", "Check a study config and print the stage-1 plan");
    validate->add_option("--config", config_path, "Study config file")->required();

    auto* run = app.add_subcommand("run", "Execute the configured trial and write artifacts");
    run->add_option("--config", config_path, "Study config file")->required();
    run->add_option("--seed", seed, "Override the study RNG seed");
    run->add_option("--method", method, "Override the study method (vanilla|rct|adaptive)")
        ->check(CLI::IsMember({"vanilla", "rct", "adaptive"}));
    run->add_option("--out", out_dir, "Output directory (overrides config output.dir)");

    auto* report = app.add_subcommand("report", "Re-render tables from a completed run directory");
    report->add_option("--out", report_dir, "Run directory containing report.json")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) return cmd_validate(config_path);
        if (run->parsed()) return cmd_run(config_path, seed, method, out_dir);
        return cmd_report(report_dir);
    } catch (const adtrial::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitParse;
    } catch (const adtrial::ConfigError& e) {
        std::cerr << "invariant violation: " << e.what() << "\n";
        return kExitInvariant;
    } catch (const adtrial::StorageError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const adtrial::TrialError& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
