// asia_sim: run, list, and describe the bundled desk-scale scenarios.
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "asia/scenario/scenario.hpp"

namespace {

int cmd_list(const std::string& dir) {
    for (const auto& name : asia::scenario::list_scenarios(dir)) std::cout << name << "\n";
    return 0;
}

int cmd_describe(const std::string& dir, const std::string& name) {
    std::cout << asia::scenario::describe_scenario(dir, name);
    return 0;
}

int cmd_run(const std::string& dir, const std::string& name, std::optional<uint64_t> seed,
            const std::string& log_path, const std::string& report_path, bool quiet) {
    asia::scenario::Scenario sc = name.find('/') != std::string::npos
                                      ? asia::scenario::Scenario::load_file(name)
                                      : asia::scenario::load_by_name(dir, name);
    auto res = asia::scenario::run_scenario(sc, seed);
    if (!log_path.empty()) {
        std::ofstream f(log_path, std::ios::binary);
        f << res.log_text;
    }
    std::string report = res.report.text();
    if (!report_path.empty()) {
        std::ofstream f(report_path, std::ios::binary);
        f << report;
    }
    if (!quiet) std::cout << report;
    std::cout << sc.name << " " << (res.pass ? "pass" : "FAIL") << "\n";
    return res.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ASIA gateway testbed"};
    app.require_subcommand(1);

    std::string dir = ASIA_DEFAULT_SCENARIO_DIR;
    app.add_option("--scenario-dir", dir, "directory holding *.scenario files");

    auto* list = app.add_subcommand("list", "list bundled scenarios");

    std::string name;
    auto* describe = app.add_subcommand("describe", "describe a scenario");
    describe->add_option("name", name, "scenario name")->required();

    auto* run = app.add_subcommand("run", "run a scenario and print its report");
    std::string run_name, log_path, report_path;
    std::optional<uint64_t> seed;
    bool quiet = false;
    run->add_option("--scenario", run_name, "scenario name or path to a .scenario file")
        ->required();
    run->add_option("--seed", seed, "override the scenario seed");
    run->add_option("--log", log_path, "write the event log to this file");
    run->add_option("--report", report_path, "write the metrics report to this file");
    run->add_flag("--quiet", quiet, "suppress the report on stdout");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*list) return cmd_list(dir);
        if (*describe) return cmd_describe(dir, name);
        return cmd_run(dir, run_name, seed, log_path, report_path, quiet);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
