#ifndef ASIA_SCENARIO_SCENARIO_HPP
#define ASIA_SCENARIO_SCENARIO_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "asia/gateway/agent.hpp"
#include "asia/netsim/monitor.hpp"

namespace asia::scenario {

struct ParseError : std::runtime_error {
    ParseError(const std::string& file, size_t line, const std::string& what)
        : std::runtime_error(file + ":" + std::to_string(line) + ": " + what) {}
};

struct ActorSpec {
    std::string id;
    RoleKind role = RoleKind::EndUser;
    std::string node;
    uint16_t callback_port = 6000;
};

struct GatewaySpec {
    std::string id;
    std::string node;
    PolicyMode policy = PolicyMode::Centralized;
    bool keepalives = true;
    uint16_t direct_port = 5000;
    std::string local_acl_path;  // relative to the scenario file
    bool substitute = false;     // provision a second credential slot
};

struct ApplianceSpec {
    std::string gateway;  // gateway id; replication is expanded at parse time
    Appliance appliance;
};

struct WorkloadItem {
    SimTime at = 0;
    std::vector<std::string> args;
    size_t line = 0;
};

struct Expectation {
    enum class Kind { Count, Exists, Absent, Alerts, Fanout };
    Kind kind = Kind::Exists;
    std::vector<std::pair<std::string, std::string>> match;  // field=value conjuncts
    uint64_t min = 0;
    uint64_t max = UINT64_MAX;
    std::string raw;  // original line, for the report
};

struct Scenario {
    std::string name;
    std::string description;
    uint64_t seed = 1;
    std::string dir;  // directory of the scenario file; referenced paths are relative
    std::string topology_path;
    std::string acl_path;
    std::string fault_path;
    std::map<std::string, std::string> options;
    std::vector<ActorSpec> actors;
    std::vector<GatewaySpec> gateways;  // replication handled at parse time
    std::vector<ApplianceSpec> appliances;
    std::vector<WorkloadItem> workload;
    std::vector<Expectation> expectations;

    static Scenario parse(const std::string& text, const std::string& dir,
                          const std::string& file);
    static Scenario load_file(const std::string& path);
    SimTime run_until() const;
};

struct MetricsReport {
    std::string scenario;
    uint64_t seed = 0;
    size_t events = 0;
    std::string digest_hex;
    uint64_t packets_sent = 0;
    uint64_t packets_delivered = 0;
    std::map<std::string, uint64_t> sessions_by_mode;  // requestor-side opens
    uint64_t failures = 0;                             // failed session/command outcomes
    std::map<std::string, uint64_t> drops;
    std::optional<std::pair<SimTime, SimTime>> fanout;  // start, last result
    bool monitored = false;
    uint64_t alert_count = 0;
    std::vector<std::string> alert_lines;
    size_t expect_pass = 0;
    size_t expect_fail = 0;
    std::vector<std::string> expect_lines;  // "PASS ..." / "FAIL ..."
    bool self_audit_ok = false;

    bool pass() const { return expect_fail == 0 && self_audit_ok; }
    std::string text() const;  // versioned, line-oriented
};

struct RunResult {
    bool pass = false;
    MetricsReport report;
    std::string log_text;
};

RunResult run_scenario(const Scenario& sc, std::optional<uint64_t> seed_override = std::nullopt,
                       bool quiet = true);

// Bundled-scenario registry: every *.scenario file in dir.
std::vector<std::string> list_scenarios(const std::string& dir);
Scenario load_by_name(const std::string& dir, const std::string& name);  // UnknownScenario
std::string describe_scenario(const std::string& dir, const std::string& name);

}  // namespace asia::scenario

#endif
