// Acceptance gate: one pass/fail line per criterion, non-zero exit on any
// failure. Takes the bundled-scenario directory as its only argument.
#include <chrono>
#include <iostream>
#include <map>

#include "asia/auth/token.hpp"
#include "asia/scenario/scenario.hpp"

using namespace asia;
using Clock = std::chrono::steady_clock;

namespace {

std::string g_dir;
std::map<std::string, scenario::RunResult> g_cache;
double g_last_wall_s = 0;

const scenario::RunResult& run(const std::string& name, bool fresh = false) {
    static scenario::RunResult scratch;
    auto t0 = Clock::now();
    if (fresh) {
        scratch = scenario::run_scenario(scenario::load_by_name(g_dir, name));
        g_last_wall_s = std::chrono::duration<double>(Clock::now() - t0).count();
        return scratch;
    }
    auto it = g_cache.find(name);
    if (it == g_cache.end()) {
        it = g_cache.emplace(name, scenario::run_scenario(scenario::load_by_name(g_dir, name)))
                 .first;
        g_last_wall_s = std::chrono::duration<double>(Clock::now() - t0).count();
    }
    return it->second;
}

struct Criterion {
    const char* id;
    const char* title;
    bool (*check)(std::string& detail);
};

bool scenario_passes(const std::string& name, std::string& detail) {
    const auto& r = run(name);
    if (!r.pass) {
        detail = name + " failed:";
        for (const auto& l : r.report.expect_lines)
            if (l.rfind("FAIL", 0) == 0) detail += " [" + l + "]";
        if (!r.report.self_audit_ok) detail += " [self-audit]";
        return false;
    }
    return true;
}

bool a1(std::string& detail) {
    auto t0 = Clock::now();
    if (!scenario_passes("modes_nat", detail)) return false;
    if (!scenario_passes("modes_public", detail)) return false;
    double wall = std::chrono::duration<double>(Clock::now() - t0).count();
    if (wall >= 5.0) {
        detail = "took " + std::to_string(wall) + " s (limit 5)";
        return false;
    }
    return true;
}

bool a2(std::string& detail) { return scenario_passes("keepalive_binding", detail); }

bool a3(std::string& detail) { return scenario_passes("tan_misuse", detail); }

bool a4(std::string& detail) {
    if (!scenario_passes("tamper_proxy", detail)) return false;
    // Fault-free counterpart: nothing dropped anywhere, nothing failed.
    const auto& clean = run("modes_public");
    if (!clean.report.drops.empty() || clean.report.failures != 0) {
        detail = "clean run had drops or failures";
        return false;
    }
    if (clean.report.packets_sent != clean.report.packets_delivered) {
        detail = "clean run lost packets";
        return false;
    }
    return true;
}

bool a5(std::string& detail) { return scenario_passes("acl_matrix", detail); }

bool a6(std::string& detail) {
    if (!scenario_passes("fanout_1000", detail)) return false;
    if (g_last_wall_s >= 60.0) {
        detail = "took " + std::to_string(g_last_wall_s) + " s wall (limit 60)";
        return false;
    }
    return true;
}

bool a7(std::string& detail) { return scenario_passes("rebind_24h", detail); }

bool a8(std::string& detail) {
    for (const char* name : {"modes_nat", "modes_public", "tan_misuse"}) {
        const auto& first = run(name);
        std::string digest = first.report.digest_hex;
        const auto& second = run(name, /*fresh=*/true);
        if (second.report.digest_hex != digest || second.log_text != first.log_text) {
            detail = std::string(name) + " diverged across identical runs";
            return false;
        }
    }
    return true;
}

bool a9(std::string& detail) {
    // Exhaustive per-field token mutation must break verification.
    netsim::SimNet sim(1234);
    auth::CertificateAuthority ca("ca", sim.rng());
    auth::TrustAnchors trust;
    auto issuer_cred = ca.issue({"asia", RoleKind::GatewayOperator});
    trust.issuers["asia"] = issuer_cred.cert.public_key;

    auth::TokenRequest req;
    req.requestor = {"alice", RoleKind::EndUser};
    req.requestor_fingerprint.fill(0x11);
    req.gateway = {"gw1", RoleKind::IctGateway};
    req.gateway_fingerprint.fill(0x22);
    req.mode = Mode::Invocation;
    req.permissions = PermissionSet{Permission::GetStatus};
    req.tan = auth::generate_tan(sim.rng());
    auto token = auth::issue_token({"asia", RoleKind::GatewayOperator},
                                   issuer_cred.private_key, req, 1000);
    if (auth::verify_token(token, trust, "gw1", 2000) != auth::TokenStatus::Valid) {
        detail = "baseline token did not verify";
        return false;
    }

    using Mutate = void (*)(auth::SoftwareToken&);
    struct Case {
        const char* field;
        Mutate fn;
    };
    const Case cases[] = {
        {"issuer", [](auth::SoftwareToken& t) { t.issuer.id = "asib"; }},
        {"requestor", [](auth::SoftwareToken& t) { t.requestor.id = "mallory"; }},
        {"requestor_fingerprint", [](auth::SoftwareToken& t) { t.requestor_fingerprint[0] ^= 1; }},
        {"gateway", [](auth::SoftwareToken& t) { t.gateway.id = "gw2"; }},
        {"gateway_fingerprint", [](auth::SoftwareToken& t) { t.gateway_fingerprint[0] ^= 1; }},
        {"tan", [](auth::SoftwareToken& t) { t.tan.value[0] ^= 1; }},
        {"mode", [](auth::SoftwareToken& t) { t.mode = Mode::Proxy; }},
        {"permissions",
         [](auth::SoftwareToken& t) { t.permissions = PermissionSet{Permission::IssueCommand}; }},
        {"issued_at", [](auth::SoftwareToken& t) { t.issued_at += 1; }},
        {"expires_at", [](auth::SoftwareToken& t) { t.expires_at += 1; }},
        {"signature", [](auth::SoftwareToken& t) { t.signature[0] ^= 1; }},
    };
    for (const auto& c : cases) {
        auth::SoftwareToken mutated = token;
        c.fn(mutated);
        if (auth::verify_token(mutated, trust, "gw1", 2000) == auth::TokenStatus::Valid) {
            detail = std::string("mutated field '") + c.field + "' still verified";
            return false;
        }
    }
    if (!scenario_passes("credential_swap", detail)) return false;
    return scenario_passes("integrity_fail", detail);
}

bool a10(std::string& detail) {
    if (!scenario_passes("rogue_flow_monitor", detail)) return false;
    const auto& r = run("rogue_flow_monitor");
    if (r.report.alert_count != 1) {
        detail = "expected exactly 1 alert, saw " + std::to_string(r.report.alert_count);
        return false;
    }
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: acceptance <scenario-dir>\n";
        return 2;
    }
    g_dir = argv[1];

    const Criterion criteria[] = {
        {"A1", "mode comparison under NAT and in the clear", a1},
        {"A2", "keepalives hold NAT bindings; silence expires them", a2},
        {"A3", "TAN correlation: accept, corrupt, replay", a3},
        {"A4", "end-to-end integrity through the proxy relay", a4},
        {"A5", "authorization matrix across permissions and modes", a5},
        {"A6", "shutoff fan-out to 1000 gateways", a6},
        {"A7", "address rebind recovery", a7},
        {"A8", "seeded determinism of event logs", a8},
        {"A9", "token and credential binding properties", a9},
        {"A10", "allowed-flow monitor flags only the rogue session", a10},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        std::string detail;
        bool ok = false;
        try {
            ok = c.check(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        if (ok) {
            std::cout << c.id << " pass - " << c.title << "\n";
        } else {
            ++failures;
            std::cout << c.id << " FAIL - " << c.title << " (" << detail << ")\n";
        }
    }
    return failures == 0 ? 0 : 1;
}
