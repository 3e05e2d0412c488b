#include "asia/scenario/scenario.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "asia/broker/broker.hpp"
#include "asia/client/requestor.hpp"
#include "asia/netsim/topology.hpp"

namespace asia::scenario {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
    std::istringstream is(line);
    std::vector<std::string> out;
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

uint64_t parse_u64(const std::string& s, const std::string& file, size_t line) {
    try {
        size_t pos = 0;
        uint64_t v = std::stoull(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError(file, line, "bad number '" + s + "'");
    }
}

// key=value option on a declaration line; returns false if not key=...
bool split_kv(const std::string& tok, std::string& key, std::string& value) {
    auto eq = tok.find('=');
    if (eq == std::string::npos) return false;
    key = tok.substr(0, eq);
    value = tok.substr(eq + 1);
    return true;
}

Appliance parse_appliance(const std::vector<std::string>& toks, size_t first,
                          const std::string& id, const std::string& file, size_t line) {
    Appliance ap;
    ap.appliance_id = id;
    if (first >= toks.size()) throw ParseError(file, line, "appliance needs a class");
    auto klass = appliance_class_from_name(toks[first]);
    if (!klass) throw ParseError(file, line, "unknown appliance class '" + toks[first] + "'");
    ap.klass = *klass;
    for (size_t i = first + 1; i < toks.size(); ++i) {
        std::string k, v;
        if (toks[i] == "running") {
            ap.running = true;
        } else if (toks[i] == "generating") {
            ap.generating = true;
        } else if (split_kv(toks[i], k, v)) {
            auto money = Money::parse(v);
            if (!money) throw ParseError(file, line, "bad amount '" + v + "'");
            if (k == "load") {
                ap.load_kw = *money;
            } else if (k == "threshold") {
                ap.price_threshold = *money;
            } else {
                throw ParseError(file, line, "unknown appliance option '" + k + "'");
            }
        } else {
            throw ParseError(file, line, "unknown appliance option '" + toks[i] + "'");
        }
    }
    return ap;
}

GatewaySpec parse_gateway_options(GatewaySpec g, const std::vector<std::string>& toks,
                                  size_t first, const std::string& file, size_t line) {
    for (size_t i = first; i < toks.size(); ++i) {
        std::string k, v;
        if (!split_kv(toks[i], k, v))
            throw ParseError(file, line, "expected key=value, got '" + toks[i] + "'");
        if (k == "policy") {
            auto p = policy_mode_from_name(v);
            if (!p) throw ParseError(file, line, "unknown policy '" + v + "'");
            g.policy = *p;
        } else if (k == "keepalives") {
            g.keepalives = (v == "on");
        } else if (k == "port") {
            g.direct_port = static_cast<uint16_t>(parse_u64(v, file, line));
        } else if (k == "acl") {
            g.local_acl_path = v;
        } else if (k == "substitute") {
            g.substitute = (v == "on");
        } else {
            throw ParseError(file, line, "unknown gateway option '" + k + "'");
        }
    }
    return g;
}

Expectation parse_expect(const std::vector<std::string>& toks, const std::string& raw,
                         const std::string& file, size_t line) {
    Expectation e;
    e.raw = raw;
    if (toks.size() < 2) throw ParseError(file, line, "empty expectation");
    const std::string& kind = toks[1];
    size_t i = 2;
    auto parse_bound = [&]() {
        if (i + 1 >= toks.size())
            throw ParseError(file, line, "expectation needs '<op> <n>' at the end");
        const std::string& op = toks[i];
        uint64_t n = parse_u64(toks[i + 1], file, line);
        if (op == "==") {
            e.min = e.max = n;
        } else if (op == ">=") {
            e.min = n;
        } else if (op == "<=") {
            e.max = n;
        } else {
            throw ParseError(file, line, "unknown comparison '" + op + "'");
        }
        i += 2;
    };
    if (kind == "count" || kind == "exists" || kind == "absent") {
        e.kind = kind == "count" ? Expectation::Kind::Count
                 : kind == "exists" ? Expectation::Kind::Exists
                                    : Expectation::Kind::Absent;
        while (i < toks.size() && toks[i].find('=') != std::string::npos &&
               toks[i] != "==" && toks[i] != ">=" && toks[i] != "<=") {
            std::string k, v;
            split_kv(toks[i], k, v);
            e.match.emplace_back(k, v);
            ++i;
        }
        if (e.match.empty()) throw ParseError(file, line, "expectation needs field matches");
        if (e.kind == Expectation::Kind::Count) {
            parse_bound();
        } else if (e.kind == Expectation::Kind::Exists) {
            e.min = 1;
        } else {
            e.max = 0;
        }
    } else if (kind == "alerts") {
        e.kind = Expectation::Kind::Alerts;
        parse_bound();
    } else if (kind == "fanout") {
        e.kind = Expectation::Kind::Fanout;
        if (i >= toks.size()) throw ParseError(file, line, "fanout expectation needs a label");
        e.match.emplace_back("label", toks[i++]);
        parse_bound();
    } else {
        throw ParseError(file, line, "unknown expectation kind '" + kind + "'");
    }
    if (i != toks.size()) throw ParseError(file, line, "trailing tokens in expectation");
    return e;
}

}  // namespace

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

Scenario Scenario::parse(const std::string& text, const std::string& dir,
                         const std::string& file) {
    Scenario sc;
    sc.dir = dir;
    std::istringstream is(text);
    std::string line;
    size_t ln = 0;
    while (std::getline(is, line)) {
        ++ln;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        auto toks = split_ws(line);
        if (toks.empty()) continue;
        const std::string& head = toks[0];
        auto need = [&](size_t n) {
            if (toks.size() < n)
                throw ParseError(file, ln, "'" + head + "' needs more arguments");
        };
        if (head == "name") {
            need(2);
            sc.name = toks[1];
        } else if (head == "description") {
            auto pos = line.find("description");
            sc.description = line.substr(pos + 12);
        } else if (head == "seed") {
            need(2);
            sc.seed = parse_u64(toks[1], file, ln);
        } else if (head == "topology") {
            need(2);
            sc.topology_path = toks[1];
        } else if (head == "acl") {
            need(2);
            sc.acl_path = toks[1];
        } else if (head == "faults") {
            need(2);
            sc.fault_path = toks[1];
        } else if (head == "option") {
            need(3);
            sc.options[toks[1]] = toks[2];
        } else if (head == "actor") {
            need(4);
            ActorSpec a;
            a.id = toks[1];
            auto role = role_from_name(toks[2]);
            if (!role) throw ParseError(file, ln, "unknown role '" + toks[2] + "'");
            a.role = *role;
            a.node = toks[3];
            if (toks.size() > 4)
                a.callback_port = static_cast<uint16_t>(parse_u64(toks[4], file, ln));
            sc.actors.push_back(std::move(a));
        } else if (head == "gateway") {
            need(3);
            GatewaySpec g;
            g.id = toks[1];
            g.node = toks[2];
            sc.gateways.push_back(parse_gateway_options(std::move(g), toks, 3, file, ln));
        } else if (head == "gateways") {
            // gateways <id-prefix> <count> <node-prefix> [key=value...]
            need(4);
            size_t count = parse_u64(toks[2], file, ln);
            GatewaySpec proto;
            proto = parse_gateway_options(std::move(proto), toks, 4, file, ln);
            for (size_t i = 1; i <= count; ++i) {
                GatewaySpec g = proto;
                g.id = toks[1] + std::to_string(i);
                g.node = toks[3] + std::to_string(i);
                sc.gateways.push_back(std::move(g));
            }
        } else if (head == "appliance") {
            // appliance <gateway> <id> <class> [running] [generating] [load=..] [threshold=..]
            need(4);
            sc.appliances.push_back({toks[1], parse_appliance(toks, 3, toks[2], file, ln)});
        } else if (head == "appliances") {
            // appliances <gw-prefix> <count> <id-prefix> <class> [...]
            need(5);
            size_t count = parse_u64(toks[2], file, ln);
            Appliance proto = parse_appliance(toks, 4, toks[3], file, ln);
            for (size_t i = 1; i <= count; ++i) {
                Appliance ap = proto;
                ap.appliance_id = toks[3] + std::to_string(i);
                sc.appliances.push_back({toks[1] + std::to_string(i), std::move(ap)});
            }
        } else if (head == "at") {
            need(3);
            WorkloadItem w;
            w.at = parse_u64(toks[1], file, ln);
            w.args.assign(toks.begin() + 2, toks.end());
            w.line = ln;
            sc.workload.push_back(std::move(w));
        } else if (head == "expect") {
            sc.expectations.push_back(parse_expect(toks, line, file, ln));
        } else {
            throw ParseError(file, ln, "unknown directive '" + head + "'");
        }
    }
    if (sc.name.empty()) throw ParseError(file, 0, "scenario has no name");
    if (sc.topology_path.empty()) throw ParseError(file, 0, "scenario has no topology");
    std::stable_sort(sc.workload.begin(), sc.workload.end(),
                     [](const WorkloadItem& a, const WorkloadItem& b) { return a.at < b.at; });
    return sc;
}

Scenario Scenario::load_file(const std::string& path) {
    auto dir = std::filesystem::path(path).parent_path().string();
    if (dir.empty()) dir = ".";
    return parse(read_file(path), dir, path);
}

SimTime Scenario::run_until() const {
    auto it = options.find("run_until");
    if (it != options.end()) return std::stoull(it->second);
    SimTime last = 0;
    for (const auto& w : workload) last = std::max(last, w.at);
    return last + 60'000;
}

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

namespace {

struct Runner {
    const Scenario& sc;
    uint64_t seed;
    netsim::SimNet sim;
    auth::TrustAnchors trust;
    std::unique_ptr<auth::CertificateAuthority> ca;
    std::unique_ptr<Broker> broker;
    std::map<std::string, std::unique_ptr<GatewayAgent>> gateways;
    std::map<std::string, std::unique_ptr<RequestorClient>> actors;
    std::map<std::string, std::string> gateway_node;  // id -> sim node

    // label -> open session (actor, id) from a completed `session` action.
    std::map<std::string, std::pair<std::string, RequestorClient::SessionId>> open_sessions;
    // session id -> label, per actor, for embedded-command outcomes.
    std::map<std::string, std::map<RequestorClient::SessionId, std::string>> session_labels;
    std::map<std::string, RequestorClient::RedirectGrant> redirect_grants;
    std::vector<FlowExportBody> exports;

    Runner(const Scenario& s, uint64_t seed_) : sc(s), seed(seed_), sim(seed_) {}

    std::string path(const std::string& rel) const { return sc.dir + "/" + rel; }

    void harness_log(const std::string& event, netsim::LogFields fields) {
        fields.insert(fields.begin(), {"actor", "harness"});
        sim.log().append(sim.now(), event, std::move(fields));
    }

    [[noreturn]] void bad(const WorkloadItem& w, const std::string& what) {
        throw ParseError(sc.name + " workload", w.line, what);
    }

    void build() {
        netsim::Topology::load_file(path(sc.topology_path)).build(sim);
        ca = std::make_unique<auth::CertificateAuthority>("asia-ca", sim.rng());
        trust.issuers[ca->name()] = ca->public_key();

        Broker::Config bc;
        auto broker_cred = ca->issue(bc.identity);
        bc.credential = Credential::from_cert(broker_cred.cert, broker_cred.private_key);
        // Software tokens are verified against the broker's own issuer key.
        trust.issuers[bc.identity.id] = broker_cred.cert.public_key;
        bc.trust = trust;
        if (!sc.acl_path.empty())
            bc.acl = auth::AclTable::load_file(path(sc.acl_path));
        broker = std::make_unique<Broker>(sim, "broker", std::move(bc));
        for (const auto& a : sc.actors) broker->learn_role(a.id, a.role);
        for (const auto& g : sc.gateways) broker->learn_role(g.id, RoleKind::IctGateway);
        broker->start();

        for (const auto& gs : sc.gateways) {
            GatewayAgent::Config gc;
            gc.identity = {gs.id, RoleKind::IctGateway};
            auto cred = ca->issue(gc.identity);
            gc.credentials["default"] = Credential::from_cert(cred.cert, cred.private_key);
            if (gs.substitute) {
                auto sub = ca->issue(gc.identity);
                gc.credentials["substitute"] =
                    Credential::from_cert(sub.cert, sub.private_key);
            }
            gc.trust = trust;
            gc.policy = gs.policy;
            gc.keepalives_enabled = gs.keepalives;
            gc.direct_port = gs.direct_port;
            if (!gs.local_acl_path.empty())
                gc.local_acl = auth::AclTable::load_file(path(gs.local_acl_path));
            for (const auto& as : sc.appliances)
                if (as.gateway == gs.id) gc.appliances.push_back(as.appliance);
            gateway_node[gs.id] = gs.node;
            auto agent = std::make_unique<GatewayAgent>(sim, gs.node, std::move(gc));
            agent->start();
            gateways[gs.id] = std::move(agent);
        }

        for (const auto& as : sc.actors) {
            RequestorClient::Config rc;
            rc.identity = {as.id, as.role};
            auto cred = ca->issue(rc.identity);
            rc.credential = Credential::from_cert(cred.cert, cred.private_key);
            rc.trust = trust;
            rc.callback_port = as.callback_port;
            auto client = std::make_unique<RequestorClient>(sim, as.node, std::move(rc));
            std::string id = as.id;
            client->on_embedded_outcome = [this, id](RequestorClient::SessionId sid,
                                                     const RequestorClient::CommandOutcome& out) {
                auto& labels = session_labels[id];
                auto it = labels.find(sid);
                log_command_outcome(it == labels.end() ? "?" : it->second, id, out);
            };
            client->start();
            actors[as.id] = std::move(client);
        }

        if (!sc.fault_path.empty())
            sim.load_fault_script(netsim::load_fault_script_file(path(sc.fault_path)));

        for (const auto& w : sc.workload)
            sim.schedule(w.at, [this, &w] { run_item(w); });
    }

    Command parse_command(const WorkloadItem& w, size_t& i) {
        if (i >= w.args.size()) bad(w, "missing command");
        const std::string& kind = w.args[i++];
        Command cmd;
        cmd.issued_at = sim.now();
        if (kind == "shutoff") {
            if (i + 1 >= w.args.size()) bad(w, "shutoff needs <class> <kwh>");
            cmd.kind = CommandKind::ShutoffAppliance;
            auto klass = appliance_class_from_name(w.args[i++]);
            auto kwh = Money::parse(w.args[i++]);
            if (!klass || !kwh) bad(w, "bad shutoff arguments");
            cmd.shutoff = ShutoffPayload{*klass, *kwh};
        } else if (kind == "shutoffgen") {
            cmd.kind = CommandKind::ShutoffGenerator;
        } else if (kind == "price") {
            if (i >= w.args.size()) bad(w, "price needs <eur>");
            cmd.kind = CommandKind::PriceSignal;
            auto eur = Money::parse(w.args[i++]);
            if (!eur) bad(w, "bad price");
            cmd.price = PriceSignalPayload{*eur, sim.now(), sim.now() + 3'600'000};
        } else if (kind == "status") {
            cmd.kind = CommandKind::StatusQuery;
        } else if (kind == "config") {
            if (i + 1 >= w.args.size()) bad(w, "config needs <key> <value>");
            cmd.kind = CommandKind::ConfigChange;
            cmd.config = ConfigChangePayload{w.args[i], w.args[i + 1]};
            i += 2;
        } else if (kind == "install") {
            if (i >= w.args.size()) bad(w, "install needs <manifest>");
            cmd.kind = CommandKind::InstallApp;
            cmd.install = InstallAppPayload{w.args[i++]};
        } else {
            bad(w, "unknown command '" + kind + "'");
        }
        return cmd;
    }

    RequestorClient& actor(const WorkloadItem& w, const std::string& id) {
        auto it = actors.find(id);
        if (it == actors.end()) bad(w, "unknown actor '" + id + "'");
        return *it->second;
    }

    void log_session_outcome(const std::string& label, const std::string& actor_id,
                             const std::string& gateway, Mode mode,
                             const RequestorClient::SessionOutcome& out) {
        harness_log("session_outcome", {{"label", label},
                                        {"requestor", actor_id},
                                        {"gateway", gateway},
                                        {"mode", mode_name(mode)},
                                        {"ok", out.ok ? "true" : "false"},
                                        {"error", out.error}});
        if (out.ok) {
            open_sessions[label] = {actor_id, out.session};
            session_labels[actor_id][out.session] = label;
        }
    }

    void log_command_outcome(const std::string& label, const std::string& actor_id,
                             const RequestorClient::CommandOutcome& out) {
        netsim::LogFields f{{"label", label},
                            {"requestor", actor_id},
                            {"ok", out.ok ? "true" : "false"}};
        if (out.ok) {
            f.emplace_back("status", command_status_name(out.result.status));
            f.emplace_back("achieved", out.result.achieved_reduction_kwh.to_string());
            f.emplace_back("affected", std::to_string(out.result.affected.size()));
            if (out.result.kind == CommandKind::StatusQuery) {
                size_t running = 0;
                for (const auto& st : out.result.snapshot)
                    if (st.running) ++running;
                f.emplace_back("running", std::to_string(running));
                f.emplace_back("total", std::to_string(out.result.snapshot.size()));
            }
        } else {
            f.emplace_back("error", out.error);
        }
        harness_log("command_outcome", std::move(f));
    }

    void run_item(const WorkloadItem& w) {
        size_t i = 0;
        auto next = [&]() -> const std::string& {
            if (i >= w.args.size()) bad(w, "missing argument");
            return w.args[i++];
        };
        const std::string& action = next();

        if (action == "session") {
            // session <label> <actor> <gateway> <mode> <permission> [command...]
            std::string label = next(), who = next(), gw = next();
            auto mode = mode_from_name(next());
            auto perm = permission_from_name(next());
            if (!mode || !perm) bad(w, "bad mode or permission");
            std::optional<Command> cmd;
            if (i < w.args.size()) cmd = parse_command(w, i);
            actor(w, who).request_session(
                gw, *mode, *perm, cmd,
                [this, label, who, gw, mode](const RequestorClient::SessionOutcome& out) {
                    log_session_outcome(label, who, gw, *mode, out);
                });
        } else if (action == "command") {
            // command <label> <actor> <session-label> <command...>
            std::string label = next(), who = next(), slabel = next();
            Command cmd = parse_command(w, i);
            auto it = open_sessions.find(slabel);
            if (it == open_sessions.end() || it->second.first != who) {
                log_command_outcome(label, who, {false, {}, "NoSuchSession"});
                return;
            }
            actor(w, who).send_command(
                it->second.second, cmd,
                [this, label, who](const RequestorClient::CommandOutcome& out) {
                    log_command_outcome(label, who, out);
                });
        } else if (action == "redirect") {
            // redirect <label> <actor> <gateway> <permission>
            std::string label = next(), who = next(), gw = next();
            auto perm = permission_from_name(next());
            if (!perm) bad(w, "bad permission");
            actor(w, who).request_redirect(
                gw, *perm, [this, label, who, gw](const RequestorClient::RedirectGrant& grant) {
                    harness_log("redirect_outcome", {{"label", label},
                                                     {"requestor", who},
                                                     {"gateway", gw},
                                                     {"ok", grant.ok ? "true" : "false"},
                                                     {"error", grant.error}});
                    if (grant.ok) redirect_grants[label] = grant;
                });
        } else if (action == "connect") {
            // connect <label> <actor> <redirect-label> [command...]
            std::string label = next(), who = next(), rlabel = next();
            std::optional<Command> cmd;
            if (i < w.args.size()) cmd = parse_command(w, i);
            auto it = redirect_grants.find(rlabel);
            if (it == redirect_grants.end()) {
                log_session_outcome(label, who, "?", Mode::Redirect, {false, 0, "NoSuchGrant"});
                return;
            }
            const auto& grant = it->second;
            std::string gw = grant.token.gateway.id;
            actor(w, who).direct_connect(
                grant.address, grant.token, grant.token_bytes, cmd,
                [this, label, who, gw](const RequestorClient::SessionOutcome& out) {
                    log_session_outcome(label, who, gw, Mode::Redirect, out);
                });
        } else if (action == "fanout") {
            // fanout <label> <actor> <gw-prefix> <count> <mode> <permission> <command...>
            std::string label = next(), who = next(), prefix = next();
            uint64_t count = parse_u64(next(), sc.name, w.line);
            auto mode = mode_from_name(next());
            auto perm = permission_from_name(next());
            if (!mode || !perm) bad(w, "bad mode or permission");
            Command cmd = parse_command(w, i);
            harness_log("fanout_start", {{"label", label}, {"count", std::to_string(count)}});
            for (uint64_t n = 1; n <= count; ++n) {
                std::string gw = prefix + std::to_string(n);
                actor(w, who).request_session(
                    gw, *mode, *perm, cmd,
                    [this, label, who, gw, mode](const RequestorClient::SessionOutcome& out) {
                        log_session_outcome(label, who, gw, *mode, out);
                        if (!out.ok) log_command_outcome(label, who, {false, {}, out.error});
                    });
            }
        } else if (action == "close") {
            std::string who = next(), slabel = next();
            auto it = open_sessions.find(slabel);
            if (it != open_sessions.end()) actor(w, who).close_session(it->second.second);
        } else if (action == "flow_export") {
            auto body = broker->export_allowed_flows();
            harness_log("flow_export", {{"tuples", std::to_string(body.tuples.size())}});
            exports.push_back(std::move(body));
        } else if (action == "swap_credential") {
            // swap_credential <gateway>: new key material, then re-register.
            const std::string& gw = next();
            auto it = gateways.find(gw);
            if (it == gateways.end()) bad(w, "unknown gateway '" + gw + "'");
            auto& agent = *it->second;
            auto old_fp = fingerprint(agent.credential("default").cert->cert);
            auto cred = ca->issue({gw, RoleKind::IctGateway});
            auto new_fp = fingerprint(cred.cert);
            agent.replace_credential("default",
                                     Credential::from_cert(cred.cert, cred.private_key));
            harness_log("credential_swap", {{"gateway", gw},
                                            {"old_fp", to_hex(old_fp).substr(0, 16)},
                                            {"new_fp", to_hex(new_fp).substr(0, 16)}});
            agent.force_reconnect();
        } else if (action == "check_fingerprint") {
            // Registry fingerprint must match the gateway's current credential.
            const std::string& gw = next();
            auto it = gateways.find(gw);
            const Broker::GatewayRecord* rec = broker->lookup(gw);
            bool match = it != gateways.end() && rec != nullptr &&
                         rec->fingerprint ==
                             fingerprint(it->second->credential("default").cert->cert);
            harness_log("fingerprint_check",
                        {{"gateway", gw}, {"match", match ? "true" : "false"}});
        } else {
            bad(w, "unknown action '" + action + "'");
        }
    }
};

bool entry_matches(const netsim::LogEntry& e,
                   const std::vector<std::pair<std::string, std::string>>& match) {
    for (const auto& [k, v] : match) {
        if (k == "event") {
            if (e.event != v) return false;
        } else if (k == "t_min") {
            if (e.time < std::stoull(v)) return false;
        } else if (k == "t_max") {
            if (e.time > std::stoull(v)) return false;
        } else {
            auto f = e.field(k);
            if (!f || *f != v) return false;
        }
    }
    return true;
}

}  // namespace

RunResult run_scenario(const Scenario& sc, std::optional<uint64_t> seed_override, bool quiet) {
    (void)quiet;
    Runner r(sc, seed_override.value_or(sc.seed));
    r.build();
    r.sim.run(sc.run_until());

    const auto& entries = r.sim.log().entries();
    MetricsReport m;
    m.scenario = sc.name;
    m.seed = r.seed;
    m.events = entries.size();
    m.digest_hex = to_hex(r.sim.log().digest());
    m.packets_sent = r.sim.counters().packets_sent;
    m.packets_delivered = r.sim.counters().packets_delivered;

    std::set<std::string> requestor_ids;
    for (const auto& a : sc.actors) requestor_ids.insert(a.id);
    for (const auto& e : entries) {
        auto who = e.field("actor");
        if (e.event == "session_open" && who && requestor_ids.count(*who)) {
            auto mode = e.field("mode");
            m.sessions_by_mode[mode.value_or("?")]++;
        }
        if ((e.event == "session_outcome" || e.event == "command_outcome") &&
            e.field("ok") == std::optional<std::string>("false")) {
            m.failures++;
        }
    }
    m.drops = r.sim.counters().drops;

    // Fan-out span: start marker to the last command outcome with its label.
    for (const auto& e : entries) {
        if (e.event != "fanout_start") continue;
        auto label = e.field("label").value_or("");
        SimTime last = e.time;
        for (const auto& o : entries)
            if (o.event == "command_outcome" && o.field("label") == std::optional(label))
                last = std::max(last, o.time);
        m.fanout = {e.time, last};
    }

    auto mon = sc.options.find("monitor");
    if (mon != sc.options.end() && mon->second == "on") {
        m.monitored = true;
        std::vector<FlowTuple> tuples;
        if (!r.exports.empty()) tuples = r.exports.back().tuples;
        auto alerts = netsim::monitor_flows(tuples, entries);
        m.alert_count = alerts.size();
        for (const auto& a : alerts) m.alert_lines.push_back(a.to_string());
    }

    for (const auto& ex : sc.expectations) {
        bool ok = false;
        uint64_t n = 0;
        if (ex.kind == Expectation::Kind::Alerts) {
            n = m.alert_count;
        } else if (ex.kind == Expectation::Kind::Fanout) {
            n = m.fanout ? m.fanout->second - m.fanout->first : UINT64_MAX;
        } else {
            for (const auto& e : entries)
                if (entry_matches(e, ex.match)) ++n;
        }
        ok = n >= ex.min && n <= ex.max;
        (ok ? m.expect_pass : m.expect_fail)++;
        m.expect_lines.push_back(std::string(ok ? "pass" : "FAIL") + " [" +
                                 std::to_string(n) + "] " + ex.raw);
    }

    // Self-audit: the log must survive a serialize/parse round trip intact.
    std::string text = r.sim.log().text();
    auto reparsed = netsim::EventLog::parse(text);
    m.self_audit_ok = reparsed.size() == entries.size();
    if (m.self_audit_ok) {
        for (size_t i = 0; i < entries.size(); ++i) {
            if (reparsed[i].line() != entries[i].line()) {
                m.self_audit_ok = false;
                break;
            }
        }
    }

    RunResult res;
    res.report = std::move(m);
    res.pass = res.report.pass();
    res.log_text = std::move(text);
    return res;
}

std::string MetricsReport::text() const {
    std::ostringstream os;
    os << "report-version 1\n";
    os << "scenario " << scenario << "\n";
    os << "seed " << seed << "\n";
    os << "events " << events << "\n";
    os << "log-digest " << digest_hex << "\n";
    os << "packets " << packets_sent << " sent " << packets_delivered << " delivered\n";
    for (const auto& [mode, n] : sessions_by_mode)
        os << "sessions " << mode << " " << n << "\n";
    os << "failures " << failures << "\n";
    for (const auto& [reason, n] : drops) os << "drops " << reason << " " << n << "\n";
    if (fanout)
        os << "fanout-span-ms " << (fanout->second - fanout->first) << "\n";
    if (monitored) {
        os << "alerts " << alert_count << "\n";
        for (const auto& a : alert_lines) os << "alert " << a << "\n";
    }
    for (const auto& l : expect_lines) os << "expect " << l << "\n";
    os << "self-audit " << (self_audit_ok ? "ok" : "FAIL") << "\n";
    os << "result " << (pass() ? "pass" : "FAIL") << "\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// Bundled-scenario registry
// ---------------------------------------------------------------------------

std::vector<std::string> list_scenarios(const std::string& dir) {
    std::vector<std::string> names;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.path().extension() == ".scenario") names.push_back(e.path().stem().string());
    }
    std::sort(names.begin(), names.end());
    return names;
}

Scenario load_by_name(const std::string& dir, const std::string& name) {
    auto p = std::filesystem::path(dir) / (name + ".scenario");
    if (!std::filesystem::exists(p))
        throw std::runtime_error("UnknownScenario: " + name);
    return Scenario::load_file(p.string());
}

std::string describe_scenario(const std::string& dir, const std::string& name) {
    Scenario sc = load_by_name(dir, name);
    std::ostringstream os;
    os << sc.name << ": " << sc.description << "\n";
    os << "  seed " << sc.seed << ", topology " << sc.topology_path;
    if (!sc.fault_path.empty()) os << ", faults " << sc.fault_path;
    os << "\n  actors " << sc.actors.size() << ", gateways " << sc.gateways.size()
       << ", workload " << sc.workload.size() << " steps, expectations "
       << sc.expectations.size() << "\n";
    return os.str();
}

}  // namespace asia::scenario
