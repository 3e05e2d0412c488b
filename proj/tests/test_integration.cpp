#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "asia/broker/broker.hpp"
#include "asia/client/requestor.hpp"
#include "asia/gateway/agent.hpp"

using namespace asia;

namespace {

// Broker + one gateway + one requestor on a hub topology; the gateway sits
// behind a NAT when asked to.
struct Net {
    netsim::SimNet sim;
    auth::CertificateAuthority ca;
    auth::TrustAnchors trust;
    std::unique_ptr<Broker> broker;
    std::unique_ptr<GatewayAgent> gw;
    std::unique_ptr<RequestorClient> client;

    explicit Net(bool gateway_nat, uint64_t seed = 7) : sim(seed), ca("ca", sim.rng()) {
        sim.add_node("net", false);
        sim.add_node("broker", false);
        sim.add_node("req-node", false);
        sim.add_node("gw-node", gateway_nat);
        sim.add_link("net", "broker", 5);
        sim.add_link("net", "req-node", 5);
        sim.add_link("net", "gw-node", 10);
        trust.issuers[ca.name()] = ca.public_key();

        Broker::Config bc;
        auto bcred = ca.issue(bc.identity);
        bc.credential = Credential::from_cert(bcred.cert, bcred.private_key);
        trust.issuers[bc.identity.id] = bcred.cert.public_key;
        bc.trust = trust;
        bc.acl = auth::AclTable::parse(
            "role:EndUser * ChangeConfiguration,InstallApplication,GetStatus,IssueCommand\n");
        broker = std::make_unique<Broker>(sim, "broker", std::move(bc));
        broker->start();

        GatewayAgent::Config gc;
        gc.identity = {"gw1", RoleKind::IctGateway};
        auto gcred = ca.issue(gc.identity);
        gc.credentials["default"] = Credential::from_cert(gcred.cert, gcred.private_key);
        gc.trust = trust;
        Appliance w;
        w.appliance_id = "w1";
        w.klass = ApplianceClass::Washer;
        w.running = true;
        w.load_kw = Money::from_double(2.0);
        gc.appliances = {w};
        gw = std::make_unique<GatewayAgent>(sim, "gw-node", std::move(gc));
        gw->start();

        RequestorClient::Config rc;
        rc.identity = {"alice", RoleKind::EndUser};
        auto rcred = ca.issue(rc.identity);
        rc.credential = Credential::from_cert(rcred.cert, rcred.private_key);
        rc.trust = trust;
        client = std::make_unique<RequestorClient>(sim, "req-node", std::move(rc));
        client->start();
        sim.run(sim.now() + 1000);  // let registration settle
    }

    RequestorClient::SessionOutcome open(Mode mode, Permission perm,
                                         std::optional<Command> cmd = std::nullopt) {
        std::optional<RequestorClient::SessionOutcome> out;
        client->request_session("gw1", mode, perm, std::move(cmd),
                                [&](const RequestorClient::SessionOutcome& o) { out = o; });
        sim.run(sim.now() + 60'000);
        REQUIRE(out.has_value());
        return *out;
    }

    RequestorClient::CommandOutcome send(RequestorClient::SessionId sid, const Command& cmd) {
        std::optional<RequestorClient::CommandOutcome> out;
        client->send_command(sid, cmd,
                             [&](const RequestorClient::CommandOutcome& o) { out = o; });
        sim.run(sim.now() + 60'000);
        REQUIRE(out.has_value());
        return *out;
    }

    size_t log_count(const std::string& event) const {
        size_t n = 0;
        for (const auto& e : sim.log().entries())
            if (e.event == event) ++n;
        return n;
    }
};

Command status_query() {
    Command c;
    c.kind = CommandKind::StatusQuery;
    return c;
}

}  // namespace

TEST_CASE("gateway registers on startup and the broker tracks it online") {
    Net net(true);
    CHECK(net.gw->registered());
    const auto* rec = net.broker->lookup("gw1");
    REQUIRE(rec != nullptr);
    CHECK(net.broker->gateway_state(*rec) == GatewayState::Online);
    // The broker learned the NAT'd external address, not the internal name.
    CHECK(rec->public_address.host != "gw-node");
}

TEST_CASE("invocation mode completes an authenticated session through NAT") {
    Net net(true);
    auto out = net.open(Mode::Invocation, Permission::GetStatus);
    REQUIRE(out.ok);
    CHECK(net.client->session_open(out.session));
    CHECK(net.client->session_peer(out.session).id == "gw1");
    auto result = net.send(out.session, status_query());
    REQUIRE(result.ok);
    CHECK(result.result.snapshot.size() == 1);
}

TEST_CASE("redirect mode times out at the firewall but works on a public gateway") {
    SUBCASE("NAT blocks the direct dial") {
        Net net(true);
        auto out = net.open(Mode::Redirect, Permission::GetStatus);
        CHECK_FALSE(out.ok);
        CHECK(out.error == "ConnectTimeout");
        CHECK(net.sim.counters().drops.count("FirewallBlocked") == 1);
    }
    SUBCASE("public gateway accepts it") {
        Net net(false);
        auto out = net.open(Mode::Redirect, Permission::GetStatus);
        REQUIRE(out.ok);
        CHECK(net.send(out.session, status_query()).ok);
    }
}

TEST_CASE("proxy mode relays an end-to-end authenticated session through NAT") {
    Net net(true);
    auto out = net.open(Mode::Proxy, Permission::GetStatus);
    REQUIRE(out.ok);
    auto result = net.send(out.session, status_query());
    REQUIRE(result.ok);
    CHECK(net.broker->proxy_counters().frames_relayed > 0);
    CHECK(net.broker->proxy_counters().requestor_to_gateway_bytes > 0);
    CHECK(net.broker->proxy_counters().gateway_to_requestor_bytes > 0);
}

TEST_CASE("a command result is mode-transparent") {
    // The caller cannot tell from the CommandResult which mode carried it.
    Net net(false);
    std::vector<CommandResult> results;
    for (Mode m : {Mode::Invocation, Mode::Redirect, Mode::Proxy}) {
        auto out = net.open(m, Permission::GetStatus);
        REQUIRE(out.ok);
        auto r = net.send(out.session, status_query());
        REQUIRE(r.ok);
        results.push_back(r.result);
    }
    CHECK(results[0] == results[1]);
    CHECK(results[1] == results[2]);
}

TEST_CASE("embedded command in an invocation request is executed and answered") {
    Net net(true);
    Command cmd;
    cmd.kind = CommandKind::ShutoffAppliance;
    cmd.shutoff = ShutoffPayload{ApplianceClass::Washer, Money::from_double(2.0)};
    std::optional<RequestorClient::CommandOutcome> embedded;
    net.client->on_embedded_outcome = [&](RequestorClient::SessionId,
                                          const RequestorClient::CommandOutcome& o) {
        embedded = o;
    };
    auto out = net.open(Mode::Invocation, Permission::IssueCommand, cmd);
    REQUIRE(out.ok);
    REQUIRE(embedded.has_value());
    CHECK(embedded->ok);
    CHECK(embedded->result.status == CommandStatus::Ok);
    CHECK(embedded->result.achieved_reduction_kwh == Money::from_double(2.0));
    CHECK_FALSE(net.gw->appliances()[0].running);
}

TEST_CASE("re-registration supersedes the old permanent channel") {
    Net net(true);
    CHECK(net.broker->live_channel_count("gw1") == 1);
    net.gw->force_reconnect();
    net.sim.run(net.sim.now() + 10'000);
    CHECK(net.gw->registered());
    CHECK(net.broker->live_channel_count("gw1") == 1);
    // And the gateway is still reachable afterwards.
    auto out = net.open(Mode::Invocation, Permission::GetStatus);
    CHECK(out.ok);
}

TEST_CASE("link outage: the agent backs off and re-registers on recovery") {
    Net net(true);
    netsim::Fault f;
    f.time = net.sim.now() + 1000;
    f.kind = netsim::FaultKind::LinkDown;
    f.node = "gw-node";
    f.duration = 20'000;
    net.sim.load_fault_script({f});
    net.sim.run(net.sim.now() + 120'000);
    CHECK(net.gw->registered());
    CHECK(net.log_count("register") >= 2);
    CHECK(net.log_count("reconnect_scheduled") >= 1);
    auto out = net.open(Mode::Invocation, Permission::GetStatus);
    CHECK(out.ok);
}

TEST_CASE("without keepalives the registry decays to stale and offline") {
    Net net(true);
    // Freeze a copy of the record at "last heard t=0" and let the clock run;
    // the live record stays Online because keepalives keep refreshing it.
    const auto* rec = net.broker->lookup("gw1");
    REQUIRE(rec != nullptr);
    Broker::GatewayRecord frozen = *rec;
    frozen.last_keepalive = 0;
    net.sim.run(95'000);  // silence > 90 s
    CHECK(net.broker->gateway_state(frozen) == GatewayState::Stale);
    net.sim.run(185'000);  // silence > 180 s
    CHECK(net.broker->gateway_state(frozen) == GatewayState::Offline);
    // The real record was kept fresh by keepalives the whole time.
    CHECK(net.broker->gateway_state(*net.broker->lookup("gw1")) == GatewayState::Online);
}

TEST_CASE("authorization denial precedes any gateway-bound signaling") {
    Net net(true);
    // Swap in an ACL that rejects alice outright.
    std::optional<RequestorClient::SessionOutcome> out;
    RequestorClient::Config rc;
    rc.identity = {"eve", RoleKind::EnergyMarket};
    auto cred = net.ca.issue(rc.identity);
    rc.credential = Credential::from_cert(cred.cert, cred.private_key);
    rc.trust = net.trust;
    rc.callback_port = 6200;
    RequestorClient eve(net.sim, "req-node", std::move(rc));
    eve.start();
    eve.request_session("gw1", Mode::Invocation, Permission::IssueCommand, std::nullopt,
                        [&](const RequestorClient::SessionOutcome& o) { out = o; });
    net.sim.run(net.sim.now() + 30'000);
    REQUIRE(out.has_value());
    CHECK_FALSE(out->ok);
    CHECK(out->error == "NotAuthorized");
    CHECK(net.log_count("connect_request_sent") == 0);
    CHECK(net.gw->sessions_accepted() == 0);
}

TEST_CASE("clean runs conserve every packet") {
    Net net(false);
    for (Mode m : {Mode::Invocation, Mode::Redirect, Mode::Proxy}) {
        auto out = net.open(m, Permission::GetStatus);
        REQUIRE(out.ok);
        net.client->close_session(out.session);
    }
    net.sim.run(net.sim.now() + 5000);
    const auto& c = net.sim.counters();
    CHECK(c.packets_sent == c.packets_delivered + c.dropped_total() + net.sim.pending_packets());
    CHECK(c.dropped_total() == 0);
}
