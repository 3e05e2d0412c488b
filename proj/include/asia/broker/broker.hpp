#ifndef ASIA_BROKER_BROKER_HPP
#define ASIA_BROKER_BROKER_HPP

#include <map>
#include <memory>

#include "asia/auth/acl.hpp"
#include "asia/auth/token.hpp"
#include "asia/netsim/sim.hpp"
#include "asia/proto/secure_channel.hpp"

namespace asia {

enum class GatewayState { Online, Stale, Offline };
const char* gateway_state_name(GatewayState s);

// The ASIA server: gateway registry with keepalive tracking, the three
// connection-establishment modes, the proxy relay, and flow export.
class Broker {
public:
    struct Config {
        Identity identity{"asia", RoleKind::GatewayOperator};
        Credential credential;
        auth::TrustAnchors trust;
        uint16_t listen_port = 4000;
        SimTime keepalive_stale_ms = 90'000;
        SimTime keepalive_offline_ms = 180'000;
        SimTime pending_timeout_ms = 30'000;
        SimTime token_ttl_ms = auth::kDefaultTokenTtlMs;
        // Fleet convention: every gateway serves direct sessions on this port.
        uint16_t gateway_direct_port = 5000;
        auth::AclTable acl;
    };

    struct GatewayRecord {
        Identity gateway;
        Digest fingerprint{};
        NetAddress public_address;
        netsim::ConnId channel = 0;
        SimTime registered_at = 0;
        SimTime last_keepalive = 0;
    };

    Broker(netsim::SimNet& sim, std::string node, Config cfg);
    void start();  // begins listening

    const std::string& node() const { return node_; }
    const GatewayRecord* lookup(const std::string& gateway_id) const;
    GatewayState gateway_state(const GatewayRecord& rec) const;
    size_t online_count() const;
    size_t live_channel_count(const std::string& gateway_id) const;

    // (role, gateway, mode, permission) tuples allowed right now. Wildcard
    // gateway entries expand over registered gateways; id principals over
    // roles learned from authenticated peers.
    FlowExportBody export_allowed_flows() const;

    struct ProxyCounters {
        uint64_t requestor_to_gateway_bytes = 0;
        uint64_t gateway_to_requestor_bytes = 0;
        uint64_t frames_relayed = 0;
    };
    const ProxyCounters& proxy_counters() const { return proxy_counters_; }

    // Pre-seed the id->role directory used by flow export.
    void learn_role(const std::string& id, RoleKind role) { known_roles_[id] = role; }

private:
    struct Peer {
        netsim::ConnId conn = 0;
        NetAddress remote;
        std::unique_ptr<proto::SecureChannel> channel;
        std::string registered_gateway;  // non-empty once this is a permanent channel

        const Identity& peer_id() const { return channel->peer().peer; }
    };

    struct PendingInvocation {
        Tan tan;
        Identity requestor;
        std::string gateway_id;
        SimTime created_at = 0;
        uint64_t correlation = 0;  // of the CONNECT_REQUEST sent down the channel
        uint64_t timer = 0;
    };

    // One spliced proxy session: requestor side (conn, correlation) and
    // gateway side (permanent channel, broker-assigned correlation).
    struct ProxySession {
        netsim::ConnId requestor_conn = 0;
        uint64_t requestor_correlation = 0;
        std::string gateway_id;
        uint64_t gateway_correlation = 0;
        bool open = false;  // gateway acknowledged
        // Requestor's SESSION_REQUEST correlation, answered on gateway ack.
        Bytes token;
    };

    void on_accept(netsim::ConnId id, const NetAddress& remote);
    void on_message(Peer& peer, const WireMessage& msg);
    void on_close(netsim::ConnId id);
    void handle_register(Peer& peer, const WireMessage& msg);
    void handle_session_request(Peer& peer, const WireMessage& msg);
    void handle_proxy_data(Peer& peer, const WireMessage& msg);
    void send_error(Peer& peer, uint64_t correlation, ErrorCode code, const std::string& detail);
    auth::SoftwareToken make_token(const Peer& requestor, const GatewayRecord& rec, Mode mode,
                                   Permission perm, const Tan& tan);
    Peer* gateway_peer(const std::string& gateway_id);
    void log(const std::string& event, netsim::LogFields fields);

    netsim::SimNet& sim_;
    std::string node_;
    Config cfg_;
    std::set<Bytes> seen_nonces_;
    std::map<netsim::ConnId, std::unique_ptr<Peer>> peers_;
    std::map<std::string, GatewayRecord> registry_;
    std::map<Tan, PendingInvocation> pending_;
    std::vector<ProxySession> proxies_;
    std::map<std::string, RoleKind> known_roles_;
    ProxyCounters proxy_counters_;
    uint64_t next_correlation_ = 1;
};

}  // namespace asia

#endif
