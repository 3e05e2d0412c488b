#ifndef ASIA_GATEWAY_AGENT_HPP
#define ASIA_GATEWAY_AGENT_HPP

#include <map>
#include <memory>

#include "asia/auth/acl.hpp"
#include "asia/auth/token.hpp"
#include "asia/netsim/sim.hpp"
#include "asia/proto/secure_channel.hpp"

namespace asia {

// How the token's centralized grant composes with the gateway's own table.
enum class PolicyMode { Centralized, LocalOnly, Conjunction };
const char* policy_mode_name(PolicyMode m);
std::optional<PolicyMode> policy_mode_from_name(const std::string& s);

struct Appliance {
    std::string appliance_id;
    ApplianceClass klass = ApplianceClass::Washer;
    bool running = false;
    Money load_kw;
    bool generating = false;                 // SolarGenerator only
    std::optional<Money> price_threshold;    // pause when signal price exceeds this

    ApplianceStatus status() const;
};

// The ICT gateway: registers over its permanent channel, answers connect
// requests in all three modes, enforces local policy, and drives the
// simulated home appliances.
class GatewayAgent {
public:
    struct Config {
        Identity identity{"gw", RoleKind::IctGateway};
        std::map<std::string, Credential> credentials;  // "default" slot required
        auth::TrustAnchors trust;
        NetAddress broker{"broker", 4000};
        auth::AclTable local_acl;
        PolicyMode policy = PolicyMode::Centralized;
        SimTime keepalive_ms = 30'000;
        bool keepalives_enabled = true;
        SimTime connect_timeout_ms = 10'000;
        SimTime backoff_base_ms = 1000;
        SimTime backoff_cap_ms = 60'000;
        uint16_t direct_port = 5000;
        std::vector<Appliance> appliances;
        std::map<std::string, std::string> config_kv;  // integrity-checked configuration
    };

    GatewayAgent(netsim::SimNet& sim, std::string node, Config cfg);
    void start();  // registers fault hook, opens listener, dials the broker

    bool registered() const { return registered_; }
    const std::vector<Appliance>& appliances() const { return cfg_.appliances; }
    std::optional<Money> current_price() const { return current_price_; }
    const std::vector<std::string>& installed_apps() const { return installed_apps_; }
    uint64_t commands_executed() const { return commands_executed_; }
    uint64_t sessions_accepted() const { return sessions_accepted_; }

    // Pluggable security module: swaps a credential slot live; the next
    // handshake uses the new material.
    void replace_credential(const std::string& slot, Credential cred);
    // Drops the permanent channel; the normal backoff path re-registers,
    // re-authenticating with whatever the "default" slot now holds.
    void force_reconnect();
    const Credential& credential(const std::string& slot) const { return cfg_.credentials.at(slot); }

    bool self_integrity_check() const;
    void mutate_config_out_of_band();  // fault path: digest no longer matches

    // Local decision given the token's grantonto this gateway.
    bool authorize_local(const Identity& peer, const PermissionSet& token_perms,
                         Permission perm) const;
    CommandResult execute_command(const Command& cmd, bool include_appliance_ids);

private:
    struct Session {
        uint64_t id = 0;
        netsim::ConnId conn = 0;            // 0 for proxy sessions
        uint64_t proxy_correlation = 0;     // non-zero for proxy sessions
        std::unique_ptr<proto::SecureChannel> channel;
        auth::SoftwareToken token;
        bool token_checked = false;         // dial-back ack / opener verified
        uint64_t send_seq = 0;
        uint64_t recv_seq = 0;
        std::optional<Command> embedded;    // command to run once the peer acks
        uint64_t broker_correlation = 0;    // CONNECT_REQUEST correlation, for errors
    };

    void dial_broker();
    void on_permanent_ready();
    void on_permanent_message(const WireMessage& msg);
    void on_permanent_close();
    void send_keepalive();
    void handle_connect_request(const WireMessage& msg);
    void start_dialback(const ConnectRequestBody& req, const auth::SoftwareToken& token,
                        uint64_t broker_correlation, bool corrupt_tan, bool substitute_cred);
    void handle_proxy_open(const WireMessage& msg);
    void accept_direct(netsim::ConnId id, const NetAddress& peer);
    void on_session_message(Session& s, const WireMessage& msg);
    void handle_app_data(Session& s, const WireMessage& msg);
    void session_send(Session& s, WireMessage msg);
    void drop_session(uint64_t session_id);
    void on_fault(netsim::FaultKind kind);
    void log(const std::string& event, netsim::LogFields fields);
    Digest config_digest() const;
    const Credential& active_credential() const { return cfg_.credentials.at("default"); }

    netsim::SimNet& sim_;
    std::string node_;
    Config cfg_;
    std::set<Bytes> seen_nonces_;

    netsim::ConnId broker_conn_ = 0;
    std::unique_ptr<proto::SecureChannel> permanent_;
    bool registered_ = false;
    bool auth_blocked_ = false;
    SimTime backoff_ms_ = 0;
    uint64_t keepalive_timer_ = 0;
    uint64_t next_correlation_ = 1;

    Digest baseline_{};
    std::optional<Money> current_price_;
    std::vector<std::string> installed_apps_;
    uint64_t commands_executed_ = 0;
    uint64_t sessions_accepted_ = 0;

    bool fault_corrupt_tan_ = false;
    bool fault_replay_tan_ = false;
    bool fault_substitute_cred_ = false;
    std::optional<std::pair<ConnectRequestBody, auth::SoftwareToken>> last_dialback_;

    uint64_t next_session_ = 1;
    std::map<uint64_t, std::unique_ptr<Session>> sessions_;
};

}  // namespace asia

#endif
