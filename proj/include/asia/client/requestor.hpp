#ifndef ASIA_CLIENT_REQUESTOR_HPP
#define ASIA_CLIENT_REQUESTOR_HPP

#include <map>
#include <memory>

#include "asia/auth/token.hpp"
#include "asia/netsim/sim.hpp"
#include "asia/proto/secure_channel.hpp"

namespace asia {

// Client library for smart-grid roles: authenticates to the broker,
// requests sessions in any mode, accepts dial-backs, and drives commands
// end-to-end. All completion is via callbacks under the simulation loop.
class RequestorClient {
public:
    struct Config {
        Identity identity{"requestor", RoleKind::EndUser};
        Credential credential;
        auth::TrustAnchors trust;
        NetAddress broker{"broker", 4000};
        uint16_t callback_port = 6000;
        SimTime connect_timeout_ms = 10'000;
        SimTime dialback_timeout_ms = 30'000;
    };

    using SessionId = uint64_t;

    struct SessionOutcome {
        bool ok = false;
        SessionId session = 0;
        std::string error;  // error-code name or transport reason when !ok
    };
    using SessionFn = std::function<void(const SessionOutcome&)>;

    struct CommandOutcome {
        bool ok = false;
        CommandResult result;
        std::string error;
    };
    using CommandFn = std::function<void(const CommandOutcome&)>;

    RequestorClient(netsim::SimNet& sim, std::string node, Config cfg);
    void start();  // opens the dial-back listener

    // Requests a session with the gateway in the given mode; the returned
    // handle has completed mutual auth with the gateway itself. With an
    // embedded command (invocation mode), the gateway's result arrives via
    // on_embedded_result.
    void request_session(const std::string& gateway_id, Mode mode, Permission permission,
                         std::optional<Command> command, SessionFn done);

    void send_command(SessionId session, const Command& cmd, CommandFn done);
    void close_session(SessionId session);
    bool session_open(SessionId session) const;
    const Identity& session_peer(SessionId session) const;

    // Two-phase redirect: fetch the address and token now, connect later.
    struct RedirectGrant {
        bool ok = false;
        NetAddress address;
        auth::SoftwareToken token;
        Bytes token_bytes;
        std::string error;
    };
    using RedirectFn = std::function<void(const RedirectGrant&)>;
    void request_redirect(const std::string& gateway_id, Permission permission, RedirectFn done);
    void direct_connect(const NetAddress& address, const auth::SoftwareToken& token,
                        const Bytes& token_bytes, std::optional<Command> command, SessionFn done);

    // Outcome of a command the client sent on the caller's behalf as part of
    // session establishment (embedded or auto-sent after the opener ack).
    std::function<void(SessionId, const CommandOutcome&)> on_embedded_outcome;

private:
    struct Session {
        SessionId id = 0;
        Mode mode = Mode::Invocation;
        netsim::ConnId conn = 0;         // direct / dial-back sessions
        uint64_t proxy_correlation = 0;  // proxy sessions tunnel via the broker
        std::unique_ptr<proto::SecureChannel> channel;
        Identity peer;
        uint64_t send_seq = 0;
        uint64_t recv_seq = 0;
        std::map<uint64_t, CommandFn> waiting;  // by correlation
        bool established = false;
    };

    // A request in flight at the broker, keyed by correlation.
    struct PendingRequest {
        Mode mode = Mode::Invocation;
        std::string gateway_id;
        Permission permission = Permission::GetStatus;
        std::optional<Command> command;
        SessionFn done;
        RedirectFn redirect_done;  // set for two-phase redirect requests
    };

    struct PendingDial {
        auth::SoftwareToken token;
        SessionFn done;
        bool had_command = false;
        uint64_t timer = 0;
    };

    void ensure_broker(std::function<void(bool ok)> then);
    void on_broker_message(const WireMessage& msg);
    void handle_broker_reply(PendingRequest req, const WireMessage& msg);
    void start_direct_connect(PendingRequest req, const NetAddress& address,
                              const auth::SoftwareToken& token, const Bytes& token_bytes);
    void start_proxy_session(PendingRequest req, uint64_t correlation,
                             const auth::SoftwareToken& token, const Bytes& token_bytes);
    void accept_dialback(netsim::ConnId id, const NetAddress& peer);
    void on_session_message(Session& s, const WireMessage& msg);
    void finish(SessionFn& done, const SessionOutcome& outcome);
    void drop_session(SessionId id);
    void log(const std::string& event, netsim::LogFields fields);

    netsim::SimNet& sim_;
    std::string node_;
    Config cfg_;
    std::set<Bytes> seen_nonces_;

    netsim::ConnId broker_conn_ = 0;
    std::unique_ptr<proto::SecureChannel> broker_;
    std::vector<std::function<void(bool)>> broker_waiters_;

    uint64_t next_correlation_ = 1;
    std::map<uint64_t, PendingRequest> requests_;
    std::map<Tan, PendingDial> pending_tans_;
    // Continuations for sessions whose opener ack is still outstanding.
    std::map<SessionId, std::pair<std::shared_ptr<SessionFn>, std::optional<Command>>>
        establish_waiters_;

    SessionId next_session_ = 1;
    std::map<SessionId, std::unique_ptr<Session>> sessions_;
};

}  // namespace asia

#endif
