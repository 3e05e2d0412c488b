#ifndef ASIA_CORE_WIRE_HPP
#define ASIA_CORE_WIRE_HPP

#include "asia/core/types.hpp"

namespace asia {

enum class MsgType : uint8_t {
    REGISTER = 0,
    REGISTER_ACK = 1,
    KEEPALIVE = 2,
    SESSION_REQUEST = 3,
    CONNECT_REQUEST = 4,
    DIAL_BACK = 5,
    REDIRECT_RESPONSE = 6,
    PROXY_OPEN = 7,
    PROXY_DATA = 8,
    APP_DATA = 9,
    ERROR = 10,
    FLOW_EXPORT = 11,
};
constexpr int kMsgTypeCount = 12;

const char* msg_type_name(MsgType t);

// Canonical length-prefixed protocol envelope. The body stays opaque here;
// the per-type records below encode into / decode from it.
struct WireMessage {
    uint8_t version = 1;
    MsgType msg_type = MsgType::KEEPALIVE;
    uint64_t correlation = 0;
    Bytes body;
    Bytes auth_tag;  // empty = absent

    bool operator==(const WireMessage&) const = default;

    // Bytes the auth tag covers: (version, msg_type, correlation, body).
    Bytes tag_input() const;
};

constexpr size_t kMaxEncodedMessage = 64 * 1024;

// Frame: u32 length prefix, then version, msg_type, correlation,
// body length (u32), body, auth-tag length (u16), auth tag.
Bytes encode_message(const WireMessage& msg);           // throws CodecError(OversizeMessage)
WireMessage decode_message(const Bytes& frame);         // throws CodecError

// ---------------------------------------------------------------------------
// Message bodies
// ---------------------------------------------------------------------------

struct NetAddress {
    std::string host;
    uint16_t port = 0;

    void encode(codec::Writer& w) const;
    static NetAddress decode(codec::Reader& r);
    std::string to_string() const;
    bool operator==(const NetAddress&) const = default;
    bool operator<(const NetAddress& o) const {
        return host != o.host ? host < o.host : port < o.port;
    }
};

struct RegisterBody {
    Identity gateway;
    Bytes encode() const;
    static RegisterBody decode(const Bytes& b);
};

struct RegisterAckBody {
    NetAddress observed;
    Bytes encode() const;
    static RegisterAckBody decode(const Bytes& b);
};

struct SessionRequestBody {
    Mode mode = Mode::Invocation;
    std::string gateway_id;
    Permission permission = Permission::GetStatus;
    std::optional<Tan> requestor_tan;
    std::optional<NetAddress> callback;  // required iff mode == Invocation
    std::optional<Command> command;

    void validate() const;
    Bytes encode() const;
    static SessionRequestBody decode(const Bytes& b);
};

struct ConnectRequestBody {
    NetAddress callback;
    Tan tan;
    Bytes token;  // canonical-encoded SoftwareToken
    std::optional<Command> command;
    Bytes encode() const;
    static ConnectRequestBody decode(const Bytes& b);
};

// Session-open presented on a freshly authenticated end-to-end channel:
// the gateway's dial-back in invocation mode, the requestor's opener in
// redirect and proxy modes.
struct DialBackBody {
    Tan tan;
    Bytes token;
    Bytes encode() const;
    static DialBackBody decode(const Bytes& b);
};

// Broker reply to a SESSION_REQUEST in every mode. Redirect carries the
// gateway address; invocation and proxy omit it (the token carries the TAN).
struct RedirectResponseBody {
    std::optional<NetAddress> address;
    Bytes token;
    Bytes encode() const;
    static RedirectResponseBody decode(const Bytes& b);
};

struct ProxyOpenBody {
    Bytes token;
    Bytes encode() const;
    static ProxyOpenBody decode(const Bytes& b);
};

struct ProxyDataBody {
    Bytes inner;
    Bytes encode() const;
    static ProxyDataBody decode(const Bytes& b);
};

struct AppDataBody {
    uint64_t sequence = 0;
    Bytes payload;
    Bytes encode() const;
    static AppDataBody decode(const Bytes& b);
};

enum class ErrorCode : uint16_t {
    AuthFailed = 0,
    NotAuthorized = 1,
    GatewayUnreachable = 2,
    TanCollision = 3,
    GatewayRefused = 4,
    BadToken = 5,
    DialFailed = 6,
    IntegrityFailure = 7,
    NotFound = 8,
    Protocol = 9,
};

const char* error_code_name(ErrorCode c);

struct ErrorBody {
    ErrorCode code = ErrorCode::Protocol;
    std::string detail;
    Bytes encode() const;
    static ErrorBody decode(const Bytes& b);
};

struct FlowTuple {
    RoleKind requestor_role = RoleKind::EndUser;
    std::string gateway_id;
    Mode mode = Mode::Invocation;
    Permission permission = Permission::GetStatus;

    void encode(codec::Writer& w) const;
    static FlowTuple decode(codec::Reader& r);
    bool operator==(const FlowTuple&) const = default;
    bool operator<(const FlowTuple& o) const;
};

struct FlowExportBody {
    std::vector<FlowTuple> tuples;
    Bytes encode() const;
    static FlowExportBody decode(const Bytes& b);
};

// Application payloads carried inside APP_DATA.
enum class AppPayloadKind : uint8_t {
    CommandRequest = 1,
    CommandResponse = 2,
};

Bytes encode_command_request(const Command& cmd);
Bytes encode_command_response(const CommandResult& result);
// Returns the payload kind; fills exactly one of the outputs.
AppPayloadKind decode_app_payload(const Bytes& payload, std::optional<Command>& cmd,
                                  std::optional<CommandResult>& result);

}  // namespace asia

#endif
