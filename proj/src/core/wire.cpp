#include "asia/core/wire.hpp"

namespace asia {

using codec::CodecError;
using codec::Err;
using codec::Reader;
using codec::Writer;

static const char* kMsgTypeNames[kMsgTypeCount] = {
    "REGISTER",        "REGISTER_ACK",      "KEEPALIVE",  "SESSION_REQUEST",
    "CONNECT_REQUEST", "DIAL_BACK",         "REDIRECT_RESPONSE", "PROXY_OPEN",
    "PROXY_DATA",      "APP_DATA",          "ERROR",      "FLOW_EXPORT",
};

const char* msg_type_name(MsgType t) { return kMsgTypeNames[static_cast<uint8_t>(t)]; }

Bytes WireMessage::tag_input() const {
    Writer w;
    w.u8(version);
    w.u8(static_cast<uint8_t>(msg_type));
    w.u64(correlation);
    w.bytes32(body);
    return w.take();
}

Bytes encode_message(const WireMessage& msg) {
    Writer w;
    w.u8(msg.version);
    w.u8(static_cast<uint8_t>(msg.msg_type));
    w.u64(msg.correlation);
    w.bytes32(msg.body);
    w.bytes16(msg.auth_tag);
    Bytes inner = w.take();
    if (4 + inner.size() > kMaxEncodedMessage)
        throw CodecError(Err::OversizeMessage, "message exceeds 64 KiB");
    Writer framed;
    framed.u32(static_cast<uint32_t>(inner.size()));
    framed.raw(inner);
    return framed.take();
}

WireMessage decode_message(const Bytes& frame) {
    Reader outer(frame);
    uint32_t len = outer.u32();
    if (outer.remaining() < len) throw CodecError(Err::Truncated, "frame shorter than prefix");
    if (outer.remaining() > len) throw CodecError(Err::NonCanonical, "frame longer than prefix");
    if (frame.size() > kMaxEncodedMessage)
        throw CodecError(Err::OversizeMessage, "frame exceeds 64 KiB");
    Bytes inner = outer.raw(len);
    Reader r(inner);
    WireMessage msg;
    msg.version = r.u8();
    if (msg.version != 1) throw CodecError(Err::UnknownVersion, "unknown version");
    uint8_t t = r.u8();
    if (t >= kMsgTypeCount) throw CodecError(Err::UnknownMsgType, "unknown msg_type");
    msg.msg_type = static_cast<MsgType>(t);
    msg.correlation = r.u64();
    msg.body = r.bytes32();
    msg.auth_tag = r.bytes16();
    r.expect_end();
    return msg;
}

// ---------------------------------------------------------------------------
// Bodies
// ---------------------------------------------------------------------------

void NetAddress::encode(Writer& w) const {
    w.str(host);
    w.u16(port);
}

NetAddress NetAddress::decode(Reader& r) {
    NetAddress a;
    a.host = r.str();
    a.port = r.u16();
    return a;
}

std::string NetAddress::to_string() const { return host + ":" + std::to_string(port); }

static Bytes finish(Writer& w) { return w.take(); }

Bytes RegisterBody::encode() const {
    Writer w;
    gateway.encode(w);
    return finish(w);
}

RegisterBody RegisterBody::decode(const Bytes& b) {
    Reader r(b);
    RegisterBody out{Identity::decode(r)};
    r.expect_end();
    return out;
}

Bytes RegisterAckBody::encode() const {
    Writer w;
    observed.encode(w);
    return finish(w);
}

RegisterAckBody RegisterAckBody::decode(const Bytes& b) {
    Reader r(b);
    RegisterAckBody out{NetAddress::decode(r)};
    r.expect_end();
    return out;
}

void SessionRequestBody::validate() const {
    if (mode == Mode::Invocation && !callback)
        throw std::invalid_argument("invocation request requires callback address");
}

Bytes SessionRequestBody::encode() const {
    validate();
    Writer w;
    w.u8(static_cast<uint8_t>(mode));
    w.str(gateway_id);
    w.u8(static_cast<uint8_t>(permission));
    w.optional(requestor_tan.has_value(), [&] { requestor_tan->encode(w); });
    w.optional(callback.has_value(), [&] { callback->encode(w); });
    w.optional(command.has_value(), [&] { command->encode(w); });
    return finish(w);
}

SessionRequestBody SessionRequestBody::decode(const Bytes& b) {
    Reader r(b);
    SessionRequestBody out;
    out.mode = mode_from_u8(r.u8());
    out.gateway_id = r.str();
    out.permission = permission_from_u8(r.u8());
    if (r.presence()) out.requestor_tan = Tan::decode(r);
    if (r.presence()) out.callback = NetAddress::decode(r);
    if (r.presence()) out.command = Command::decode(r);
    r.expect_end();
    out.validate();
    return out;
}

Bytes ConnectRequestBody::encode() const {
    Writer w;
    callback.encode(w);
    tan.encode(w);
    w.bytes16(token);
    w.optional(command.has_value(), [&] { command->encode(w); });
    return finish(w);
}

ConnectRequestBody ConnectRequestBody::decode(const Bytes& b) {
    Reader r(b);
    ConnectRequestBody out;
    out.callback = NetAddress::decode(r);
    out.tan = Tan::decode(r);
    out.token = r.bytes16();
    if (r.presence()) out.command = Command::decode(r);
    r.expect_end();
    return out;
}

Bytes DialBackBody::encode() const {
    Writer w;
    tan.encode(w);
    w.bytes16(token);
    return finish(w);
}

DialBackBody DialBackBody::decode(const Bytes& b) {
    Reader r(b);
    DialBackBody out;
    out.tan = Tan::decode(r);
    out.token = r.bytes16();
    r.expect_end();
    return out;
}

Bytes RedirectResponseBody::encode() const {
    Writer w;
    w.optional(address.has_value(), [&] { address->encode(w); });
    w.bytes16(token);
    return finish(w);
}

RedirectResponseBody RedirectResponseBody::decode(const Bytes& b) {
    Reader r(b);
    RedirectResponseBody out;
    if (r.presence()) out.address = NetAddress::decode(r);
    out.token = r.bytes16();
    r.expect_end();
    return out;
}

Bytes ProxyOpenBody::encode() const {
    Writer w;
    w.bytes16(token);
    return finish(w);
}

ProxyOpenBody ProxyOpenBody::decode(const Bytes& b) {
    Reader r(b);
    ProxyOpenBody out;
    out.token = r.bytes16();
    r.expect_end();
    return out;
}

Bytes ProxyDataBody::encode() const {
    Writer w;
    w.bytes32(inner);
    return finish(w);
}

ProxyDataBody ProxyDataBody::decode(const Bytes& b) {
    Reader r(b);
    ProxyDataBody out;
    out.inner = r.bytes32();
    r.expect_end();
    return out;
}

Bytes AppDataBody::encode() const {
    Writer w;
    w.u64(sequence);
    w.bytes32(payload);
    return finish(w);
}

AppDataBody AppDataBody::decode(const Bytes& b) {
    Reader r(b);
    AppDataBody out;
    out.sequence = r.u64();
    out.payload = r.bytes32();
    r.expect_end();
    return out;
}

const char* error_code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::AuthFailed: return "AuthFailed";
        case ErrorCode::NotAuthorized: return "NotAuthorized";
        case ErrorCode::GatewayUnreachable: return "GatewayUnreachable";
        case ErrorCode::TanCollision: return "TanCollision";
        case ErrorCode::GatewayRefused: return "GatewayRefused";
        case ErrorCode::BadToken: return "BadToken";
        case ErrorCode::DialFailed: return "DialFailed";
        case ErrorCode::IntegrityFailure: return "IntegrityFailure";
        case ErrorCode::NotFound: return "NotFound";
        case ErrorCode::Protocol: return "Protocol";
    }
    return "?";
}

Bytes ErrorBody::encode() const {
    Writer w;
    w.u16(static_cast<uint16_t>(code));
    w.str(detail);
    return finish(w);
}

ErrorBody ErrorBody::decode(const Bytes& b) {
    Reader r(b);
    ErrorBody out;
    uint16_t c = r.u16();
    if (c > static_cast<uint16_t>(ErrorCode::Protocol))
        throw CodecError(Err::BadEnumValue, "bad ErrorCode");
    out.code = static_cast<ErrorCode>(c);
    out.detail = r.str();
    r.expect_end();
    return out;
}

void FlowTuple::encode(Writer& w) const {
    w.u8(static_cast<uint8_t>(requestor_role));
    w.str(gateway_id);
    w.u8(static_cast<uint8_t>(mode));
    w.u8(static_cast<uint8_t>(permission));
}

FlowTuple FlowTuple::decode(Reader& r) {
    FlowTuple t;
    t.requestor_role = role_from_u8(r.u8());
    t.gateway_id = r.str();
    t.mode = mode_from_u8(r.u8());
    t.permission = permission_from_u8(r.u8());
    return t;
}

bool FlowTuple::operator<(const FlowTuple& o) const {
    if (requestor_role != o.requestor_role) return requestor_role < o.requestor_role;
    if (gateway_id != o.gateway_id) return gateway_id < o.gateway_id;
    if (mode != o.mode) return mode < o.mode;
    return permission < o.permission;
}

Bytes FlowExportBody::encode() const {
    Writer w;
    w.u32(static_cast<uint32_t>(tuples.size()));
    for (const auto& t : tuples) t.encode(w);
    return finish(w);
}

FlowExportBody FlowExportBody::decode(const Bytes& b) {
    Reader r(b);
    FlowExportBody out;
    uint32_t n = r.u32();
    for (uint32_t i = 0; i < n; ++i) out.tuples.push_back(FlowTuple::decode(r));
    r.expect_end();
    return out;
}

Bytes encode_command_request(const Command& cmd) {
    Writer w;
    w.u8(static_cast<uint8_t>(AppPayloadKind::CommandRequest));
    cmd.encode(w);
    return w.take();
}

Bytes encode_command_response(const CommandResult& result) {
    Writer w;
    w.u8(static_cast<uint8_t>(AppPayloadKind::CommandResponse));
    result.encode(w);
    return w.take();
}

AppPayloadKind decode_app_payload(const Bytes& payload, std::optional<Command>& cmd,
                                  std::optional<CommandResult>& result) {
    Reader r(payload);
    uint8_t k = r.u8();
    if (k == static_cast<uint8_t>(AppPayloadKind::CommandRequest)) {
        cmd = Command::decode(r);
        r.expect_end();
        return AppPayloadKind::CommandRequest;
    }
    if (k == static_cast<uint8_t>(AppPayloadKind::CommandResponse)) {
        result = CommandResult::decode(r);
        r.expect_end();
        return AppPayloadKind::CommandResponse;
    }
    throw CodecError(Err::BadEnumValue, "bad app payload kind");
}

}  // namespace asia
