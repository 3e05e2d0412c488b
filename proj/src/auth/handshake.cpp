#include "asia/auth/handshake.hpp"

namespace asia::auth {

using codec::Reader;
using codec::Writer;

static constexpr uint8_t kHandshakeMagic = 0xA5;

Digest psk_fingerprint(const std::string& key_id) {
    Bytes input = to_bytes("psk:" + key_id);
    return crypto::sha256(input);
}

static Bytes nonce32(std::mt19937_64& rng) { return random_key_256(rng); }

Handshake::Handshake(Role role, Credential local, const TrustAnchors* trust,
                     std::mt19937_64& rng, std::set<Bytes>* seen_nonces)
    : role_(role), local_(std::move(local)), trust_(trust), rng_(rng), seen_nonces_(seen_nonces) {}

Digest Handshake::local_fingerprint() const {
    if (local_.is_cert()) return fingerprint(local_.cert->cert);
    return psk_fingerprint(local_.psk->key_id);
}

Bytes Handshake::signing_key() const {
    if (local_.is_cert()) return local_.cert->private_key;
    return local_.psk->secret;
}

Bytes Handshake::local_credential_frame_part() const {
    Writer w;
    if (local_.is_cert()) {
        w.u8(static_cast<uint8_t>(AuthMethod::Cert));
        local_.cert->cert.encode(w);
    } else {
        w.u8(static_cast<uint8_t>(AuthMethod::PresharedKey));
        Identity id{local_.psk->key_id, RoleKind::EndUser};
        id.encode(w);
        w.str(local_.psk->key_id);
    }
    return w.take();
}

Bytes Handshake::start() {
    if (role_ != Role::Initiator || stage_ != 0) throw std::logic_error("handshake start misuse");
    nonce_i_ = nonce32(rng_);
    fp_i_ = local_fingerprint();
    Writer w;
    w.u8(kHandshakeMagic);
    w.u8(1);
    w.raw(local_credential_frame_part());
    w.bytes16(nonce_i_);
    stage_ = 1;
    return w.take();
}

bool Handshake::looks_like_handshake(const Bytes& frame) {
    return !frame.empty() && frame[0] == kHandshakeMagic;
}

const char* Handshake::error_name(Error e) {
    switch (e) {
        case Error::None: return "None";
        case Error::UnknownIssuer: return "UnknownIssuer";
        case Error::BadSignature: return "BadSignature";
        case Error::NonceReplay: return "NonceReplay";
        case Error::UnknownPsk: return "UnknownPsk";
        case Error::Protocol: return "Protocol";
    }
    return "?";
}

Handshake::StepResult Handshake::fail(Error e) {
    StepResult r;
    r.error = e;
    return r;
}

Bytes Handshake::transcript() const {
    Writer w;
    w.bytes16(nonce_i_);
    w.bytes16(nonce_r_);
    w.digest(fp_i_);
    w.digest(fp_r_);
    return w.take();
}

static Bytes tagged(const char* tag, const Bytes& transcript) {
    Bytes out = to_bytes(tag);
    out.insert(out.end(), transcript.begin(), transcript.end());
    return out;
}

void Handshake::derive_key() {
    channel_key_.assign(32, 0);
    Digest d = crypto::sha256(tagged("KEY", transcript()));
    std::copy(d.begin(), d.end(), channel_key_.begin());
}

// Reads a credential announcement; fills peer identity/fingerprint and the
// key to verify the peer's handshake signature with.
namespace {
struct PeerCred {
    Identity identity;
    Digest fp{};
    Bytes verify_key;
    AuthMethod method = AuthMethod::Cert;
    Handshake::Error error = Handshake::Error::None;
};
}  // namespace

static PeerCred read_peer_credential(Reader& r, const TrustAnchors& trust) {
    PeerCred out;
    uint8_t method = r.u8();
    if (method == static_cast<uint8_t>(AuthMethod::Cert)) {
        Certificate cert = Certificate::decode(r);
        switch (check_certificate(cert, trust)) {
            case CertCheck::UnknownIssuer: out.error = Handshake::Error::UnknownIssuer; return out;
            case CertCheck::BadSignature: out.error = Handshake::Error::BadSignature; return out;
            case CertCheck::Ok: break;
        }
        out.identity = cert.subject;
        out.fp = fingerprint(cert);
        out.verify_key = cert.public_key;
        out.method = AuthMethod::Cert;
    } else if (method == static_cast<uint8_t>(AuthMethod::PresharedKey)) {
        Identity id = Identity::decode(r);
        std::string key_id = r.str();
        auto it = trust.psks.find(key_id);
        if (it == trust.psks.end()) {
            out.error = Handshake::Error::UnknownPsk;
            return out;
        }
        out.identity = id;
        out.fp = psk_fingerprint(key_id);
        out.verify_key = it->second;
        out.method = AuthMethod::PresharedKey;
    } else {
        out.error = Handshake::Error::Protocol;
    }
    return out;
}

Handshake::StepResult Handshake::on_frame(const Bytes& frame, SimTime now) {
    try {
        Reader r(frame);
        if (r.u8() != kHandshakeMagic) return fail(Error::Protocol);
        uint8_t stage = r.u8();

        if (role_ == Role::Responder && stage == 1 && stage_ == 0) {
            PeerCred pc = read_peer_credential(r, *trust_);
            if (pc.error != Error::None) return fail(pc.error);
            nonce_i_ = r.bytes16();
            r.expect_end();
            if (seen_nonces_) {
                if (seen_nonces_->count(nonce_i_)) return fail(Error::NonceReplay);
                seen_nonces_->insert(nonce_i_);
            }
            fp_i_ = pc.fp;
            peer_.peer = pc.identity;
            peer_.peer_fingerprint = pc.fp;
            peer_.method = pc.method;
            peer_verify_key_ = pc.verify_key;
            nonce_r_ = nonce32(rng_);
            fp_r_ = local_fingerprint();

            Writer w;
            w.u8(kHandshakeMagic);
            w.u8(2);
            w.raw(local_credential_frame_part());
            w.bytes16(nonce_r_);
            w.bytes16(crypto::scheme().sign(signing_key(), tagged("HS2", transcript())));
            stage_ = 2;
            StepResult res;
            res.reply = w.take();
            return res;
        }

        if (role_ == Role::Initiator && stage == 2 && stage_ == 1) {
            PeerCred pc = read_peer_credential(r, *trust_);
            if (pc.error != Error::None) return fail(pc.error);
            nonce_r_ = r.bytes16();
            Bytes sig = r.bytes16();
            r.expect_end();
            fp_r_ = pc.fp;
            if (!crypto::scheme().verify(pc.verify_key, tagged("HS2", transcript()), sig))
                return fail(Error::BadSignature);
            peer_.peer = pc.identity;
            peer_.peer_fingerprint = pc.fp;
            peer_.method = pc.method;
            peer_.established_at = now;
            derive_key();
            done_ = true;
            stage_ = 3;

            Writer w;
            w.u8(kHandshakeMagic);
            w.u8(3);
            w.bytes16(crypto::scheme().sign(signing_key(), tagged("HS3", transcript())));
            StepResult res;
            res.reply = w.take();
            res.done = true;
            return res;
        }

        if (role_ == Role::Responder && stage == 3 && stage_ == 2) {
            Bytes sig = r.bytes16();
            r.expect_end();
            if (!crypto::scheme().verify(peer_verify_key_, tagged("HS3", transcript()), sig))
                return fail(Error::BadSignature);
            peer_.established_at = now;
            derive_key();
            done_ = true;
            stage_ = 4;
            StepResult res;
            res.done = true;
            return res;
        }
        return fail(Error::Protocol);
    } catch (const codec::CodecError&) {
        return fail(Error::Protocol);
    }
}

// ---------------------------------------------------------------------------
// Channel tags and application messages
// ---------------------------------------------------------------------------

Bytes channel_tag(const Bytes& channel_key, const WireMessage& msg) {
    return crypto::hmac_sha256(channel_key, msg.tag_input());
}

void attach_channel_tag(const Bytes& channel_key, WireMessage& msg) {
    msg.auth_tag = channel_tag(channel_key, msg);
}

bool verify_channel_tag(const Bytes& channel_key, const WireMessage& msg) {
    return msg.auth_tag == channel_tag(channel_key, msg);
}

const char* app_verify_name(AppVerify v) {
    switch (v) {
        case AppVerify::Ok: return "Ok";
        case AppVerify::TamperDetected: return "TamperDetected";
        case AppVerify::ReplayRejected: return "ReplayRejected";
    }
    return "?";
}

WireMessage sign_app_message(const Bytes& channel_key, uint64_t correlation, uint64_t sequence,
                             const Bytes& payload) {
    WireMessage msg;
    msg.msg_type = MsgType::APP_DATA;
    msg.correlation = correlation;
    msg.body = AppDataBody{sequence, payload}.encode();
    attach_channel_tag(channel_key, msg);
    return msg;
}

AppVerify verify_app_message(const Bytes& channel_key, const WireMessage& msg,
                             uint64_t& last_seen_sequence, Bytes& payload_out,
                             uint64_t& sequence_out) {
    if (!verify_channel_tag(channel_key, msg)) return AppVerify::TamperDetected;
    AppDataBody body;
    try {
        body = AppDataBody::decode(msg.body);
    } catch (const codec::CodecError&) {
        return AppVerify::TamperDetected;
    }
    if (body.sequence <= last_seen_sequence) return AppVerify::ReplayRejected;
    last_seen_sequence = body.sequence;
    payload_out = body.payload;
    sequence_out = body.sequence;
    return AppVerify::Ok;
}

}  // namespace asia::auth
