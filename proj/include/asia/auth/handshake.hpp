#ifndef ASIA_AUTH_HANDSHAKE_HPP
#define ASIA_AUTH_HANDSHAKE_HPP

#include <random>
#include <set>

#include "asia/auth/pki.hpp"
#include "asia/core/wire.hpp"

namespace asia::auth {

enum class AuthMethod : uint8_t { Cert = 0, PresharedKey = 1 };

struct AuthResult {
    Identity peer;
    Digest peer_fingerprint{};
    AuthMethod method = AuthMethod::Cert;
    SimTime established_at = 0;
};

Digest psk_fingerprint(const std::string& key_id);

// Three-message signed challenge-response. Both sides end up with an
// AuthResult naming the other and a shared 256-bit channel key:
//   M1 i->r: credential_i, nonce_i
//   M2 r->i: credential_r, nonce_r, sig_r("HS2" | transcript)
//   M3 i->r: sig_i("HS3" | transcript)
// transcript = nonce_i | nonce_r | fp_i | fp_r. Frames are a distinct
// pre-authentication encoding, not WireMessages.
class Handshake {
public:
    enum class Role { Initiator, Responder };
    enum class Error { None, UnknownIssuer, BadSignature, NonceReplay, UnknownPsk, Protocol };

    // seen_nonces: per-responder session table for replay detection; may be null.
    Handshake(Role role, Credential local, const TrustAnchors* trust, std::mt19937_64& rng,
              std::set<Bytes>* seen_nonces = nullptr);

    Bytes start();  // initiator only: produces M1

    struct StepResult {
        std::optional<Bytes> reply;
        bool done = false;
        Error error = Error::None;
    };
    StepResult on_frame(const Bytes& frame, SimTime now);

    bool done() const { return done_; }
    const AuthResult& peer() const { return peer_; }
    const Bytes& channel_key() const { return channel_key_; }

    static const char* error_name(Error e);
    static bool looks_like_handshake(const Bytes& frame);

private:
    Bytes local_credential_frame_part() const;
    Digest local_fingerprint() const;
    Bytes signing_key() const;
    StepResult fail(Error e);
    Bytes transcript() const;
    void derive_key();

    Role role_;
    Credential local_;
    const TrustAnchors* trust_;
    std::mt19937_64& rng_;
    std::set<Bytes>* seen_nonces_;

    int stage_ = 0;  // frames processed
    bool done_ = false;
    Bytes nonce_i_, nonce_r_;
    Digest fp_i_{}, fp_r_{};
    Bytes peer_verify_key_;
    AuthResult peer_;
    Bytes channel_key_;
};

// Channel-layer integrity: every WireMessage after the handshake carries
// auth_tag = HMAC(channel_key, tag_input).
Bytes channel_tag(const Bytes& channel_key, const WireMessage& msg);
void attach_channel_tag(const Bytes& channel_key, WireMessage& msg);
bool verify_channel_tag(const Bytes& channel_key, const WireMessage& msg);

// End-to-end application message integrity with per-session replay defense.
enum class AppVerify { Ok, TamperDetected, ReplayRejected };
const char* app_verify_name(AppVerify v);

WireMessage sign_app_message(const Bytes& channel_key, uint64_t correlation, uint64_t sequence,
                             const Bytes& payload);
// On Ok, advances last_seen_sequence and fills payload/sequence outputs.
AppVerify verify_app_message(const Bytes& channel_key, const WireMessage& msg,
                             uint64_t& last_seen_sequence, Bytes& payload_out,
                             uint64_t& sequence_out);

}  // namespace asia::auth

#endif
