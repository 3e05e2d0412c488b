#ifndef ASIA_PROTO_SECURE_CHANNEL_HPP
#define ASIA_PROTO_SECURE_CHANNEL_HPP

#include <functional>

#include "asia/auth/handshake.hpp"

namespace asia::proto {

// Mutual authentication plus channel-tagged messaging over any ordered
// frame transport: a simulated connection, or PROXY_DATA tunneling through
// the broker relay. Feed raw inbound frames to on_lower_frame(); outbound
// frames leave through the send function given to attach().
class SecureChannel {
public:
    using SendFn = std::function<void(Bytes)>;

    SecureChannel(auth::Handshake::Role role, Credential local, const auth::TrustAnchors* trust,
                  std::mt19937_64& rng, std::set<Bytes>* seen_nonces = nullptr);

    // Wires the transport; an initiator emits the first handshake frame here.
    void attach(SendFn lower_send, SimTime now);
    void on_lower_frame(const Bytes& frame, SimTime now);

    bool ready() const { return ready_; }
    bool failed() const { return failed_; }
    const auth::AuthResult& peer() const { return handshake_.peer(); }
    const Bytes& channel_key() const { return handshake_.channel_key(); }

    // Attaches the channel tag and sends; only valid once ready.
    void send(WireMessage msg);
    // Verbatim passthrough for pre-framed bytes (proxy relay use).
    void send_raw(Bytes frame) { lower_send_(std::move(frame)); }

    std::function<void()> on_ready;
    std::function<void(const WireMessage&)> on_message;
    // Handshake or tag verification failure; the channel is dead after this.
    std::function<void(const std::string& reason)> on_fail;

private:
    void fail(const std::string& reason);

    auth::Handshake handshake_;
    bool initiator_ = false;
    SendFn lower_send_;
    bool ready_ = false;
    bool failed_ = false;
};

}  // namespace asia::proto

#endif
