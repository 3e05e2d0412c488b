#include "asia/proto/secure_channel.hpp"

namespace asia::proto {

SecureChannel::SecureChannel(auth::Handshake::Role role, Credential local,
                             const auth::TrustAnchors* trust, std::mt19937_64& rng,
                             std::set<Bytes>* seen_nonces)
    : handshake_(role, std::move(local), trust, rng, seen_nonces), initiator_(role == auth::Handshake::Role::Initiator) {}

void SecureChannel::attach(SendFn lower_send, SimTime) {
    lower_send_ = std::move(lower_send);
    if (initiator_) lower_send_(handshake_.start());
}

void SecureChannel::on_lower_frame(const Bytes& frame, SimTime now) {
    if (failed_) return;
    if (!ready_) {
        auto step = handshake_.on_frame(frame, now);
        if (step.error != auth::Handshake::Error::None) {
            fail(auth::Handshake::error_name(step.error));
            return;
        }
        if (step.reply) lower_send_(std::move(*step.reply));
        if (step.done) {
            ready_ = true;
            if (on_ready) on_ready();
        }
        return;
    }
    WireMessage msg;
    try {
        msg = decode_message(frame);
    } catch (const codec::CodecError& e) {
        fail(std::string("Codec:") + e.what());
        return;
    }
    // APP_DATA integrity is the application layer's job (verify_app_message
    // with replay defense); everything else must carry a valid channel tag.
    if (msg.msg_type != MsgType::APP_DATA &&
        !auth::verify_channel_tag(handshake_.channel_key(), msg)) {
        fail("BadChannelTag");
        return;
    }
    if (on_message) on_message(msg);
}

void SecureChannel::send(WireMessage msg) {
    auth::attach_channel_tag(handshake_.channel_key(), msg);
    lower_send_(encode_message(msg));
}

void SecureChannel::fail(const std::string& reason) {
    failed_ = true;
    if (on_fail) on_fail(reason);
}

}  // namespace asia::proto
