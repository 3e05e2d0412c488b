#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "asia/auth/handshake.hpp"

using namespace asia;
using namespace asia::auth;

namespace {

struct Fixture {
    std::mt19937_64 rng{17};
    CertificateAuthority ca{"ca", rng};
    TrustAnchors trust;
    CertCredential a_cred, b_cred;

    Fixture()
        : a_cred(ca.issue({"dno-1", RoleKind::DistributionNetworkOperator})),
          b_cred(ca.issue({"gw-7", RoleKind::IctGateway})) {
        trust.issuers["ca"] = ca.public_key();
    }
};

// Runs the 3 messages straight through; returns both final states.
void run_handshake(Handshake& init, Handshake& resp) {
    Bytes m1 = init.start();
    auto r1 = resp.on_frame(m1, 100);
    REQUIRE(r1.error == Handshake::Error::None);
    REQUIRE(r1.reply.has_value());
    auto r2 = init.on_frame(*r1.reply, 101);
    REQUIRE(r2.error == Handshake::Error::None);
    REQUIRE(r2.reply.has_value());
    REQUIRE(r2.done);
    auto r3 = resp.on_frame(*r2.reply, 102);
    REQUIRE(r3.error == Handshake::Error::None);
    REQUIRE(r3.done);
}

}  // namespace

TEST_CASE("happy path: both sides cross-name each other and share a key") {
    Fixture f;
    std::set<Bytes> nonces;
    Handshake init(Handshake::Role::Initiator, Credential::from_cert(f.a_cred.cert, f.a_cred.private_key),
                   &f.trust, f.rng);
    Handshake resp(Handshake::Role::Responder, Credential::from_cert(f.b_cred.cert, f.b_cred.private_key),
                   &f.trust, f.rng, &nonces);
    run_handshake(init, resp);

    CHECK(init.peer().peer.id == "gw-7");
    CHECK(resp.peer().peer.id == "dno-1");
    CHECK(init.peer().peer_fingerprint == fingerprint(f.b_cred.cert));
    CHECK(resp.peer().peer_fingerprint == fingerprint(f.a_cred.cert));
    CHECK(init.channel_key() == resp.channel_key());
    CHECK(init.channel_key().size() == 32);
    CHECK(resp.peer().established_at == 102);
}

TEST_CASE("unknown issuer: no channel key") {
    Fixture f;
    std::mt19937_64 other_rng(99);
    CertificateAuthority rogue_ca("rogue", other_rng);
    auto rogue = rogue_ca.issue({"gw-7", RoleKind::IctGateway});

    Handshake init(Handshake::Role::Initiator, Credential::from_cert(f.a_cred.cert, f.a_cred.private_key),
                   &f.trust, f.rng);
    Handshake resp(Handshake::Role::Responder, Credential::from_cert(rogue.cert, rogue.private_key),
                   &f.trust, f.rng);
    Bytes m1 = init.start();
    auto r1 = resp.on_frame(m1, 100);
    REQUIRE(r1.reply.has_value());
    auto r2 = init.on_frame(*r1.reply, 101);
    CHECK(r2.error == Handshake::Error::UnknownIssuer);
    CHECK(!init.done());
    CHECK(init.channel_key().empty());
}

TEST_CASE("responder rejects untrusted initiator") {
    Fixture f;
    std::mt19937_64 other_rng(99);
    CertificateAuthority rogue_ca("rogue", other_rng);
    auto rogue = rogue_ca.issue({"evil", RoleKind::EndUser});

    Handshake init(Handshake::Role::Initiator, Credential::from_cert(rogue.cert, rogue.private_key),
                   &f.trust, f.rng);
    Handshake resp(Handshake::Role::Responder, Credential::from_cert(f.b_cred.cert, f.b_cred.private_key),
                   &f.trust, f.rng);
    auto r1 = resp.on_frame(init.start(), 100);
    CHECK(r1.error == Handshake::Error::UnknownIssuer);
    CHECK(!r1.reply.has_value());
}

TEST_CASE("recorded transcript replayed against a fresh responder is rejected") {
    Fixture f;
    std::set<Bytes> nonces;
    Handshake init(Handshake::Role::Initiator, Credential::from_cert(f.a_cred.cert, f.a_cred.private_key),
                   &f.trust, f.rng);
    Handshake resp(Handshake::Role::Responder, Credential::from_cert(f.b_cred.cert, f.b_cred.private_key),
                   &f.trust, f.rng, &nonces);
    Bytes recorded_m1 = init.start();
    auto r1 = resp.on_frame(recorded_m1, 100);
    auto r2 = init.on_frame(*r1.reply, 101);
    Bytes recorded_m3 = *r2.reply;
    resp.on_frame(recorded_m3, 102);

    // Same session table: M1 replay hits the nonce check.
    Handshake resp2(Handshake::Role::Responder, Credential::from_cert(f.b_cred.cert, f.b_cred.private_key),
                    &f.trust, f.rng, &nonces);
    auto replay1 = resp2.on_frame(recorded_m1, 200);
    CHECK(replay1.error == Handshake::Error::NonceReplay);

    // Fresh session table: M1 passes but the responder's fresh nonce makes
    // the recorded M3 signature invalid.
    std::set<Bytes> nonces2;
    Handshake resp3(Handshake::Role::Responder, Credential::from_cert(f.b_cred.cert, f.b_cred.private_key),
                    &f.trust, f.rng, &nonces2);
    auto fresh1 = resp3.on_frame(recorded_m1, 200);
    REQUIRE(fresh1.error == Handshake::Error::None);
    auto replay3 = resp3.on_frame(recorded_m3, 201);
    CHECK(replay3.error == Handshake::Error::BadSignature);
}

TEST_CASE("preshared key handshake") {
    Fixture f;
    Bytes secret = random_key_256(f.rng);
    f.trust.psks["meter-psk-1"] = secret;

    Handshake init(Handshake::Role::Initiator, Credential::from_psk("meter-psk-1", secret),
                   &f.trust, f.rng);
    Handshake resp(Handshake::Role::Responder, Credential::from_cert(f.b_cred.cert, f.b_cred.private_key),
                   &f.trust, f.rng);
    run_handshake(init, resp);
    CHECK(resp.peer().method == AuthMethod::PresharedKey);
    CHECK(resp.peer().peer_fingerprint == psk_fingerprint("meter-psk-1"));
    CHECK(init.channel_key() == resp.channel_key());
}

TEST_CASE("channel tag covers the whole message") {
    Fixture f;
    Bytes key = random_key_256(f.rng);
    WireMessage m;
    m.msg_type = MsgType::KEEPALIVE;
    m.correlation = 7;
    attach_channel_tag(key, m);
    CHECK(verify_channel_tag(key, m));
    m.correlation = 8;
    CHECK(!verify_channel_tag(key, m));
}

TEST_CASE("app message sign/verify with replay defense") {
    Fixture f;
    Bytes key = random_key_256(f.rng);
    Bytes payload = to_bytes("hello");
    uint64_t last_seen = 0;

    auto m5 = sign_app_message(key, 1, 5, payload);
    Bytes out;
    uint64_t seq = 0;
    CHECK(verify_app_message(key, m5, last_seen, out, seq) == AppVerify::Ok);
    CHECK(out == payload);
    CHECK(seq == 5);

    auto m6 = sign_app_message(key, 1, 6, payload);
    CHECK(verify_app_message(key, m6, last_seen, out, seq) == AppVerify::Ok);

    // Resend of 5 after 6 was seen.
    CHECK(verify_app_message(key, m5, last_seen, out, seq) == AppVerify::ReplayRejected);

    // One flipped payload bit.
    auto m7 = sign_app_message(key, 1, 7, payload);
    m7.body.back() ^= 0x01;
    CHECK(verify_app_message(key, m7, last_seen, out, seq) == AppVerify::TamperDetected);

    // Wrong key entirely.
    Bytes other = random_key_256(f.rng);
    auto m8 = sign_app_message(other, 1, 8, payload);
    CHECK(verify_app_message(key, m8, last_seen, out, seq) == AppVerify::TamperDetected);
}
