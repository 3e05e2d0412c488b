#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>

#include "asia/auth/token.hpp"

using namespace asia;
using namespace asia::auth;

namespace {

struct Fixture {
    std::mt19937_64 rng{42};
    CertificateAuthority ca{"ca", rng};
    TrustAnchors trust;
    Identity broker_id{"asia", RoleKind::GatewayOperator};
    CertCredential broker_cred;
    CertCredential dno_cred;
    CertCredential gw_cred;

    Fixture()
        : broker_cred(ca.issue(broker_id)),
          dno_cred(ca.issue({"dno-1", RoleKind::DistributionNetworkOperator})),
          gw_cred(ca.issue({"gw-7", RoleKind::IctGateway})) {
        trust.issuers["ca"] = ca.public_key();
        trust.issuers["asia"] = broker_cred.cert.public_key;
    }

    SoftwareToken make_token(SimTime now = 1000, SimTime ttl = kDefaultTokenTtlMs) {
        TokenRequest req;
        req.requestor = dno_cred.cert.subject;
        req.requestor_fingerprint = fingerprint(dno_cred.cert);
        req.gateway = gw_cred.cert.subject;
        req.gateway_fingerprint = fingerprint(gw_cred.cert);
        req.mode = Mode::Invocation;
        req.permissions = PermissionSet{Permission::IssueCommand};
        req.tan = generate_tan(rng);
        return issue_token(broker_id, broker_cred.private_key, req, now, ttl);
    }
};

}  // namespace

TEST_CASE("fingerprint deterministic and stable across re-decode") {
    Fixture f;
    CHECK(fingerprint(f.gw_cred.cert) == fingerprint(f.gw_cred.cert));

    codec::Writer w;
    f.gw_cred.cert.encode(w);
    Bytes enc = w.take();
    codec::Reader r(enc);
    Certificate back = Certificate::decode(r);
    CHECK(fingerprint(back) == fingerprint(f.gw_cred.cert));
}

TEST_CASE("certs differing only in public key have different fingerprints") {
    Fixture f;
    Certificate a = f.gw_cred.cert;
    Certificate b = a;
    b.public_key[0] ^= 0x01;
    CHECK(fingerprint(a) != fingerprint(b));
}

TEST_CASE("no fingerprint collisions among 100000 generated certs") {
    std::mt19937_64 rng(7);
    CertificateAuthority ca("ca", rng);
    std::set<Digest> seen;
    for (int i = 0; i < 100000; ++i) {
        auto cred = ca.issue({"n" + std::to_string(i), RoleKind::EndUser});
        auto [_, inserted] = seen.insert(fingerprint(cred.cert));
        CHECK(inserted);
    }
}

TEST_CASE("certificate verification against trust anchors") {
    Fixture f;
    CHECK(check_certificate(f.gw_cred.cert, f.trust) == CertCheck::Ok);

    Certificate unknown = f.gw_cred.cert;
    unknown.issuer = "someone-else";
    CHECK(check_certificate(unknown, f.trust) == CertCheck::UnknownIssuer);

    Certificate forged = f.gw_cred.cert;
    forged.signature[0] ^= 0x01;
    CHECK(check_certificate(forged, f.trust) == CertCheck::BadSignature);
}

TEST_CASE("tan generation: deterministic under seeding, nonzero, distinct") {
    std::mt19937_64 a(123), b(123);
    for (int i = 0; i < 100; ++i) CHECK(generate_tan(a) == generate_tan(b));

    std::mt19937_64 rng(9);
    std::set<Tan> seen;
    for (int i = 0; i < 1'000'000; ++i) {
        Tan t = generate_tan(rng);
        CHECK(!t.is_zero());
        auto [_, inserted] = seen.insert(t);
        if (!inserted) FAIL("TAN collision at iteration ", i);
    }
}

TEST_CASE("token issue then verify round trip") {
    Fixture f;
    auto tok = f.make_token(1000);
    CHECK(verify_token(tok, f.trust, "gw-7", 1001) == TokenStatus::Valid);
    CHECK(verify_token(tok, f.trust, "gw-7", 1000) == TokenStatus::Valid);  // freshly issued

    auto back = SoftwareToken::decode(tok.encode());
    CHECK(back == tok);
    CHECK(verify_token(back, f.trust, "gw-7", 1001) == TokenStatus::Valid);
}

TEST_CASE("token expiry is exclusive and monotone") {
    Fixture f;
    auto tok = f.make_token(1000, 60'000);
    CHECK(verify_token(tok, f.trust, "gw-7", 60'999) == TokenStatus::Valid);
    CHECK(verify_token(tok, f.trust, "gw-7", 61'000) == TokenStatus::Expired);
    for (SimTime t = 61'000; t < 61'100; ++t)
        CHECK(verify_token(tok, f.trust, "gw-7", t) == TokenStatus::Expired);
}

TEST_CASE("token binding checks") {
    Fixture f;
    auto tok = f.make_token();
    CHECK(verify_token(tok, f.trust, "gw-9", 1001) == TokenStatus::WrongGateway);

    TrustAnchors empty;
    CHECK(verify_token(tok, empty, "gw-7", 1001) == TokenStatus::UntrustedIssuer);
}

// Exhaustive per-field mutation: flipping one bit of any claim invalidates
// the signature.
TEST_CASE("token unforgeability under per-field mutation") {
    Fixture f;
    auto tok = f.make_token();
    auto expect_invalid = [&](SoftwareToken t, const char* which) {
        auto st = verify_token(t, f.trust, t.gateway.id, 1001);
        if (st == TokenStatus::Valid) FAIL("mutation not detected: ", which);
    };

    {
        auto t = tok;
        t.issuer.id = "asib";
        expect_invalid(t, "issuer");
    }
    {
        auto t = tok;
        t.requestor.id += "x";
        expect_invalid(t, "requestor");
    }
    {
        auto t = tok;
        t.requestor_fingerprint[0] ^= 1;
        expect_invalid(t, "requestor_fingerprint");
    }
    {
        auto t = tok;
        t.gateway.id = "gw-8";
        expect_invalid(t, "gateway");
    }
    {
        auto t = tok;
        t.gateway_fingerprint[31] ^= 1;
        expect_invalid(t, "gateway_fingerprint");
    }
    {
        auto t = tok;
        t.tan.value[5] ^= 1;
        expect_invalid(t, "tan");
    }
    {
        auto t = tok;
        t.mode = Mode::Proxy;
        expect_invalid(t, "mode");
    }
    {
        auto t = tok;
        t.permissions = PermissionSet{Permission::ChangeConfiguration};
        expect_invalid(t, "permissions");
    }
    {
        auto t = tok;
        t.issued_at += 1;
        expect_invalid(t, "issued_at");
    }
    {
        auto t = tok;
        t.expires_at += 1;
        expect_invalid(t, "expires_at");
    }
    {
        auto t = tok;
        t.signature[3] ^= 1;
        expect_invalid(t, "signature");
    }
}

TEST_CASE("token ttl boundary: verify at exactly now+ttl is Expired") {
    Fixture f;
    auto tok = f.make_token(5000, 60'000);
    CHECK(verify_token(tok, f.trust, "gw-7", 65'000) == TokenStatus::Expired);
}
