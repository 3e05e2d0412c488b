#include "asia/auth/token.hpp"

#include <stdexcept>

namespace asia::auth {

using codec::Reader;
using codec::Writer;

Bytes SoftwareToken::canonical_claims() const {
    Writer w;
    issuer.encode(w);
    requestor.encode(w);
    w.digest(requestor_fingerprint);
    gateway.encode(w);
    w.digest(gateway_fingerprint);
    tan.encode(w);
    w.u8(static_cast<uint8_t>(mode));
    w.u8(permissions.bits());
    w.u64(issued_at);
    w.u64(expires_at);
    return w.take();
}

Bytes SoftwareToken::encode() const {
    Writer w;
    w.raw(canonical_claims());
    w.bytes16(signature);
    return w.take();
}

SoftwareToken SoftwareToken::decode(const Bytes& b) {
    Reader r(b);
    SoftwareToken t;
    t.issuer = Identity::decode(r);
    t.requestor = Identity::decode(r);
    t.requestor_fingerprint = r.digest();
    t.gateway = Identity::decode(r);
    t.gateway_fingerprint = r.digest();
    t.tan = Tan::decode(r);
    t.mode = mode_from_u8(r.u8());
    t.permissions = PermissionSet::from_bits(r.u8());
    t.issued_at = r.u64();
    t.expires_at = r.u64();
    t.signature = r.bytes16();
    r.expect_end();
    return t;
}

std::string SoftwareToken::hex() const { return to_hex(encode()); }

Tan generate_tan(std::mt19937_64& rng) {
    Tan t;
    do {
        for (size_t i = 0; i < 16; i += 8) {
            uint64_t v = rng();
            for (int j = 0; j < 8; ++j) t.value[i + j] = static_cast<uint8_t>(v >> (8 * j));
        }
    } while (t.is_zero());
    return t;
}

SoftwareToken issue_token(const Identity& issuer, const Bytes& issuer_key, const TokenRequest& req,
                          SimTime now, SimTime ttl) {
    if (ttl == 0) throw std::invalid_argument("token ttl must be positive");
    SoftwareToken t;
    t.issuer = issuer;
    t.requestor = req.requestor;
    t.requestor_fingerprint = req.requestor_fingerprint;
    t.gateway = req.gateway;
    t.gateway_fingerprint = req.gateway_fingerprint;
    t.tan = req.tan;
    t.mode = req.mode;
    t.permissions = req.permissions;
    t.issued_at = now;
    t.expires_at = now + ttl;
    t.signature = crypto::scheme().sign(issuer_key, t.canonical_claims());
    return t;
}

const char* token_status_name(TokenStatus s) {
    switch (s) {
        case TokenStatus::Valid: return "Valid";
        case TokenStatus::BadSignature: return "BadSignature";
        case TokenStatus::Expired: return "Expired";
        case TokenStatus::WrongGateway: return "WrongGateway";
        case TokenStatus::UntrustedIssuer: return "UntrustedIssuer";
    }
    return "?";
}

TokenStatus verify_token(const SoftwareToken& token, const TrustAnchors& trust,
                         const std::string& expected_gateway_id, SimTime now) {
    auto it = trust.issuers.find(token.issuer.id);
    if (it == trust.issuers.end()) return TokenStatus::UntrustedIssuer;
    if (!crypto::scheme().verify(it->second, token.canonical_claims(), token.signature))
        return TokenStatus::BadSignature;
    if (now >= token.expires_at) return TokenStatus::Expired;
    if (token.gateway.id != expected_gateway_id) return TokenStatus::WrongGateway;
    return TokenStatus::Valid;
}

}  // namespace asia::auth
