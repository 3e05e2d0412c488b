#ifndef ASIA_AUTH_TOKEN_HPP
#define ASIA_AUTH_TOKEN_HPP

#include <random>

#include "asia/auth/pki.hpp"
#include "asia/core/types.hpp"

namespace asia::auth {

constexpr SimTime kDefaultTokenTtlMs = 60'000;

struct SoftwareToken {
    Identity issuer;                // the ASIA server
    Identity requestor;
    Digest requestor_fingerprint{};
    Identity gateway;
    Digest gateway_fingerprint{};
    Tan tan;
    Mode mode = Mode::Invocation;
    PermissionSet permissions;
    SimTime issued_at = 0;
    SimTime expires_at = 0;         // exclusive: valid iff now < expires_at
    Bytes signature;                // over canonical encoding of all prior fields

    Bytes canonical_claims() const;
    Bytes encode() const;
    static SoftwareToken decode(const Bytes& b);
    std::string hex() const;
    bool operator==(const SoftwareToken&) const = default;
};

// 128 random non-zero bits from the scenario RNG.
Tan generate_tan(std::mt19937_64& rng);

struct TokenRequest {
    Identity requestor;
    Digest requestor_fingerprint{};
    Identity gateway;
    Digest gateway_fingerprint{};
    Mode mode = Mode::Invocation;
    PermissionSet permissions;
    Tan tan;
};

SoftwareToken issue_token(const Identity& issuer, const Bytes& issuer_key, const TokenRequest& req,
                          SimTime now, SimTime ttl = kDefaultTokenTtlMs);

enum class TokenStatus { Valid, BadSignature, Expired, WrongGateway, UntrustedIssuer };
const char* token_status_name(TokenStatus s);

TokenStatus verify_token(const SoftwareToken& token, const TrustAnchors& trust,
                         const std::string& expected_gateway_id, SimTime now);

}  // namespace asia::auth

#endif
