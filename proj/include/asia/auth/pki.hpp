#ifndef ASIA_AUTH_PKI_HPP
#define ASIA_AUTH_PKI_HPP

#include <map>
#include <random>

#include "asia/core/types.hpp"

namespace asia::auth {

// Issuer name -> issuer public key; plus the scenario's shared-key table.
struct TrustAnchors {
    std::map<std::string, Bytes> issuers;
    std::map<std::string, Bytes> psks;  // key id -> 256-bit secret

    bool trusts_issuer(const std::string& name) const { return issuers.count(name) > 0; }
};

// Simulated certificate authority: deterministic key issuance from the
// scenario RNG per identity.
class CertificateAuthority {
public:
    CertificateAuthority(std::string name, std::mt19937_64& rng);

    const std::string& name() const { return name_; }
    const Bytes& public_key() const { return key_.public_key; }

    // Issues a fresh key pair and a certificate over it.
    CertCredential issue(const Identity& subject);
    bool verify(const Certificate& cert) const;

private:
    Bytes random_key();
    std::string name_;
    crypto::KeyPair key_;
    std::mt19937_64& rng_;
};

// Checks issuer trust and the issuer signature.
enum class CertCheck { Ok, UnknownIssuer, BadSignature };
CertCheck check_certificate(const Certificate& cert, const TrustAnchors& trust);

Bytes random_key_256(std::mt19937_64& rng);

}  // namespace asia::auth

#endif
