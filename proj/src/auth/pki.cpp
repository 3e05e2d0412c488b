#include "asia/auth/pki.hpp"

namespace asia::auth {

Bytes random_key_256(std::mt19937_64& rng) {
    Bytes key(32);
    for (size_t i = 0; i < 32; i += 8) {
        uint64_t v = rng();
        for (int j = 0; j < 8; ++j) key[i + j] = static_cast<uint8_t>(v >> (8 * j));
    }
    return key;
}

CertificateAuthority::CertificateAuthority(std::string name, std::mt19937_64& rng)
    : name_(std::move(name)), rng_(rng) {
    key_.public_key = random_key_256(rng_);
    key_.private_key = key_.public_key;
}

CertCredential CertificateAuthority::issue(const Identity& subject) {
    subject.validate();
    Bytes subject_key = random_key_256(rng_);
    Certificate cert;
    cert.subject = subject;
    cert.public_key = subject_key;
    cert.issuer = name_;
    cert.signature = crypto::scheme().sign(key_.private_key, cert.canonical_tbs());
    return CertCredential{std::move(cert), std::move(subject_key)};
}

bool CertificateAuthority::verify(const Certificate& cert) const {
    return cert.issuer == name_ &&
           crypto::scheme().verify(key_.public_key, cert.canonical_tbs(), cert.signature);
}

CertCheck check_certificate(const Certificate& cert, const TrustAnchors& trust) {
    auto it = trust.issuers.find(cert.issuer);
    if (it == trust.issuers.end()) return CertCheck::UnknownIssuer;
    if (!crypto::scheme().verify(it->second, cert.canonical_tbs(), cert.signature))
        return CertCheck::BadSignature;
    return CertCheck::Ok;
}

}  // namespace asia::auth
