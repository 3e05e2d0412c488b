#ifndef ASIA_CORE_CRYPTO_HPP
#define ASIA_CORE_CRYPTO_HPP

#include "asia/core/bytes.hpp"

namespace asia::crypto {

// Build-time hash choice, recorded in scenario reports.
constexpr const char* kHashName = "sha256";

Digest sha256(const uint8_t* data, size_t len);
Digest sha256(const Bytes& data);

// Keyed 256-bit MAC used as the reference signature scheme. In this
// simulated PKI the "public" and "private" halves of a key pair are the
// same 32 bytes; verification recomputes the tag. Protocol tests care
// about binding and forgery-within-the-simulation, not real asymmetry.
Bytes hmac_sha256(const Bytes& key, const Bytes& msg);

struct KeyPair {
    Bytes public_key;   // 32 bytes
    Bytes private_key;  // equal to public_key under the MAC scheme
};

class SignatureScheme {
public:
    virtual ~SignatureScheme() = default;
    virtual Bytes sign(const Bytes& private_key, const Bytes& msg) const = 0;
    virtual bool verify(const Bytes& public_key, const Bytes& msg, const Bytes& tag) const = 0;
};

// Reference scheme: tag = HMAC-SHA256(key, msg).
class MacScheme final : public SignatureScheme {
public:
    Bytes sign(const Bytes& private_key, const Bytes& msg) const override;
    bool verify(const Bytes& public_key, const Bytes& msg, const Bytes& tag) const override;
};

const SignatureScheme& scheme();  // process-wide MacScheme instance

}  // namespace asia::crypto

#endif
