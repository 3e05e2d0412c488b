#include "asia/core/crypto.hpp"

#include <openssl/hmac.h>
#include <openssl/sha.h>

namespace asia::crypto {

Digest sha256(const uint8_t* data, size_t len) {
    Digest d{};
    SHA256(data, len, d.data());
    return d;
}

Digest sha256(const Bytes& data) { return sha256(data.data(), data.size()); }

Bytes hmac_sha256(const Bytes& key, const Bytes& msg) {
    unsigned char out[32];
    unsigned int out_len = 0;
    HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), msg.data(), msg.size(), out,
         &out_len);
    return Bytes(out, out + out_len);
}

Bytes MacScheme::sign(const Bytes& private_key, const Bytes& msg) const {
    return hmac_sha256(private_key, msg);
}

bool MacScheme::verify(const Bytes& public_key, const Bytes& msg, const Bytes& tag) const {
    return hmac_sha256(public_key, msg) == tag;
}

const SignatureScheme& scheme() {
    static MacScheme s;
    return s;
}

}  // namespace asia::crypto
