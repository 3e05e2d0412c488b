#ifndef ASIA_CORE_BYTES_HPP
#define ASIA_CORE_BYTES_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace asia {

using Bytes = std::vector<uint8_t>;
using Digest = std::array<uint8_t, 32>;

std::string to_hex(const uint8_t* data, size_t len);
std::string to_hex(const Bytes& b);
std::string to_hex(const Digest& d);
Bytes from_hex(const std::string& hex);

inline Bytes to_bytes(const std::string& s) {
    return Bytes(s.begin(), s.end());
}

}  // namespace asia

#endif
