#ifndef ASIA_CORE_CODEC_HPP
#define ASIA_CORE_CODEC_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "asia/core/bytes.hpp"

namespace asia::codec {

// Canonical encoding: integers big-endian; strings as u16 length + UTF-8;
// optionals as presence byte 0x00/0x01 followed by the value.

enum class Err {
    Truncated,
    UnknownMsgType,
    UnknownVersion,
    NonCanonical,
    OversizeMessage,
    BadEnumValue,
};

const char* err_name(Err e);

class CodecError : public std::runtime_error {
public:
    CodecError(Err code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    Err code() const { return code_; }

private:
    Err code_;
};

class Writer {
public:
    void u8(uint8_t v);
    void u16(uint16_t v);
    void u32(uint32_t v);
    void u64(uint64_t v);
    void i64(int64_t v);
    void str(const std::string& s);         // u16 length prefix
    void bytes16(const Bytes& b);           // u16 length prefix
    void bytes32(const Bytes& b);           // u32 length prefix
    void raw(const Bytes& b);               // no prefix
    void raw(const uint8_t* p, size_t n);
    void digest(const Digest& d);

    template <typename F>
    void optional(bool present, F&& write_value) {
        u8(present ? 1 : 0);
        if (present) write_value();
    }

    const Bytes& data() const { return buf_; }
    Bytes take() { return std::move(buf_); }

private:
    Bytes buf_;
};

class Reader {
public:
    explicit Reader(const Bytes& data) : data_(data) {}

    uint8_t u8();
    uint16_t u16();
    uint32_t u32();
    uint64_t u64();
    int64_t i64();
    std::string str();
    Bytes bytes16();
    Bytes bytes32();
    Bytes raw(size_t n);
    Digest digest();
    bool presence();  // 0x00/0x01, anything else is NonCanonical

    size_t remaining() const { return data_.size() - pos_; }
    // Whole input must be consumed; leftovers mean a non-canonical frame.
    void expect_end() const;

private:
    void need(size_t n) const;
    const Bytes& data_;
    size_t pos_ = 0;
};

}  // namespace asia::codec

#endif
