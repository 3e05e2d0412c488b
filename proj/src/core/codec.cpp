#include "asia/core/codec.hpp"

namespace asia::codec {

const char* err_name(Err e) {
    switch (e) {
        case Err::Truncated: return "Truncated";
        case Err::UnknownMsgType: return "UnknownMsgType";
        case Err::UnknownVersion: return "UnknownVersion";
        case Err::NonCanonical: return "NonCanonical";
        case Err::OversizeMessage: return "OversizeMessage";
        case Err::BadEnumValue: return "BadEnumValue";
    }
    return "?";
}

void Writer::u8(uint8_t v) { buf_.push_back(v); }

void Writer::u16(uint16_t v) {
    buf_.push_back(static_cast<uint8_t>(v >> 8));
    buf_.push_back(static_cast<uint8_t>(v));
}

void Writer::u32(uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) buf_.push_back(static_cast<uint8_t>(v >> s));
}

void Writer::u64(uint64_t v) {
    for (int s = 56; s >= 0; s -= 8) buf_.push_back(static_cast<uint8_t>(v >> s));
}

void Writer::i64(int64_t v) { u64(static_cast<uint64_t>(v)); }

void Writer::str(const std::string& s) {
    if (s.size() > 0xffff) throw CodecError(Err::OversizeMessage, "string too long");
    u16(static_cast<uint16_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
}

void Writer::bytes16(const Bytes& b) {
    if (b.size() > 0xffff) throw CodecError(Err::OversizeMessage, "bytes16 too long");
    u16(static_cast<uint16_t>(b.size()));
    buf_.insert(buf_.end(), b.begin(), b.end());
}

void Writer::bytes32(const Bytes& b) {
    u32(static_cast<uint32_t>(b.size()));
    buf_.insert(buf_.end(), b.begin(), b.end());
}

void Writer::raw(const Bytes& b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
void Writer::raw(const uint8_t* p, size_t n) { buf_.insert(buf_.end(), p, p + n); }
void Writer::digest(const Digest& d) { buf_.insert(buf_.end(), d.begin(), d.end()); }

void Reader::need(size_t n) const {
    if (pos_ + n > data_.size()) throw CodecError(Err::Truncated, "input truncated");
}

uint8_t Reader::u8() {
    need(1);
    return data_[pos_++];
}

uint16_t Reader::u16() {
    need(2);
    uint16_t v = static_cast<uint16_t>((data_[pos_] << 8) | data_[pos_ + 1]);
    pos_ += 2;
    return v;
}

uint32_t Reader::u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | data_[pos_ + i];
    pos_ += 4;
    return v;
}

uint64_t Reader::u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | data_[pos_ + i];
    pos_ += 8;
    return v;
}

int64_t Reader::i64() { return static_cast<int64_t>(u64()); }

std::string Reader::str() {
    uint16_t n = u16();
    need(n);
    std::string s(data_.begin() + pos_, data_.begin() + pos_ + n);
    pos_ += n;
    return s;
}

Bytes Reader::bytes16() {
    uint16_t n = u16();
    return raw(n);
}

Bytes Reader::bytes32() {
    uint32_t n = u32();
    return raw(n);
}

Bytes Reader::raw(size_t n) {
    need(n);
    Bytes b(data_.begin() + pos_, data_.begin() + pos_ + n);
    pos_ += n;
    return b;
}

Digest Reader::digest() {
    need(32);
    Digest d;
    std::copy(data_.begin() + pos_, data_.begin() + pos_ + 32, d.begin());
    pos_ += 32;
    return d;
}

bool Reader::presence() {
    uint8_t v = u8();
    if (v > 1) throw CodecError(Err::NonCanonical, "bad presence byte");
    return v == 1;
}

void Reader::expect_end() const {
    if (pos_ != data_.size()) throw CodecError(Err::NonCanonical, "trailing bytes");
}

}  // namespace asia::codec
