#include "jitcheck/bytes.hpp"

#include <limits>

namespace jitcheck {

namespace {
constexpr char kHexDigits[] = "0123456789abcdef";

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}
}  // namespace

std::string to_hex(ByteView bytes) {
  std::string out;
  out.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    out.push_back(kHexDigits[b >> 4]);
    out.push_back(kHexDigits[b & 0x0f]);
  }
  return out;
}

Bytes from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) throw std::invalid_argument("hex string has odd length");
  Bytes out;
  out.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    const int hi = hex_value(hex[i]);
    const int lo = hex_value(hex[i + 1]);
    if (hi < 0 || lo < 0) throw std::invalid_argument("invalid hex digit");
    out.push_back(static_cast<std::uint8_t>((hi << 4) | lo));
  }
  return out;
}

void ByteWriter::u16(std::uint16_t v) {
  out_.push_back(static_cast<std::uint8_t>(v >> 8));
  out_.push_back(static_cast<std::uint8_t>(v));
}

void ByteWriter::u32(std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
}

void ByteWriter::str8(std::string_view s) { bytes8(as_bytes(s)); }

void ByteWriter::str16(std::string_view s) {
  if (s.size() > std::numeric_limits<std::uint16_t>::max()) throw std::length_error("string exceeds 16-bit length prefix");
  u16(static_cast<std::uint16_t>(s.size()));
  raw(s);
}

void ByteWriter::bytes8(ByteView b) {
  if (b.size() > std::numeric_limits<std::uint8_t>::max()) throw std::length_error("field exceeds 8-bit length prefix");
  u8(static_cast<std::uint8_t>(b.size()));
  raw(b);
}

ByteView ByteReader::take(std::size_t n, std::string_view field) {
  if (remaining() < n) throw DecodeError("truncated " + std::string(field));
  ByteView out = data_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::uint8_t ByteReader::u8(std::string_view field) { return take(1, field)[0]; }

std::uint16_t ByteReader::u16(std::string_view field) {
  auto b = take(2, field);
  return static_cast<std::uint16_t>((b[0] << 8) | b[1]);
}

std::uint32_t ByteReader::u32(std::string_view field) {
  auto b = take(4, field);
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

std::uint64_t ByteReader::u64(std::string_view field) {
  auto b = take(8, field);
  std::uint64_t v = 0;
  for (auto x : b) v = (v << 8) | x;
  return v;
}

ByteView ByteReader::raw(std::size_t n, std::string_view field) { return take(n, field); }

Block16 ByteReader::block16(std::string_view field) {
  auto b = take(16, field);
  Block16 out{};
  std::copy(b.begin(), b.end(), out.begin());
  return out;
}

std::string ByteReader::str8(std::string_view field) {
  const auto n = u8(field);
  auto b = take(n, field);
  return {b.begin(), b.end()};
}

std::string ByteReader::str16(std::string_view field) {
  const auto n = u16(field);
  auto b = take(n, field);
  return {b.begin(), b.end()};
}

Bytes ByteReader::bytes8(std::string_view field) {
  const auto n = u8(field);
  auto b = take(n, field);
  return {b.begin(), b.end()};
}

void ByteReader::expect_end(std::string_view what) const {
  if (!done()) throw DecodeError("trailing bytes after " + std::string(what));
}

}  // namespace jitcheck
