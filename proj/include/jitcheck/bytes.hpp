#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace jitcheck {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

/// 16-byte digest, nonce or key. Raw bytes internally; lowercase hex at the edges.
using Block16 = std::array<std::uint8_t, 16>;
using Digest = Block16;

std::string to_hex(ByteView bytes);
inline std::string to_hex(const Block16& b) { return to_hex(ByteView(b)); }

/// Throws std::invalid_argument on odd length or non-hex characters.
Bytes from_hex(std::string_view hex);

inline ByteView as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

/// Thrown by ByteReader and every decode_* function. The message names the
/// offending field ("truncated header", "unknown version", ...).
class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Big-endian append-only writer.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void raw(ByteView bytes) { out_.insert(out_.end(), bytes.begin(), bytes.end()); }
  void raw(std::string_view s) { raw(as_bytes(s)); }

  // Length-prefixed fields. Throw std::length_error if the value does not fit
  // the prefix width.
  void str8(std::string_view s);
  void str16(std::string_view s);
  void bytes8(ByteView b);

  const Bytes& bytes() const& { return out_; }
  Bytes take() && { return std::move(out_); }

 private:
  Bytes out_;
};

/// Big-endian cursor over a borrowed buffer. Each read names the field it is
/// reading so truncation errors say what was cut off.
class ByteReader {
 public:
  explicit ByteReader(ByteView data) : data_(data) {}

  std::uint8_t u8(std::string_view field);
  std::uint16_t u16(std::string_view field);
  std::uint32_t u32(std::string_view field);
  std::uint64_t u64(std::string_view field);
  ByteView raw(std::size_t n, std::string_view field);
  Block16 block16(std::string_view field);
  std::string str8(std::string_view field);
  std::string str16(std::string_view field);
  Bytes bytes8(std::string_view field);

  std::size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }
  /// Throws DecodeError("trailing bytes after <what>") unless fully consumed.
  void expect_end(std::string_view what) const;

 private:
  ByteView take(std::size_t n, std::string_view field);

  ByteView data_;
  std::size_t pos_ = 0;
};

}  // namespace jitcheck
