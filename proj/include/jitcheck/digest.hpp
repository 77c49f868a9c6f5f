#pragma once

#include <array>
#include <cstdint>

#include "jitcheck/bytes.hpp"

namespace jitcheck {

/// Parameterization of the MD5 variant used as the per-request measurement
/// tool. Padding and the rotation schedule are never varied.
struct DigestParams {
  std::array<std::uint32_t, 4> iv{};
  /// XORed onto the 64 per-step additive constants.
  std::array<std::uint32_t, 64> round_masks{};
  /// XORed onto the final 16 digest bytes.
  Block16 out_mask{};

  friend bool operator==(const DigestParams&, const DigestParams&) = default;
};

/// Standard MD5 chaining value, zero masks. parameterized_digest under these
/// params is plain MD5.
DigestParams identity_params();
bool is_identity(const DigestParams& p);

/// Incremental form of parameterized_digest, so salted measurements can be
/// fed piecewise without concatenating large artifacts.
class DigestContext {
 public:
  explicit DigestContext(const DigestParams& params);

  DigestContext& update(ByteView data);
  DigestContext& update(std::string_view s) { return update(as_bytes(s)); }
  /// Pads, finalizes and applies out_mask. The context must not be reused.
  Digest finish();

 private:
  void compress(const std::uint8_t* block);

  std::array<std::uint32_t, 64> k_{};
  std::array<std::uint32_t, 4> state_{};
  Block16 out_mask_{};
  std::array<std::uint8_t, 64> buffer_{};
  std::size_t buffered_ = 0;
  std::uint64_t total_len_ = 0;
};

Digest parameterized_digest(const DigestParams& params, ByteView message);
Digest md5_reference(ByteView message);

inline Digest md5_reference(std::string_view s) { return md5_reference(as_bytes(s)); }

}  // namespace jitcheck
