#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace jitcheck {

/// Byte-oriented randomness source handed to program generation. Every random
/// field of a program is sliced out of fill() calls in a fixed order, so a
/// stubbed source fully determines the program.
class RandomSource {
 public:
  virtual ~RandomSource() = default;
  virtual void fill(std::span<std::uint8_t> out) = 0;

  std::uint8_t next_byte();
  /// Four bytes, big-endian.
  std::uint32_t next_u32();
};

/// Deterministic stream for tests and simulations: mt19937_64 output words,
/// emitted little-endian.
class SeededRandom final : public RandomSource {
 public:
  explicit SeededRandom(std::uint64_t seed) : engine_(seed) {}
  void fill(std::span<std::uint8_t> out) override;

 private:
  std::mt19937_64 engine_;
  std::uint64_t pending_ = 0;
  int pending_bytes_ = 0;
};

/// Entropy from std::random_device.
class SystemRandom final : public RandomSource {
 public:
  void fill(std::span<std::uint8_t> out) override;

 private:
  std::random_device device_;
};

}  // namespace jitcheck
