#include "jitcheck/random.hpp"

namespace jitcheck {

std::uint8_t RandomSource::next_byte() {
  std::uint8_t b = 0;
  fill(std::span(&b, 1));
  return b;
}

std::uint32_t RandomSource::next_u32() {
  std::uint8_t b[4];
  fill(b);
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

void SeededRandom::fill(std::span<std::uint8_t> out) {
  for (auto& byte : out) {
    if (pending_bytes_ == 0) {
      pending_ = engine_();
      pending_bytes_ = 8;
    }
    byte = static_cast<std::uint8_t>(pending_);
    pending_ >>= 8;
    --pending_bytes_;
  }
}

void SystemRandom::fill(std::span<std::uint8_t> out) {
  static_assert(sizeof(std::random_device::result_type) >= 4);
  std::size_t i = 0;
  while (i < out.size()) {
    auto word = device_();
    for (int k = 0; k < 4 && i < out.size(); ++k, ++i) {
      out[i] = static_cast<std::uint8_t>(word);
      word >>= 8;
    }
  }
}

}  // namespace jitcheck
