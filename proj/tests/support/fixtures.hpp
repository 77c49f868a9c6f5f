#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "jitcheck/adversary.hpp"
#include "jitcheck/golden_store.hpp"
#include "jitcheck/random.hpp"

namespace testing_support {

inline jitcheck::Bytes random_bytes(jitcheck::RandomSource& rng, std::size_t n) {
  jitcheck::Bytes b(n);
  rng.fill(b);
  return b;
}

inline jitcheck::Bytes bytes_of(std::string_view s) { return {s.begin(), s.end()}; }

inline std::shared_ptr<const jitcheck::GoldenStore> store_of(
    std::vector<std::pair<std::string, jitcheck::Bytes>> files) {
  std::vector<jitcheck::GoldenArtifact> artifacts;
  for (auto& [id, bytes] : files)
    artifacts.push_back(jitcheck::GoldenArtifact::from_bytes(jitcheck::ArtifactId{id, "1"}, std::move(bytes)));
  return std::make_shared<const jitcheck::GoldenStore>(std::move(artifacts));
}

/// Counts up from start, one byte per draw; wraps at 256.
class CountingRandom final : public jitcheck::RandomSource {
 public:
  explicit CountingRandom(std::uint8_t start = 0) : next_(start) {}
  void fill(std::span<std::uint8_t> out) override {
    for (auto& b : out) b = next_++;
  }
  std::size_t drawn() const { return drawn_; }

 private:
  std::uint8_t next_;
  std::size_t drawn_ = 0;
};

/// Replays a fixed byte script, then zeros.
class ScriptedRandom final : public jitcheck::RandomSource {
 public:
  explicit ScriptedRandom(jitcheck::Bytes script) : script_(std::move(script)) {}
  void fill(std::span<std::uint8_t> out) override {
    for (auto& b : out) b = pos_ < script_.size() ? script_[pos_++] : 0;
  }

 private:
  jitcheck::Bytes script_;
  std::size_t pos_ = 0;
};

}  // namespace testing_support
