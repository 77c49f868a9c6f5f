#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "jitcheck/bytes.hpp"
#include "jitcheck/digest.hpp"
#include "jitcheck/random.hpp"

namespace jitcheck {

using ProgramId = Block16;

struct ArtifactId {
  std::string id;
  std::string version;

  friend auto operator<=>(const ArtifactId&, const ArtifactId&) = default;
};

std::string to_string(const ArtifactId& a);

/// The per-request measurement-and-encryption program. Stands in for a
/// server-compiled check class: everything that makes one issuance
/// unpredictable lives in params, seed and the salts.
struct MeasurementProgram {
  ProgramId program_id{};
  std::string node_id;
  std::int64_t issued_at = 0;
  std::uint32_t ttl_seconds = 0;
  DigestParams params;
  Block16 seed{};
  Bytes salt_prefix;
  Bytes salt_suffix;
  std::vector<ArtifactId> targets;
  std::vector<std::string> env_props;

  friend bool operator==(const MeasurementProgram&, const MeasurementProgram&) = default;
};

struct ArtifactDigest {
  ArtifactId artifact;
  Digest digest{};

  friend bool operator==(const ArtifactDigest&, const ArtifactDigest&) = default;
};

struct MeasurementReport {
  ProgramId program_id{};
  std::string node_id;
  /// Aligned with MeasurementProgram::targets.
  std::vector<ArtifactDigest> artifact_digests;
  std::vector<std::pair<std::string, std::string>> env_values;

  friend bool operator==(const MeasurementReport&, const MeasurementReport&) = default;
};

class InvalidRequest : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A target could not be resolved. No partial report exists when this is thrown.
class MeasurementError : public std::runtime_error {
 public:
  MeasurementError(ArtifactId artifact, const std::string& why)
      : std::runtime_error("cannot measure " + to_string(artifact) + ": " + why), artifact_(std::move(artifact)) {}
  const ArtifactId& artifact() const { return artifact_; }

 private:
  ArtifactId artifact_;
};

inline constexpr std::size_t kMaxSaltLength = 64;
inline constexpr std::size_t kMinDrawnSalt = 8;
inline constexpr std::size_t kMaxDrawnSalt = 32;
inline constexpr std::uint8_t kProgramEncodingVersion = 0x01;
inline constexpr std::string_view kUnavailable = "unavailable";

/// "runtime.name", "runtime.version", "os.name".
std::vector<std::string> default_env_props();

/// Draw order from rng: program_id, seed, iv[0..3], round_masks[0..63],
/// out_mask, prefix length then bytes, suffix length then bytes. Words are
/// taken big-endian. Params are redrawn while they equal identity_params().
/// A salt length is one byte b drawn until b < 250, then 8 + b % 25.
MeasurementProgram generate_program(std::string node_id, std::vector<ArtifactId> targets,
                                    std::vector<std::string> env_props, std::int64_t now,
                                    std::uint32_t ttl_seconds, RandomSource& rng);

Bytes encode_program(const MeasurementProgram& p);
MeasurementProgram decode_program(ByteView bytes);

/// nullopt (or any exception) means the artifact cannot be read.
using ArtifactResolver = std::function<std::optional<Bytes>(const ArtifactId&)>;
/// nullopt means the property is unknown; it is reported as "unavailable".
using EnvResolver = std::function<std::optional<std::string>(const std::string&)>;

/// Salted parameterized digest of one artifact: prefix || bytes || suffix.
Digest measure_artifact(const MeasurementProgram& p, ByteView artifact_bytes);

// Measurement kernels over already-resolved artifact bytes, one digest per
// entry in the same order. measure_serial is the reference; measure_parallel
// spreads artifacts over OpenMP threads and must agree with it exactly.
std::vector<Digest> measure_serial(const MeasurementProgram& p, std::span<const ByteView> artifacts);
std::vector<Digest> measure_parallel(const MeasurementProgram& p, std::span<const ByteView> artifacts);

enum class Execution { Serial, Parallel };

/// Resolves every target first (sequentially; resolvers need not be
/// thread-safe), then measures. Throws MeasurementError on the first target
/// that cannot be resolved.
MeasurementReport execute_program(const MeasurementProgram& p, const ArtifactResolver& artifacts,
                                  const EnvResolver& env, Execution mode = Execution::Serial);

}  // namespace jitcheck
