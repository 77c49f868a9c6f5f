#include "jitcheck/program.hpp"

#include <limits>

namespace jitcheck {

std::string to_string(const ArtifactId& a) { return a.id + "@" + a.version; }

std::vector<std::string> default_env_props() { return {"runtime.name", "runtime.version", "os.name"}; }

namespace {

Bytes draw_salt(RandomSource& rng) {
  std::uint8_t b = rng.next_byte();
  while (b >= 250) b = rng.next_byte();
  Bytes salt(kMinDrawnSalt + b % (kMaxDrawnSalt - kMinDrawnSalt + 1));
  rng.fill(salt);
  return salt;
}

DigestParams draw_params(RandomSource& rng) {
  DigestParams p;
  for (auto& w : p.iv) w = rng.next_u32();
  for (auto& m : p.round_masks) m = rng.next_u32();
  rng.fill(p.out_mask);
  return p;
}

void check_lengths(const MeasurementProgram& p) {
  if (p.salt_prefix.size() > kMaxSaltLength || p.salt_suffix.size() > kMaxSaltLength)
    throw std::invalid_argument("salt longer than 64 bytes");
  if (p.targets.size() > std::numeric_limits<std::uint16_t>::max() ||
      p.env_props.size() > std::numeric_limits<std::uint16_t>::max())
    throw std::invalid_argument("too many targets or env properties");
}

}  // namespace

MeasurementProgram generate_program(std::string node_id, std::vector<ArtifactId> targets,
                                    std::vector<std::string> env_props, std::int64_t now,
                                    std::uint32_t ttl_seconds, RandomSource& rng) {
  if (targets.empty()) throw InvalidRequest("program needs at least one target");
  if (ttl_seconds == 0) throw InvalidRequest("ttl must be positive");

  MeasurementProgram p;
  p.node_id = std::move(node_id);
  p.issued_at = now;
  p.ttl_seconds = ttl_seconds;
  p.targets = std::move(targets);
  p.env_props = std::move(env_props);

  rng.fill(p.program_id);
  rng.fill(p.seed);
  do {
    p.params = draw_params(rng);
  } while (is_identity(p.params));
  p.salt_prefix = draw_salt(rng);
  p.salt_suffix = draw_salt(rng);
  return p;
}

Bytes encode_program(const MeasurementProgram& p) {
  check_lengths(p);
  ByteWriter w;
  w.u8(kProgramEncodingVersion);
  w.raw(p.program_id);
  w.u64(static_cast<std::uint64_t>(p.issued_at));
  w.u32(p.ttl_seconds);
  w.str16(p.node_id);
  for (auto v : p.params.iv) w.u32(v);
  for (auto v : p.params.round_masks) w.u32(v);
  w.raw(p.params.out_mask);
  w.raw(p.seed);
  w.bytes8(p.salt_prefix);
  w.bytes8(p.salt_suffix);
  w.u16(static_cast<std::uint16_t>(p.targets.size()));
  for (const auto& t : p.targets) {
    w.str16(t.id);
    w.str16(t.version);
  }
  w.u16(static_cast<std::uint16_t>(p.env_props.size()));
  for (const auto& e : p.env_props) w.str16(e);
  return std::move(w).take();
}

MeasurementProgram decode_program(ByteView bytes) {
  ByteReader r(bytes);
  MeasurementProgram p;
  // version + program_id + issued_at + ttl
  if (r.remaining() < 1 + 16 + 8 + 4) throw DecodeError("truncated header");
  if (r.u8("version") != kProgramEncodingVersion) throw DecodeError("unknown version");
  p.program_id = r.block16("program_id");
  p.issued_at = static_cast<std::int64_t>(r.u64("issued_at"));
  p.ttl_seconds = r.u32("ttl");
  if (p.ttl_seconds == 0) throw DecodeError("invalid ttl");
  p.node_id = r.str16("node_id");
  for (auto& v : p.params.iv) v = r.u32("params.iv");
  for (auto& v : p.params.round_masks) v = r.u32("params.round_masks");
  p.params.out_mask = r.block16("params.out_mask");
  p.seed = r.block16("seed");
  p.salt_prefix = r.bytes8("salt_prefix");
  if (p.salt_prefix.size() > kMaxSaltLength) throw DecodeError("salt_prefix length overrun");
  p.salt_suffix = r.bytes8("salt_suffix");
  if (p.salt_suffix.size() > kMaxSaltLength) throw DecodeError("salt_suffix length overrun");
  const auto n_targets = r.u16("target count");
  if (n_targets == 0) throw DecodeError("empty target list");
  p.targets.reserve(n_targets);
  for (std::uint16_t i = 0; i < n_targets; ++i) {
    ArtifactId a;
    a.id = r.str16("target id");
    a.version = r.str16("target version");
    if (a.id.empty()) throw DecodeError("empty target id");
    p.targets.push_back(std::move(a));
  }
  const auto n_env = r.u16("env_props count");
  p.env_props.reserve(n_env);
  for (std::uint16_t i = 0; i < n_env; ++i) p.env_props.push_back(r.str16("env_props"));
  r.expect_end("program");
  return p;
}

Digest measure_artifact(const MeasurementProgram& p, ByteView artifact_bytes) {
  return DigestContext(p.params).update(p.salt_prefix).update(artifact_bytes).update(p.salt_suffix).finish();
}

std::vector<Digest> measure_serial(const MeasurementProgram& p, std::span<const ByteView> artifacts) {
  std::vector<Digest> out;
  out.reserve(artifacts.size());
  for (const auto& a : artifacts) out.push_back(measure_artifact(p, a));
  return out;
}

std::vector<Digest> measure_parallel(const MeasurementProgram& p, std::span<const ByteView> artifacts) {
  std::vector<Digest> out(artifacts.size());
  const auto n = static_cast<std::ptrdiff_t>(artifacts.size());
#pragma omp parallel for schedule(dynamic, 1) if (n > 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = measure_artifact(p, artifacts[static_cast<std::size_t>(i)]);
  return out;
}

MeasurementReport execute_program(const MeasurementProgram& p, const ArtifactResolver& artifacts,
                                  const EnvResolver& env, Execution mode) {
  std::vector<Bytes> resolved;
  resolved.reserve(p.targets.size());
  for (const auto& t : p.targets) {
    std::optional<Bytes> bytes;
    try {
      bytes = artifacts(t);
    } catch (const std::exception& e) {
      throw MeasurementError(t, e.what());
    }
    if (!bytes) throw MeasurementError(t, "not available");
    resolved.push_back(std::move(*bytes));
  }
  std::vector<ByteView> views(resolved.begin(), resolved.end());
  const auto digests = mode == Execution::Parallel ? measure_parallel(p, views) : measure_serial(p, views);

  MeasurementReport r;
  r.program_id = p.program_id;
  r.node_id = p.node_id;
  r.artifact_digests.reserve(p.targets.size());
  for (std::size_t i = 0; i < p.targets.size(); ++i) r.artifact_digests.push_back({p.targets[i], digests[i]});
  for (const auto& name : p.env_props) {
    std::optional<std::string> value;
    if (env) value = env(name);
    r.env_values.emplace_back(name, value ? *value : std::string(kUnavailable));
  }
  return r;
}

}  // namespace jitcheck
