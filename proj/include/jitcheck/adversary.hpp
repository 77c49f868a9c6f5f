#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "jitcheck/client.hpp"
#include "jitcheck/server.hpp"

namespace jitcheck {

enum class AttackerKind {
  Honest,
  TamperedArtifact,
  Replay,
  Bypass,
  PrecomputeStandardMd5,
  ForgedIdentity,
  StripCheck,
};

inline constexpr AttackerKind kAllAttackerKinds[] = {
    AttackerKind::Honest,         AttackerKind::TamperedArtifact,      AttackerKind::Replay,
    AttackerKind::Bypass,         AttackerKind::PrecomputeStandardMd5, AttackerKind::ForgedIdentity,
    AttackerKind::StripCheck,
};

const char* to_string(AttackerKind k);
/// Accepts the upper-case names (HONEST, TAMPERED_ARTIFACT, ...) and their
/// lower-case/hyphenated forms. Throws std::invalid_argument.
AttackerKind parse_attacker_kind(std::string_view name);

struct Attacker {
  AttackerKind kind = AttackerKind::Honest;
  // TamperedArtifact
  std::size_t artifact_index = 0;
  std::uint64_t bit_position = 0;
  // ForgedIdentity
  std::string victim_node_id;
};

/// Scenario parameters do not fit the golden store.
class ScenarioError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ScenarioResult {
  AttackerKind kind = AttackerKind::Honest;
  /// Server's recorded status for the node the attack targets.
  NodeStatus server_status = NodeStatus::Unknown;
  /// Reason on the STATUS the attacker received, if any.
  std::optional<ReasonCode> reason;
  ClientState client_state = ClientState::Init;
  bool resource_granted = false;
  /// A non-honest attacker failed to obtain the resource. Always false for HONEST.
  bool detected = false;
};

/// One in-process server with a manual clock and an in-memory audit log.
/// Scenarios run sequentially over loopback transports; everything random
/// comes from the seed.
class Simulation {
 public:
  Simulation(std::shared_ptr<const GoldenStore> store, std::uint64_t seed, ServerSettings settings = {},
             std::int64_t pass_freshness_seconds = 3600);

  ScenarioResult run(const Attacker& attacker, const std::string& node_id);

  ServerCore& core() { return *core_; }
  const GoldenStore& store() const { return *store_; }
  std::vector<std::string> audit_lines() const { return audit_->lines(); }
  /// program_id of every session that reached VERIFIED, in order.
  const std::vector<ProgramId>& verified_programs() const { return verified_; }

  std::int64_t now() const { return now_; }
  void advance(std::int64_t seconds) { now_ += seconds; }

 private:
  std::unique_ptr<LoopbackTransport> connect();
  void disconnect(std::unique_ptr<LoopbackTransport> t);
  ArtifactResolver golden_resolver(std::optional<std::pair<std::size_t, std::uint64_t>> flip = std::nullopt) const;
  bool fetch(const std::string& node_id, const std::string& resource_id);

  std::shared_ptr<const GoldenStore> store_;
  std::shared_ptr<MemoryAuditSink> audit_;
  std::shared_ptr<NodeRegistry> registry_;
  std::unique_ptr<ServerCore> core_;
  std::int64_t now_ = 1'700'000'000;
  std::vector<ProgramId> verified_;
};

/// Fresh simulation seeded with seed, one scenario.
ScenarioResult run_scenario(const Attacker& attacker, std::shared_ptr<const GoldenStore> store, std::uint64_t seed);

struct KindMetrics {
  AttackerKind kind = AttackerKind::Honest;
  std::size_t trials = 0;
  /// HONEST: trials that passed, reached RUNNING and were granted the resource.
  /// Others: trials where the attacker was denied.
  std::size_t successes = 0;
  /// successes / trials; nullopt when there were no trials.
  std::optional<double> rate() const;
};

struct CampaignMetrics {
  std::uint64_t seed = 0;
  std::vector<KindMetrics> kinds;
  /// Every kind with trials has rate exactly 1.0.
  bool all_expected() const;
  std::string to_json() const;
  std::string to_table() const;
};

/// Kinds run in kAllAttackerKinds order against one simulation; attacker
/// parameters (tamper positions, victims) come from a stream derived from seed.
CampaignMetrics run_campaign(std::shared_ptr<const GoldenStore> store, const std::map<AttackerKind, std::size_t>& counts,
                             std::uint64_t seed, std::vector<std::string>* audit_out = nullptr);

/// Small fixed golden store (a node program plus two libraries) for
/// simulations run without a manifest.
std::shared_ptr<const GoldenStore> synthetic_store();

}  // namespace jitcheck
