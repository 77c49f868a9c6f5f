#include "jitcheck/adversary.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <sstream>

#include <json.hpp>

namespace jitcheck {

const char* to_string(AttackerKind k) {
  switch (k) {
    case AttackerKind::Honest: return "HONEST";
    case AttackerKind::TamperedArtifact: return "TAMPERED_ARTIFACT";
    case AttackerKind::Replay: return "REPLAY";
    case AttackerKind::Bypass: return "BYPASS";
    case AttackerKind::PrecomputeStandardMd5: return "PRECOMPUTE_STANDARD_MD5";
    case AttackerKind::ForgedIdentity: return "FORGED_IDENTITY";
    case AttackerKind::StripCheck: return "STRIP_CHECK";
  }
  return "?";
}

AttackerKind parse_attacker_kind(std::string_view name) {
  std::string norm;
  for (char c : name) norm.push_back(c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  for (auto k : kAllAttackerKinds)
    if (norm == to_string(k)) return k;
  if (norm == "TAMPERED" || norm == "TAMPER") return AttackerKind::TamperedArtifact;
  if (norm == "PRECOMPUTE") return AttackerKind::PrecomputeStandardMd5;
  if (norm == "FORGED") return AttackerKind::ForgedIdentity;
  if (norm == "STRIP") return AttackerKind::StripCheck;
  throw std::invalid_argument("unknown scenario \"" + std::string(name) + "\"");
}

namespace {

constexpr std::chrono::milliseconds kLoopbackTimeout{1000};

std::optional<Frame> round_trip(LoopbackTransport& t, const Bytes& frame) {
  t.send(frame);
  return FrameReceiver(t).next(kLoopbackTimeout);
}

}  // namespace

Simulation::Simulation(std::shared_ptr<const GoldenStore> store, std::uint64_t seed, ServerSettings settings,
                       std::int64_t pass_freshness_seconds)
    : store_(std::move(store)),
      audit_(std::make_shared<MemoryAuditSink>()),
      registry_(std::make_shared<NodeRegistry>(audit_, pass_freshness_seconds)) {
  if (!store_ || store_->empty()) throw ScenarioError("simulation needs a non-empty golden store");
  core_ = std::make_unique<ServerCore>(store_, registry_, std::make_unique<SeededRandom>(seed),
                                       [this] { return now_; }, std::move(settings));
}

std::unique_ptr<LoopbackTransport> Simulation::connect() { return std::make_unique<LoopbackTransport>(*core_); }

void Simulation::disconnect(std::unique_ptr<LoopbackTransport> t) {
  if (t->session().state() == ServerSession::State::Verified) verified_.push_back(*t->session().bound_program_id());
  t->close();
  advance(1);
}

ArtifactResolver Simulation::golden_resolver(std::optional<std::pair<std::size_t, std::uint64_t>> flip) const {
  return [this, flip](const ArtifactId& id) -> std::optional<Bytes> {
    const auto& all = store_->artifacts();
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (all[i].artifact_id != id) continue;
      Bytes copy = all[i].bytes;
      if (flip && flip->first == i) copy[flip->second / 8] ^= static_cast<std::uint8_t>(1u << (flip->second % 8));
      return copy;
    }
    return std::nullopt;
  };
}

bool Simulation::fetch(const std::string& node_id, const std::string& resource_id) {
  auto t = connect();
  const auto resp = client_request_resource(*t, node_id, resource_id, ClientOptions{.timeout = kLoopbackTimeout});
  disconnect(std::move(t));
  return resp.granted;
}

ScenarioResult Simulation::run(const Attacker& attacker, const std::string& node_id) {
  ScenarioResult result;
  result.kind = attacker.kind;
  const std::string resource = store_->artifacts().front().artifact_id.id;
  std::string target_node = node_id;
  const ClientOptions options{.timeout = kLoopbackTimeout};
  const EnvResolver env = [](const std::string&) -> std::optional<std::string> { return std::string("sim"); };

  auto honest_check = [&](const std::string& id, ArtifactResolver resolver) {
    auto t = connect();
    auto outcome = client_run_check(*t, id, resolver, env, options);
    auto sent = t->sent();
    disconnect(std::move(t));
    return std::pair{outcome, sent};
  };
  auto note = [&](const CheckOutcome& o) {
    result.client_state = o.state;
    if (o.status) result.reason = o.status->reason;
  };

  switch (attacker.kind) {
    case AttackerKind::Honest: {
      auto [outcome, sent] = honest_check(node_id, golden_resolver());
      note(outcome);
      result.resource_granted = fetch(node_id, resource);
      break;
    }
    case AttackerKind::TamperedArtifact: {
      const auto& all = store_->artifacts();
      if (attacker.artifact_index >= all.size()) throw ScenarioError("tamper artifact index out of range");
      if (attacker.bit_position >= all[attacker.artifact_index].bytes.size() * 8)
        throw ScenarioError("tamper bit position out of range");
      auto [outcome, sent] =
          honest_check(node_id, golden_resolver(std::pair{attacker.artifact_index, attacker.bit_position}));
      note(outcome);
      result.resource_granted = fetch(node_id, resource);
      break;
    }
    case AttackerKind::Replay: {
      auto [outcome, sent] = honest_check(node_id, golden_resolver());
      // sent[0] is AUTOCHECK_REQ, sent[1] the REPORT frame.
      if (sent.size() < 2) throw ScenarioError("honest session produced no report to replay");
      auto t = connect();
      const auto program = round_trip(*t, encode_frame(MessageType::AutocheckReq,
                                                     encode_payload(AutocheckRequest{node_id, "1"})));
      if (program && program->type == MessageType::Program) {
        const auto status = round_trip(*t, sent[1]);
        if (status && status->type == MessageType::Status) result.reason = decode_status(status->payload).reason;
      }
      disconnect(std::move(t));
      result.client_state = ClientState::Stopped;
      result.resource_granted = fetch(node_id, resource);
      break;
    }
    case AttackerKind::Bypass: {
      result.resource_granted = fetch(node_id, resource);
      break;
    }
    case AttackerKind::PrecomputeStandardMd5: {
      auto t = connect();
      const auto frame = round_trip(*t, encode_frame(MessageType::AutocheckReq,
                                                   encode_payload(AutocheckRequest{node_id, "1"})));
      if (frame && frame->type == MessageType::Program) {
        const auto program = decode_program(frame->payload);
        MeasurementReport forged;
        forged.program_id = program.program_id;
        forged.node_id = node_id;
        for (const auto& target : program.targets) {
          const auto* golden = store_->find(target);
          forged.artifact_digests.push_back(ArtifactDigest{target, golden ? md5_reference(ByteView(golden->bytes)) : Digest{}});
        }
        for (const auto& name : program.env_props) forged.env_values.emplace_back(name, "sim");
        const auto status = round_trip(*t, encode_frame(MessageType::Report,
                                                      encode_encrypted_report(encrypt_report(program, forged))));
        if (status && status->type == MessageType::Status) result.reason = decode_status(status->payload).reason;
      }
      disconnect(std::move(t));
      result.client_state = ClientState::Stopped;
      result.resource_granted = fetch(node_id, resource);
      break;
    }
    case AttackerKind::ForgedIdentity: {
      if (attacker.victim_node_id.empty() || attacker.victim_node_id == node_id)
        throw ScenarioError("forged identity needs a victim distinct from the attacker");
      auto [outcome, sent] = honest_check(node_id, golden_resolver());
      note(outcome);
      target_node = attacker.victim_node_id;
      result.resource_granted = fetch(target_node, resource);
      break;
    }
    case AttackerKind::StripCheck: {
      // Decompiled client: no AUTOCHECK_REQ, straight to every resource on one connection.
      auto t = connect();
      for (const auto& a : store_->artifacts()) {
        const auto resp = client_request_resource(*t, node_id, a.artifact_id.id, options);
        result.resource_granted = result.resource_granted || resp.granted;
      }
      disconnect(std::move(t));
      result.client_state = ClientState::Running;
      break;
    }
  }

  result.server_status = registry_->get_status(target_node).status;
  result.detected = attacker.kind != AttackerKind::Honest && !result.resource_granted;
  return result;
}

ScenarioResult run_scenario(const Attacker& attacker, std::shared_ptr<const GoldenStore> store, std::uint64_t seed) {
  Simulation sim(std::move(store), seed);
  return sim.run(attacker, "node-1");
}

std::optional<double> KindMetrics::rate() const {
  if (trials == 0) return std::nullopt;
  return static_cast<double>(successes) / static_cast<double>(trials);
}

bool CampaignMetrics::all_expected() const {
  return std::all_of(kinds.begin(), kinds.end(), [](const KindMetrics& k) { return k.trials == 0 || k.successes == k.trials; });
}

std::string CampaignMetrics::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  auto& per_kind = j["kinds"];
  per_kind = nlohmann::ordered_json::object();
  for (const auto& k : kinds) {
    const bool honest = k.kind == AttackerKind::Honest;
    nlohmann::ordered_json entry;
    entry["trials"] = k.trials;
    entry[honest ? "passes" : "detections"] = k.successes;
    const auto r = k.rate();
    entry[honest ? "pass_rate" : "detection_rate"] = r ? nlohmann::ordered_json(*r) : nlohmann::ordered_json(nullptr);
    per_kind[to_string(k.kind)] = entry;
  }
  j["all_expected"] = all_expected();
  return j.dump(2);
}

std::string CampaignMetrics::to_table() const {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-24s %8s %10s %-15s %8s\n", "scenario", "trials", "count", "metric", "rate");
  out << line;
  for (const auto& k : kinds) {
    const bool honest = k.kind == AttackerKind::Honest;
    const auto r = k.rate();
    const std::string rate = r ? std::to_string(*r).substr(0, 5) : "n/a";
    std::snprintf(line, sizeof line, "%-24s %8zu %10zu %-15s %8s\n", to_string(k.kind), k.trials, k.successes,
                  honest ? "pass_rate" : "detection_rate", rate.c_str());
    out << line;
  }
  out << "all expected: " << (all_expected() ? "yes" : "no") << '\n';
  return out.str();
}

CampaignMetrics run_campaign(std::shared_ptr<const GoldenStore> store, const std::map<AttackerKind, std::size_t>& counts,
                             std::uint64_t seed, std::vector<std::string>* audit_out) {
  Simulation sim(store, seed);
  SeededRandom choices(seed ^ 0x9e3779b97f4a7c15ull);
  auto below = [&](std::uint64_t bound) {
    std::uint64_t v = (std::uint64_t{choices.next_u32()} << 32) | choices.next_u32();
    return v % bound;
  };

  CampaignMetrics metrics;
  metrics.seed = seed;
  for (auto kind : kAllAttackerKinds) {
    const auto it = counts.find(kind);
    KindMetrics km;
    km.kind = kind;
    km.trials = it == counts.end() ? 0 : it->second;
    for (std::size_t i = 0; i < km.trials; ++i) {
      Attacker attacker;
      attacker.kind = kind;
      const std::string node_id = std::string(to_string(kind)) + "-" + std::to_string(i);
      if (kind == AttackerKind::TamperedArtifact) {
        // Skip empty artifacts; a non-empty one always exists in a usable store.
        do {
          attacker.artifact_index = static_cast<std::size_t>(below(store->artifacts().size()));
        } while (store->artifacts()[attacker.artifact_index].bytes.empty());
        attacker.bit_position = below(store->artifacts()[attacker.artifact_index].bytes.size() * 8);
      } else if (kind == AttackerKind::ForgedIdentity) {
        attacker.victim_node_id = "victim-" + std::to_string(i);
      }
      const auto r = sim.run(attacker, node_id);
      const bool success = kind == AttackerKind::Honest
                               ? (r.server_status == NodeStatus::Pass && r.resource_granted &&
                                  r.client_state == ClientState::Running)
                               : r.detected;
      if (success) ++km.successes;
    }
    metrics.kinds.push_back(km);
  }
  if (audit_out) *audit_out = sim.audit_lines();
  return metrics;
}

std::shared_ptr<const GoldenStore> synthetic_store() {
  SeededRandom rng(2014);
  auto make = [&](std::string id, std::size_t size) {
    Bytes bytes(size);
    rng.fill(bytes);
    return GoldenArtifact::from_bytes(ArtifactId{std::move(id), "1"}, std::move(bytes));
  };
  std::vector<GoldenArtifact> artifacts;
  artifacts.push_back(make("sp2pen.jar", 8192));
  artifacts.push_back(make("lib/dscloud-core.jar", 4096));
  artifacts.push_back(make("lib/virgo.jar", 64));
  return std::make_shared<const GoldenStore>(std::move(artifacts));
}

}  // namespace jitcheck
