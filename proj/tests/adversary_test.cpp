#include <doctest.h>

#include <json.hpp>

#include "jitcheck/adversary.hpp"
#include "support/fixtures.hpp"

using namespace jitcheck;

TEST_CASE("honest scenario passes and is granted") {
  const auto r = run_scenario({AttackerKind::Honest}, synthetic_store(), 1);
  CHECK(r.resource_granted);
  CHECK(r.server_status == NodeStatus::Pass);
  CHECK(r.client_state == ClientState::Running);
  CHECK_FALSE(r.detected);
}

TEST_CASE("bypass is denied") {
  const auto r = run_scenario({AttackerKind::Bypass}, synthetic_store(), 1);
  CHECK_FALSE(r.resource_granted);
  CHECK(r.detected);
  CHECK(r.server_status == NodeStatus::Unknown);
}

TEST_CASE("tampered artifact fails with DIGEST_MISMATCH at every sampled bit") {
  const auto store = synthetic_store();
  for (std::uint64_t k : {0ull, 1ull, 7ull, 8ull, 1000ull, 8191ull * 8}) {
    Attacker a{AttackerKind::TamperedArtifact, 0, k, ""};
    const auto r = run_scenario(a, store, k + 3);
    CAPTURE(k);
    CHECK(r.server_status == NodeStatus::Fail);
    CHECK(r.reason == ReasonCode::DigestMismatch);
    CHECK(r.detected);
  }
}

TEST_CASE("replay, precompute, forged identity and strip are detected") {
  const auto store = synthetic_store();
  const auto replay = run_scenario({AttackerKind::Replay}, store, 2);
  CHECK(replay.reason == ReasonCode::Replay);
  CHECK(replay.detected);

  const auto pre = run_scenario({AttackerKind::PrecomputeStandardMd5}, store, 2);
  CHECK(pre.reason == ReasonCode::DigestMismatch);
  CHECK(pre.server_status == NodeStatus::Fail);
  CHECK(pre.detected);

  Attacker forged{AttackerKind::ForgedIdentity};
  forged.victim_node_id = "victim";
  const auto f = run_scenario(forged, store, 2);
  CHECK(f.client_state == ClientState::Running);
  CHECK(f.server_status == NodeStatus::Unknown);
  CHECK(f.detected);

  const auto strip = run_scenario({AttackerKind::StripCheck}, store, 2);
  CHECK_FALSE(strip.resource_granted);
  CHECK(strip.detected);
}

TEST_CASE("misconfigured scenarios are setup errors") {
  const auto store = synthetic_store();
  CHECK_THROWS_AS(run_scenario({AttackerKind::TamperedArtifact, 3, 0, ""}, store, 1), ScenarioError);
  CHECK_THROWS_AS(run_scenario({AttackerKind::TamperedArtifact, 2, 64 * 8, ""}, store, 1), ScenarioError);
  CHECK_THROWS_AS(run_scenario({AttackerKind::ForgedIdentity}, store, 1), ScenarioError);
  CHECK_THROWS_AS(Simulation(std::make_shared<const GoldenStore>(), 1), ScenarioError);
}

TEST_CASE("campaign metrics") {
  const auto store = synthetic_store();
  std::map<AttackerKind, std::size_t> counts;
  for (auto k : kAllAttackerKinds) counts[k] = 10;
  counts[AttackerKind::StripCheck] = 0;
  std::vector<std::string> audit_a, audit_b;
  const auto a = run_campaign(store, counts, 9, &audit_a);
  const auto b = run_campaign(store, counts, 9, &audit_b);
  CHECK(a.all_expected());
  CHECK(a.to_json() == b.to_json());
  CHECK(audit_a == audit_b);
  CHECK_FALSE(audit_a.empty());

  for (const auto& k : a.kinds) {
    CAPTURE(to_string(k.kind));
    if (k.kind == AttackerKind::StripCheck) {
      CHECK_FALSE(k.rate());
    } else {
      CHECK(k.rate() == 1.0);
    }
  }
  const auto j = nlohmann::json::parse(a.to_json());
  CHECK(j["kinds"]["HONEST"]["pass_rate"] == 1.0);
  CHECK(j["kinds"]["STRIP_CHECK"]["detection_rate"].is_null());
  CHECK(j["kinds"]["REPLAY"]["detections"] == 10);
  CHECK(a.to_table().find("n/a") != std::string::npos);
}

TEST_CASE("attacker kind names parse") {
  for (auto k : kAllAttackerKinds) CHECK(parse_attacker_kind(to_string(k)) == k);
  CHECK(parse_attacker_kind("tampered-artifact") == AttackerKind::TamperedArtifact);
  CHECK(parse_attacker_kind("precompute") == AttackerKind::PrecomputeStandardMd5);
  CHECK_THROWS_AS(parse_attacker_kind("zzz"), std::invalid_argument);
}
