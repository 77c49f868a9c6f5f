// Acceptance suite: one PASS/FAIL line per criterion, exit status is the
// number of failed criteria.

#include <chrono>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "jitcheck/adversary.hpp"
#include "jitcheck/report_crypto.hpp"
#include "support/fixtures.hpp"
#include "support/md5_oracle.hpp"
#include "support/temp_dir.hpp"

using namespace jitcheck;
using testing_support::random_bytes;
using testing_support::store_of;

namespace {

struct Verdict {
  bool ok = true;
  std::string detail;
};

/// Collects failures; the first few are kept for the report line.
class Tally {
 public:
  void expect(bool cond, const std::string& what) {
    ++checks_;
    if (cond) return;
    ++failures_;
    if (failures_ <= 3) first_ += (first_.empty() ? "" : "; ") + what;
  }
  Verdict verdict(const std::string& summary) const {
    std::ostringstream s;
    s << summary << " [" << checks_ - failures_ << "/" << checks_ << " checks]";
    if (failures_) s << " first failures: " << first_;
    return {failures_ == 0, s.str()};
  }

 private:
  std::size_t checks_ = 0, failures_ = 0;
  std::string first_;
};

DigestParams random_params(RandomSource& rng) {
  DigestParams p;
  for (auto& w : p.iv) w = rng.next_u32();
  for (auto& m : p.round_masks) m = rng.next_u32();
  rng.fill(p.out_mask);
  return p;
}

Verdict digest_conformance() {
  Tally t;
  const std::pair<const char*, const char*> rfc[] = {
      {"", "d41d8cd98f00b204e9800998ecf8427e"},
      {"a", "0cc175b9c0f1b6a831c399e269772661"},
      {"abc", "900150983cd24fb0d6963f7d28e17f72"},
      {"message digest", "f96b697d7cb7938d525a2f31aaf161d0"},
      {"abcdefghijklmnopqrstuvwxyz", "c3fcd3d76192e4007dfb496cca67e13b"},
      {"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789", "d174ab98d277d9f5a5611c2c9f419d9f"},
      {"12345678901234567890123456789012345678901234567890123456789012345678901234567890",
       "57edf4a22be3c955ac49da2e2107b67a"},
  };
  for (const auto& [msg, hex] : rfc)
    t.expect(to_hex(parameterized_digest(identity_params(), as_bytes(msg))) == hex, std::string("rfc \"") + msg + "\"");
  SeededRandom rng(101);
  for (int i = 0; i < 1000; ++i) {
    const auto msg = random_bytes(rng, rng.next_u32() % 4097);
    t.expect(parameterized_digest(identity_params(), msg) == oracle::md5(msg), "random len " + std::to_string(msg.size()));
  }
  return t.verdict("7 RFC 1321 vectors + 1000 random messages vs independent oracle");
}

Verdict out_mask_linearity() {
  Tally t;
  SeededRandom rng(102);
  for (int i = 0; i < 1000; ++i) {
    auto p = random_params(rng);
    Block16 mask{};
    rng.fill(mask);
    const auto msg = random_bytes(rng, rng.next_u32() % 512);
    p.out_mask = {};
    auto expected = parameterized_digest(p, msg);
    for (std::size_t k = 0; k < 16; ++k) expected[k] ^= mask[k];
    p.out_mask = mask;
    t.expect(parameterized_digest(p, msg) == expected, "triple " + std::to_string(i));
  }
  return t.verdict("1000 (params, mask, message) triples");
}

Verdict honest_end_to_end() {
  Tally t;
  const auto store = synthetic_store();
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto r = run_scenario({AttackerKind::Honest}, store, seed);
    t.expect(r.server_status == NodeStatus::Pass, "seed " + std::to_string(seed) + " not PASS");
    t.expect(r.resource_granted, "seed " + std::to_string(seed) + " not GRANTED");
    t.expect(r.client_state == ClientState::Running, "seed " + std::to_string(seed) + " not RUNNING");
  }
  return t.verdict("100 seeded honest sessions: PASS, GRANTED, RUNNING");
}

Verdict tamper_soundness() {
  Tally t;
  auto check = [&](Simulation& sim, std::uint64_t bit, int n) {
    Attacker a{AttackerKind::TamperedArtifact, 0, bit, ""};
    const auto r = sim.run(a, "tamper-" + std::to_string(n));
    t.expect(r.server_status == NodeStatus::Fail && r.reason == ReasonCode::DigestMismatch && !r.resource_granted,
             "bit " + std::to_string(bit));
  };
  SeededRandom content(103);
  {
    Simulation sim(store_of({{"small.jar", random_bytes(content, 64)}}), 103);
    for (std::uint64_t bit = 0; bit < 512; ++bit) check(sim, bit, static_cast<int>(bit));
  }
  {
    Simulation sim(store_of({{"big.jar", random_bytes(content, 1 << 20)}}), 104);
    SeededRandom positions(105);
    for (int i = 0; i < 200; ++i) {
      const std::uint64_t bit = ((std::uint64_t{positions.next_u32()} << 32) | positions.next_u32()) % (8ull << 20);
      check(sim, bit, 1000 + i);
    }
  }
  return t.verdict("512 exhaustive flips (64 B) + 200 sampled flips (1 MiB) -> FAIL/DIGEST_MISMATCH");
}

Verdict replay_rejection() {
  Tally t;
  Simulation sim(synthetic_store(), 106);
  for (int i = 0; i < 100; ++i) {
    const auto r = sim.run({AttackerKind::Replay}, "replay-" + std::to_string(i));
    t.expect(r.reason == ReasonCode::Replay, "trial " + std::to_string(i) + " not REPLAY");
    t.expect(!r.resource_granted, "trial " + std::to_string(i) + " granted");
  }
  const auto& verified = sim.verified_programs();
  const std::set<ProgramId> unique(verified.begin(), verified.end());
  t.expect(unique.size() == verified.size(), "a program_id reached VERIFIED twice");
  t.expect(verified.size() == 100, "expected exactly the 100 honest sessions to verify");
  return t.verdict("100 replayed reports -> REPLAY; no program_id verified twice");
}

Verdict precompute_attacker() {
  Tally t;
  Simulation sim(synthetic_store(), 107);
  for (int i = 0; i < 200; ++i) {
    const auto r = sim.run({AttackerKind::PrecomputeStandardMd5}, "pre-" + std::to_string(i));
    t.expect(r.server_status == NodeStatus::Fail && !r.resource_granted, "trial " + std::to_string(i));
  }
  return t.verdict("200 standard-MD5 precompute attempts -> FAIL");
}

Verdict bypass_denied() {
  Tally t;
  Simulation sim(synthetic_store(), 108);
  for (int i = 0; i < 100; ++i) {
    const auto kind = i % 2 == 0 ? AttackerKind::Bypass : AttackerKind::StripCheck;
    const auto r = sim.run({kind}, "bypass-" + std::to_string(i));
    t.expect(!r.resource_granted, "trial " + std::to_string(i));
  }
  return t.verdict("100 resource requests without a fresh PASS -> DENIED");
}

Verdict crypto_properties() {
  Tally t;
  SeededRandom rng(109);
  for (int i = 0; i < 1000; ++i) {
    std::vector<ArtifactId> targets;
    const auto n = 1 + rng.next_u32() % 4;
    for (std::uint32_t k = 0; k < n; ++k) targets.push_back({"a" + std::to_string(k), "1"});
    const auto p = generate_program("node-" + std::to_string(i), targets, default_env_props(), i, 60, rng);
    MeasurementReport r;
    r.program_id = p.program_id;
    r.node_id = p.node_id;
    for (const auto& a : targets) {
      Digest d{};
      rng.fill(d);
      r.artifact_digests.push_back({a, d});
    }
    for (const auto& e : p.env_props) r.env_values.emplace_back(e, std::string(rng.next_byte() % 30, 'x'));
    t.expect(decrypt_report(p, encrypt_report(p, r)) == r, "round trip " + std::to_string(i));
  }

  auto p = generate_program("n", {{"a", "1"}}, {}, 0, 60, rng);
  MeasurementReport small{p.program_id, "n", {{{"a", "1"}, Digest{}}}, {}};
  const auto e = encrypt_report(p, small);
  auto rejected = [&](const EncryptedReport& bad) {
    try {
      decrypt_report(p, bad);
    } catch (const CryptoError& err) {
      return err.kind() == CryptoError::Kind::Authentication;
    }
    return false;
  };
  for (std::size_t bit = 0; bit < e.ciphertext.size() * 8; ++bit) {
    auto bad = e;
    bad.ciphertext[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    t.expect(rejected(bad), "ciphertext bit " + std::to_string(bit));
  }
  for (std::size_t bit = 0; bit < 128; ++bit) {
    auto bad = e;
    bad.mac[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    t.expect(rejected(bad), "mac bit " + std::to_string(bit));
  }
  return t.verdict("1000 round trips; every single-bit ciphertext/mac corruption -> auth failure");
}

Verdict program_uniqueness() {
  Tally t;
  SystemRandom rng;
  std::set<ProgramId> ids;
  std::set<Block16> seeds;
  for (int i = 0; i < 10000; ++i) {
    const auto p = generate_program("n", {{"a", "1"}}, {}, 0, 60, rng);
    ids.insert(p.program_id);
    seeds.insert(p.seed);
    t.expect(!is_identity(p.params), "identity params at " + std::to_string(i));
  }
  t.expect(ids.size() == 10000, "duplicate program_id");
  t.expect(seeds.size() == 10000, "duplicate seed");
  return t.verdict("10000 entropy-seeded programs: distinct ids and seeds, no identity params");
}

Verdict persistence_rebuild() {
  Tally t;
  testing_support::TempDir dir;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Simulation sim(synthetic_store(), seed, ServerSettings{}, 5);
    SeededRandom choices(seed * 7919);
    int trial = 0;
    while (sim.audit_lines().size() < 50) {
      Attacker a;
      a.kind = kAllAttackerKinds[choices.next_byte() % std::size(kAllAttackerKinds)];
      const std::string node = "node-" + std::to_string(choices.next_byte() % 6);
      if (a.kind == AttackerKind::TamperedArtifact) a.bit_position = choices.next_u32() % (8192 * 8);
      if (a.kind == AttackerKind::ForgedIdentity) a.victim_node_id = "victim-" + node;
      sim.run(a, node);
      if (choices.next_byte() % 4 == 0) sim.advance(choices.next_byte() % 10);
      ++trial;
    }
    const auto lines = sim.audit_lines();
    const auto path = dir.path() / ("audit-" + std::to_string(seed) + ".log");
    {
      FileAuditSink sink(path);
      for (const auto& l : lines) sink.append(l);
    }
    const NodeRegistry rebuilt(std::make_shared<MemoryAuditSink>(), 5, read_audit_log(path));
    const auto live = sim.core().registry().snapshot();
    t.expect(rebuilt.snapshot() == live, "seed " + std::to_string(seed) + " registry differs after rebuild");
    for (const auto& [node, rec] : live)
      t.expect(rebuilt.gating_status(node, sim.now()) == sim.core().registry().gating_status(node, sim.now()),
               "gating differs for " + node);
  }
  return t.verdict("10 seeded sequences of >= 50 events: audit-log rebuild equals live registry");
}

Verdict wire_robustness() {
  Tally t;
  const auto store = synthetic_store();
  auto audit = std::make_shared<MemoryAuditSink>();
  auto registry = std::make_shared<NodeRegistry>(audit);
  ServerCore core(store, registry, std::make_unique<SeededRandom>(110), [] { return std::int64_t{1'000'000}; });
  SeededRandom rng(111);

  const auto valid_req = encode_frame(MessageType::AutocheckReq, encode_payload(AutocheckRequest{"fuzz", "1"}));
  const auto valid_report = encode_frame(MessageType::Report, Bytes(60, 0x5a));
  std::size_t transitions = 0, crashes = 0;
  for (int i = 0; i < 10000; ++i) {
    Bytes frame;
    switch (i % 4) {
      case 0: frame = random_bytes(rng, rng.next_u32() % 80); break;
      case 1: {  // truncated valid request
        frame = valid_req;
        frame.resize(rng.next_u32() % valid_req.size());
        break;
      }
      case 2: {  // request with a corrupted type byte
        frame = valid_req;
        do {
          frame[4] = rng.next_byte();
        } while (frame[4] == 0x01);
        break;
      }
      default: {  // random header over a random payload, or a REPORT before any request
        frame = rng.next_byte() % 2 ? valid_report : random_bytes(rng, 5 + rng.next_u32() % 40);
        if (frame == valid_report) break;
        frame[4] = static_cast<std::uint8_t>(2 + rng.next_byte() % 5);
        break;
      }
    }
    try {
      ServerSession s(core);
      s.on_bytes(frame);
      s.on_end_of_stream();
      if (s.bound_program_id() || s.state() == ServerSession::State::Issued ||
          s.state() == ServerSession::State::Verified)
        ++transitions;
    } catch (...) {
      ++crashes;
    }
  }
  t.expect(crashes == 0, std::to_string(crashes) + " frames escaped as exceptions");
  t.expect(transitions == 0, std::to_string(transitions) + " frames caused ISSUED/VERIFIED");
  t.expect(core.issuance().size() == 0, "a challenge was issued");
  t.expect(audit->lines().empty(), "fuzzing produced status records");
  return t.verdict("10000 random/truncated/type-corrupted frames: no crash, no ISSUED/VERIFIED");
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Verdict()> run;
  };
  const Criterion criteria[] = {
      {"1 digest conformance", digest_conformance},
      {"2 out-mask linearity", out_mask_linearity},
      {"3 honest end-to-end", honest_end_to_end},
      {"4 tamper soundness", tamper_soundness},
      {"5 replay", replay_rejection},
      {"6 precompute attacker", precompute_attacker},
      {"7 bypass/strip", bypass_denied},
      {"8 crypto", crypto_properties},
      {"9 uniqueness", program_uniqueness},
      {"10 persistence", persistence_rebuild},
      {"11 wire robustness", wire_robustness},
  };
  int failed = 0;
  const auto suite_start = std::chrono::steady_clock::now();
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
    std::printf("%s  %-24s %6lld ms  %s\n", v.ok ? "PASS" : "FAIL", c.name, static_cast<long long>(ms.count()),
                v.detail.c_str());
    failed += v.ok ? 0 : 1;
  }
  const auto total = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - suite_start);
  const bool in_time = total.count() < 60'000;
  std::printf("%s  %-24s %6lld ms  whole suite under 60 s\n", in_time ? "PASS" : "FAIL", "runtime budget",
              static_cast<long long>(total.count()));
  failed += in_time ? 0 : 1;
  std::printf("%d criteria failed\n", failed);
  return failed;
}
