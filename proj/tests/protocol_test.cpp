#include <doctest.h>

#include <thread>

#include "jitcheck/client.hpp"
#include "jitcheck/server.hpp"
#include "jitcheck/transport.hpp"
#include "support/fixtures.hpp"
#include "support/temp_dir.hpp"

using namespace jitcheck;
using testing_support::random_bytes;
using testing_support::store_of;

namespace {

struct Harness {
  explicit Harness(std::shared_ptr<const GoldenStore> s, std::uint64_t seed = 1, std::int64_t freshness = 3600)
      : store(std::move(s)),
        audit(std::make_shared<MemoryAuditSink>()),
        registry(std::make_shared<NodeRegistry>(audit, freshness)),
        core(store, registry, std::make_unique<SeededRandom>(seed), [this] { return now; }) {}

  ArtifactResolver golden() const {
    return [s = store](const ArtifactId& id) -> std::optional<Bytes> {
      if (const auto* a = s->find(id)) return a->bytes;
      return std::nullopt;
    };
  }

  std::shared_ptr<const GoldenStore> store;
  std::shared_ptr<MemoryAuditSink> audit;
  std::shared_ptr<NodeRegistry> registry;
  std::int64_t now = 1'000'000;
  ServerCore core;
};

std::shared_ptr<const GoldenStore> two_artifacts(std::uint64_t seed = 3) {
  SeededRandom rng(seed);
  return store_of({{"sp2pen.jar", random_bytes(rng, 300)}, {"lib/core.jar", random_bytes(rng, 64)}});
}

const ClientOptions kFast{.timeout = std::chrono::milliseconds(200)};

Bytes autocheck(const std::string& node) {
  return encode_frame(MessageType::AutocheckReq, encode_payload(AutocheckRequest{node, "1"}));
}

Frame single_frame(const std::vector<Bytes>& out) {
  REQUIRE(out.size() == 1);
  FrameDecoder d;
  d.push(out[0]);
  auto f = d.next();
  REQUIRE(f);
  return *f;
}

}  // namespace

TEST_CASE("server issues a program over every golden artifact in manifest order") {
  Harness h(two_artifacts());
  ServerSession s(h.core);
  const auto f = single_frame(s.on_bytes(autocheck("node-1")));
  REQUIRE(f.type == MessageType::Program);
  const auto p = decode_program(f.payload);
  CHECK(p.targets == std::vector<ArtifactId>{{"sp2pen.jar", "1"}, {"lib/core.jar", "1"}});
  CHECK(p.node_id == "node-1");
  CHECK(p.issued_at == h.now);
  CHECK(p.ttl_seconds == 60);
  CHECK(s.state() == ServerSession::State::Issued);
  CHECK(s.bound_program_id() == p.program_id);
  CHECK(h.core.issuance().state(p.program_id) == IssueState::Issued);

  ServerSession s2(h.core);
  const auto p2 = decode_program(single_frame(s2.on_bytes(autocheck("node-1"))).payload);
  CHECK(p2.program_id != p.program_id);
}

TEST_CASE("empty node_id is MALFORMED") {
  Harness h(two_artifacts());
  ServerSession s(h.core);
  const auto f = single_frame(s.on_bytes(autocheck("")));
  REQUIRE(f.type == MessageType::Status);
  const auto st = decode_status(f.payload);
  CHECK_FALSE(st.pass);
  CHECK(st.reason == ReasonCode::Malformed);
  CHECK(s.closed());
  CHECK(h.core.issuance().size() == 0);
}

TEST_CASE("empty golden store is a server misconfiguration") {
  Harness h(std::make_shared<const GoldenStore>());
  CHECK_THROWS_AS(h.core.issue_program(AutocheckRequest{"n", "1"}), ServerMisconfigured);
  ServerSession s(h.core);
  const auto st = decode_status(single_frame(s.on_bytes(autocheck("n"))).payload);
  CHECK(st.reason == ReasonCode::ServerError);
  CHECK(s.closed());
}

TEST_CASE("out-of-order messages tear the session down without a transition") {
  Harness h(two_artifacts());
  SUBCASE("report before request") {
    ServerSession s(h.core);
    CHECK(s.on_bytes(encode_frame(MessageType::Report, Bytes(40, 0))).empty());
    CHECK(s.closed());
  }
  SUBCASE("server-to-client message types") {
    for (auto t : {MessageType::Program, MessageType::Status, MessageType::ResourceResp}) {
      ServerSession s(h.core);
      CHECK(s.on_bytes(encode_frame(t, Bytes{})).empty());
      CHECK(s.closed());
    }
  }
  SUBCASE("second request") {
    ServerSession s(h.core);
    s.on_bytes(autocheck("n"));
    CHECK(s.on_bytes(autocheck("n")).empty());
    CHECK(s.closed());
  }
  SUBCASE("closed sessions ignore input") {
    ServerSession s(h.core);
    s.on_bytes(encode_frame(MessageType::Status, Bytes{}));
    CHECK(s.on_bytes(autocheck("n")).empty());
    CHECK(s.state() == ServerSession::State::Closed);
  }
}

TEST_CASE("honest node reaches RUNNING and is granted resources") {
  Harness h(two_artifacts());
  LoopbackTransport t(h.core);
  const auto out = client_run_check(t, "node-1", h.golden(), nullptr, kFast);
  CHECK(out.state == ClientState::Running);
  REQUIRE(out.status);
  CHECK(out.status->pass);
  CHECK(out.status->reason == ReasonCode::None);
  CHECK(t.session().state() == ServerSession::State::Verified);
  CHECK(h.registry->get_status("node-1").status == NodeStatus::Pass);
  CHECK(h.audit->lines().size() == 1);

  const auto resp = client_request_resource(t, "node-1", "lib/core.jar", kFast);
  CHECK(resp.granted);
  CHECK(resp.payload == h.store->find_resource("lib/core.jar")->bytes);
}

TEST_CASE("one flipped bit yields DIGEST_MISMATCH and STOPPED") {
  Harness h(two_artifacts());
  const auto golden = h.golden();
  const ArtifactResolver tampered = [&](const ArtifactId& id) {
    auto b = golden(id);
    if (id.id == "lib/core.jar") (*b)[10] ^= 0x20;
    return b;
  };
  LoopbackTransport t(h.core);
  const auto out = client_run_check(t, "node-1", tampered, nullptr, kFast);
  CHECK(out.state == ClientState::Stopped);
  CHECK(out.stop_reason == StopReason::StatusFail);
  REQUIRE(out.status);
  CHECK(out.status->reason == ReasonCode::DigestMismatch);
  CHECK(h.registry->get_status("node-1").status == NodeStatus::Fail);
  CHECK_FALSE(client_request_resource(t, "node-1", "sp2pen.jar", kFast).granted);
}

TEST_CASE("the same report delivered twice is a replay") {
  Harness h(two_artifacts());
  LoopbackTransport first(h.core);
  REQUIRE(client_run_check(first, "node-1", h.golden(), nullptr, kFast).running());
  const auto report_frame = first.sent().at(1);

  ServerSession second(h.core);
  second.on_bytes(autocheck("node-1"));
  const auto st = decode_status(single_frame(second.on_bytes(report_frame)).payload);
  CHECK_FALSE(st.pass);
  CHECK(st.reason == ReasonCode::Replay);
  CHECK(second.state() == ServerSession::State::Closed);
  CHECK(h.registry->get_status("node-1").status == NodeStatus::Fail);
}

TEST_CASE("late report is EXPIRED") {
  Harness h(two_artifacts());
  ServerSession s(h.core);
  const auto p = decode_program(single_frame(s.on_bytes(autocheck("n"))).payload);
  const auto report = execute_program(p, h.golden(), nullptr);
  h.now += 61;
  const auto st = decode_status(single_frame(s.on_bytes(encode_frame(
      MessageType::Report, encode_encrypted_report(encrypt_report(p, report))))).payload);
  CHECK(st.reason == ReasonCode::Expired);
  CHECK(h.core.issuance().state(p.program_id) == IssueState::Expired);
}

TEST_CASE("report checks: unknown challenge, auth failure, node mismatch, malformed") {
  Harness h(two_artifacts());
  auto send_report = [&](ServerSession& s, const EncryptedReport& e) {
    return decode_status(single_frame(s.on_bytes(encode_frame(MessageType::Report, encode_encrypted_report(e)))).payload);
  };
  ServerSession s(h.core);
  const auto p = decode_program(single_frame(s.on_bytes(autocheck("n"))).payload);
  const auto good = encrypt_report(p, execute_program(p, h.golden(), nullptr));

  SUBCASE("unknown challenge") {
    auto e = good;
    e.program_id[0] ^= 1;
    CHECK(send_report(s, e).reason == ReasonCode::UnknownChallenge);
    CHECK(h.core.issuance().state(p.program_id) == IssueState::Issued);
  }
  SUBCASE("corrupted ciphertext") {
    auto e = good;
    e.ciphertext[0] ^= 1;
    CHECK(send_report(s, e).reason == ReasonCode::AuthFail);
    CHECK(s.state() == ServerSession::State::Verified);
  }
  SUBCASE("program of another node") {
    ServerSession other(h.core);
    other.on_bytes(autocheck("m"));
    CHECK(send_report(other, good).reason == ReasonCode::NodeMismatch);
    CHECK(h.core.issuance().state(p.program_id) == IssueState::Issued);
  }
  SUBCASE("report naming another node inside a valid mac") {
    auto r = execute_program(p, h.golden(), nullptr);
    r.node_id = "someone-else";
    CHECK(send_report(s, encrypt_report(p, r)).reason == ReasonCode::NodeMismatch);
  }
  SUBCASE("digest list reordered") {
    auto r = execute_program(p, h.golden(), nullptr);
    std::swap(r.artifact_digests[0], r.artifact_digests[1]);
    CHECK(send_report(s, encrypt_report(p, r)).reason == ReasonCode::DigestMismatch);
  }
  SUBCASE("undecodable REPORT payload") {
    const auto st = decode_status(single_frame(s.on_bytes(encode_frame(MessageType::Report, Bytes{1, 2, 3}))).payload);
    CHECK(st.reason == ReasonCode::MalformedReport);
    CHECK(s.closed());
    CHECK(h.registry->get_status("n").status == NodeStatus::Fail);
  }
}

TEST_CASE("resource gating") {
  Harness h(two_artifacts(), 1, 100);
  SUBCASE("no history is denied") {
    CHECK_FALSE(h.core.handle_resource_request({"nobody", "sp2pen.jar"}).granted);
  }
  SUBCASE("fresh pass is granted, stale pass and unknown resources are denied") {
    LoopbackTransport t(h.core);
    REQUIRE(client_run_check(t, "n", h.golden(), nullptr, kFast).running());
    CHECK(h.core.handle_resource_request({"n", "sp2pen.jar"}).granted);
    const auto missing = h.core.handle_resource_request({"n", "no-such-resource"});
    CHECK_FALSE(missing.granted);
    CHECK(missing.payload.empty());
    h.now += 100;
    CHECK(h.core.handle_resource_request({"n", "sp2pen.jar"}).granted);
    h.now += 1;
    const auto stale = h.core.handle_resource_request({"n", "sp2pen.jar"});
    CHECK_FALSE(stale.granted);
    // Denials look identical whatever the cause.
    CHECK(encode_payload(stale) == encode_payload(missing));
  }
}

TEST_CASE("client binding and measurement failures stop without a report") {
  Harness h(two_artifacts());
  SUBCASE("program for another node") {
    // A server that answers node-1's request with a program issued to node-2.
    class Impostor final : public Transport {
     public:
      explicit Impostor(ServerCore& core) : core_(core) {}
      void send(ByteView) override {
        ++sends;
        if (sends > 1) return;
        const auto p = core_.issue_program(AutocheckRequest{"node-2", "1"});
        pending_ = encode_frame(MessageType::Program, encode_program(p));
      }
      std::optional<Bytes> receive(std::chrono::milliseconds) override {
        if (pending_.empty()) return std::nullopt;
        return std::exchange(pending_, {});
      }
      void close() override {}
      int sends = 0;

     private:
      ServerCore& core_;
      Bytes pending_;
    } impostor(h.core);
    const auto out = client_run_check(impostor, "node-1", h.golden(), nullptr, kFast);
    CHECK(out.state == ClientState::Stopped);
    CHECK(out.stop_reason == StopReason::BindingMismatch);
    CHECK(impostor.sends == 1);
  }
  SUBCASE("unresolvable artifact") {
    LoopbackTransport t(h.core);
    const ArtifactResolver none = [](const ArtifactId&) -> std::optional<Bytes> { return std::nullopt; };
    const auto out = client_run_check(t, "node-1", none, nullptr, kFast);
    CHECK(out.state == ClientState::Stopped);
    CHECK(out.stop_reason == StopReason::MeasurementFailed);
    CHECK(t.sent().size() == 1);
    CHECK(t.session().state() == ServerSession::State::Issued);
  }
  SUBCASE("silent server times out") {
    class Silent final : public Transport {
     public:
      void send(ByteView) override {}
      std::optional<Bytes> receive(std::chrono::milliseconds) override { return std::nullopt; }
      void close() override {}
    } silent;
    const auto out = client_run_check(silent, "node-1", h.golden(), nullptr, kFast);
    CHECK(out.state == ClientState::Stopped);
    CHECK(out.stop_reason == StopReason::Timeout);
  }
  SUBCASE("refused request") {
    LoopbackTransport t(h.core);
    const auto out = client_run_check(t, "", h.golden(), nullptr, kFast);
    CHECK(out.state == ClientState::Stopped);
    REQUIRE(out.status);
    CHECK(out.status->reason == ReasonCode::Malformed);
  }
}

TEST_CASE("end-to-end honesty for many seeds and stores") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SeededRandom rng(seed);
    std::vector<std::pair<std::string, Bytes>> files;
    const auto n = 1 + rng.next_u32() % 4;
    for (std::uint32_t i = 0; i < n; ++i) files.emplace_back("f" + std::to_string(i), random_bytes(rng, rng.next_u32() % 2000));
    Harness h(store_of(files), seed);
    LoopbackTransport t(h.core);
    CHECK(client_run_check(t, "n", h.golden(), nullptr, kFast).running());
    CHECK(h.registry->get_status("n").status == NodeStatus::Pass);
  }
}

TEST_CASE("TCP server handles a check and a resource request") {
  Harness h(two_artifacts());
  TcpServer server(h.core, Endpoint{"127.0.0.1", 0});
  std::thread loop([&] { server.run(); });
  {
    TcpTransport t(Endpoint{"127.0.0.1", server.port()});
    const auto out = client_run_check(t, "tcp-node", h.golden(), nullptr, ClientOptions{});
    CHECK(out.state == ClientState::Running);
    CHECK(client_request_resource(t, "tcp-node", "sp2pen.jar").granted);
  }
  {
    // Several nodes at once.
    std::vector<std::thread> nodes;
    std::atomic<int> running{0};
    for (int i = 0; i < 4; ++i)
      nodes.emplace_back([&, i] {
        TcpTransport t(Endpoint{"127.0.0.1", server.port()});
        if (client_run_check(t, "node-" + std::to_string(i), h.golden(), nullptr).running()) ++running;
      });
    for (auto& n : nodes) n.join();
    CHECK(running == 4);
  }
  server.stop();
  loop.join();
  CHECK_THROWS_AS(TcpTransport(Endpoint{"127.0.0.1", server.port()}), TransportError);
}

TEST_CASE("endpoint parsing") {
  CHECK(parse_endpoint("localhost:9000").port == 9000);
  CHECK(parse_endpoint("localhost").port == kDefaultPort);
  CHECK_THROWS_AS(parse_endpoint("host:abc"), std::invalid_argument);
  CHECK_THROWS_AS(parse_endpoint(":80"), std::invalid_argument);
  CHECK_THROWS_AS(parse_endpoint("h:70000"), std::invalid_argument);
}
