#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "jitcheck/golden_store.hpp"
#include "jitcheck/report_crypto.hpp"
#include "jitcheck/wire.hpp"

namespace jitcheck {

using Clock = std::function<std::int64_t()>;

/// Seconds since epoch from the system clock.
std::int64_t system_now();

struct ServerSettings {
  std::uint32_t program_ttl_seconds = 60;
  std::uint32_t max_frame_bytes = kDefaultMaxFrameBytes;
  std::vector<std::string> env_props = default_env_props();
};

/// The store was configured without any golden artifacts.
class ServerMisconfigured : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// State shared by every session of one server: golden copies, the
/// single-use challenge table, the node registry, and the generator's rng.
/// All mutation goes through IssuanceTable/NodeRegistry locks; the rng has
/// its own.
class ServerCore {
 public:
  ServerCore(std::shared_ptr<const GoldenStore> store, std::shared_ptr<NodeRegistry> registry,
             std::unique_ptr<RandomSource> rng, Clock clock, ServerSettings settings = {});

  /// Generates and registers a program over every golden artifact.
  /// Throws InvalidRequest for an empty node_id, ServerMisconfigured for an
  /// empty store.
  MeasurementProgram issue_program(const AutocheckRequest& req);

  struct Verdict {
    StatusMessage status;
    /// The challenge was used up by this report (pass or fail).
    bool consumed = false;
  };

  /// Consumes the challenge, authenticates and decrypts the report, re-runs
  /// the same program over the golden bytes and compares digest lists.
  /// Records the outcome for bound_node_id before returning.
  Verdict verify_report(const EncryptedReport& report, const std::string& bound_node_id);
  /// Same, for a REPORT payload that did not even parse; records a FAIL.
  StatusMessage reject_malformed_report(const std::string& bound_node_id, const ProgramId& bound_program_id,
                                        const std::string& detail);

  /// GRANTED iff the node holds a fresh PASS and the resource exists. A
  /// missing resource is indistinguishable from a gating denial.
  ResourceResponse handle_resource_request(const ResourceRequest& req);

  std::int64_t now() const { return clock_(); }
  const GoldenStore& store() const { return *store_; }
  IssuanceTable& issuance() { return issuance_; }
  NodeRegistry& registry() { return *registry_; }
  const ServerSettings& settings() const { return settings_; }

 private:
  StatusMessage finish(const std::string& node_id, const ProgramId& id, ReasonCode reason, std::string detail);

  std::shared_ptr<const GoldenStore> store_;
  std::shared_ptr<NodeRegistry> registry_;
  std::mutex rng_mu_;
  std::unique_ptr<RandomSource> rng_;
  Clock clock_;
  ServerSettings settings_;
  IssuanceTable issuance_;
};

/// One connection's state machine. Single owner: callers never feed the same
/// session from two threads.
class ServerSession {
 public:
  /// Closed is the teardown state after a protocol or session error.
  enum class State { AwaitRequest, Issued, Verified, Closed };

  explicit ServerSession(ServerCore& core);

  /// Feeds received bytes; returns encoded frames to send back, in order.
  std::vector<Bytes> on_bytes(ByteView data);
  /// Peer closed its side. A buffered partial frame is a protocol error.
  void on_end_of_stream();

  State state() const { return state_; }
  bool closed() const { return state_ == State::Closed; }
  const std::string& bound_node_id() const { return node_id_; }
  const std::optional<ProgramId>& bound_program_id() const { return program_id_; }
  /// Why the session was torn down, empty if it was not.
  const std::string& error() const { return error_; }

 private:
  void handle(const Frame& f, std::vector<Bytes>& out);
  void teardown(std::string why);

  ServerCore& core_;
  FrameDecoder decoder_;
  State state_ = State::AwaitRequest;
  std::string node_id_;
  std::optional<ProgramId> program_id_;
  std::string error_;
};

const char* to_string(ServerSession::State s);

}  // namespace jitcheck
