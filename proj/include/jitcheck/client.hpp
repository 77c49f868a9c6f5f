#pragma once

#include <chrono>
#include <optional>
#include <string>

#include "jitcheck/program.hpp"
#include "jitcheck/transport.hpp"
#include "jitcheck/wire.hpp"

namespace jitcheck {

enum class ClientState { Init, SentRequest, Executing, AwaitStatus, Running, Stopped };

const char* to_string(ClientState s);

/// Why a client stopped, from the node's point of view.
enum class StopReason { None, StatusFail, Timeout, BindingMismatch, MeasurementFailed, ProtocolError, TransportError };

const char* to_string(StopReason r);

struct ClientOptions {
  std::string client_version = "1";
  std::chrono::milliseconds timeout{30'000};
  std::uint32_t max_frame_bytes = kDefaultMaxFrameBytes;
};

struct CheckOutcome {
  ClientState state = ClientState::Init;
  std::optional<StatusMessage> status;
  StopReason stop_reason = StopReason::None;
  std::string detail;

  bool running() const { return state == ClientState::Running; }
};

/// Node side of the check: AUTOCHECK_REQ, run the received program over the
/// local artifacts, send the encrypted REPORT, then RUNNING on PASS and
/// STOPPED on anything else. Never throws for protocol or transport trouble;
/// it all ends in STOPPED.
CheckOutcome client_run_check(Transport& transport, const std::string& node_id, const ArtifactResolver& artifacts,
                              const EnvResolver& env, const ClientOptions& options = {});

/// Throws TransportError/ProtocolError on failure or timeout.
ResourceResponse client_request_resource(Transport& transport, const std::string& node_id,
                                         const std::string& resource_id, const ClientOptions& options = {});

/// Reads exactly one frame from a transport, waiting at most the timeout in
/// total. Returns nullopt on timeout.
class FrameReceiver {
 public:
  explicit FrameReceiver(Transport& transport, std::uint32_t max_frame_bytes = kDefaultMaxFrameBytes)
      : transport_(transport), decoder_(max_frame_bytes) {}

  std::optional<Frame> next(std::chrono::milliseconds timeout);

 private:
  Transport& transport_;
  FrameDecoder decoder_;
};

/// Resolves ArtifactId::id as a path relative to dir.
ArtifactResolver directory_resolver(std::string dir);
/// runtime.name / runtime.version / os.name from the build and uname.
EnvResolver host_env_resolver();

}  // namespace jitcheck
