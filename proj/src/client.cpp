#include "jitcheck/client.hpp"

#include <sys/utsname.h>

#include <filesystem>
#include <fstream>

#include "jitcheck/report_crypto.hpp"

namespace jitcheck {

const char* to_string(ClientState s) {
  switch (s) {
    case ClientState::Init: return "INIT";
    case ClientState::SentRequest: return "SENT_REQUEST";
    case ClientState::Executing: return "EXECUTING";
    case ClientState::AwaitStatus: return "AWAIT_STATUS";
    case ClientState::Running: return "RUNNING";
    case ClientState::Stopped: return "STOPPED";
  }
  return "?";
}

const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::None: return "NONE";
    case StopReason::StatusFail: return "STATUS_FAIL";
    case StopReason::Timeout: return "TIMEOUT";
    case StopReason::BindingMismatch: return "BINDING_MISMATCH";
    case StopReason::MeasurementFailed: return "MEASUREMENT_FAILED";
    case StopReason::ProtocolError: return "PROTOCOL_ERROR";
    case StopReason::TransportError: return "TRANSPORT_ERROR";
  }
  return "?";
}

std::optional<Frame> FrameReceiver::next(std::chrono::milliseconds timeout) {
  using clock = std::chrono::steady_clock;
  const auto deadline = clock::now() + timeout;
  for (;;) {
    if (auto f = decoder_.next()) return f;
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now());
    if (left.count() <= 0) return std::nullopt;
    // A transport returns nullopt only once the wait has elapsed.
    auto chunk = transport_.receive(left);
    if (!chunk) return std::nullopt;
    decoder_.push(*chunk);
  }
}

namespace {

class ClientRun {
 public:
  ClientRun(Transport& t, const ClientOptions& o) : transport_(t), options_(o), frames_(t, o.max_frame_bytes) {}

  CheckOutcome stop(StopReason reason, std::string detail) {
    outcome_.state = ClientState::Stopped;
    outcome_.stop_reason = reason;
    outcome_.detail = std::move(detail);
    return outcome_;
  }

  CheckOutcome run(const std::string& node_id, const ArtifactResolver& artifacts, const EnvResolver& env) {
    try {
      transport_.send(encode_frame(MessageType::AutocheckReq,
                                   encode_payload(AutocheckRequest{node_id, options_.client_version})));
      outcome_.state = ClientState::SentRequest;

      auto frame = frames_.next(options_.timeout);
      if (!frame) return stop(StopReason::Timeout, "no PROGRAM before timeout");
      if (frame->type == MessageType::Status) {
        outcome_.status = decode_status(frame->payload);
        return stop(StopReason::StatusFail, "request refused");
      }
      if (frame->type != MessageType::Program)
        return stop(StopReason::ProtocolError, std::string("expected PROGRAM, got ") + to_string(frame->type));
      const auto program = decode_program(frame->payload);
      if (program.node_id != node_id) return stop(StopReason::BindingMismatch, "program issued for " + program.node_id);

      outcome_.state = ClientState::Executing;
      MeasurementReport report;
      try {
        report = execute_program(program, artifacts, env, Execution::Parallel);
      } catch (const MeasurementError& e) {
        return stop(StopReason::MeasurementFailed, e.what());
      }
      transport_.send(encode_frame(MessageType::Report, encode_encrypted_report(encrypt_report(program, report))));
      outcome_.state = ClientState::AwaitStatus;

      frame = frames_.next(options_.timeout);
      if (!frame) return stop(StopReason::Timeout, "no STATUS before timeout");
      if (frame->type != MessageType::Status)
        return stop(StopReason::ProtocolError, std::string("expected STATUS, got ") + to_string(frame->type));
      outcome_.status = decode_status(frame->payload);
      if (!outcome_.status->pass || outcome_.status->program_id != program.program_id)
        return stop(StopReason::StatusFail, to_string(outcome_.status->reason));
      outcome_.state = ClientState::Running;
      return outcome_;
    } catch (const TransportError& e) {
      return stop(StopReason::TransportError, e.what());
    } catch (const ProtocolError& e) {
      return stop(StopReason::ProtocolError, e.what());
    } catch (const DecodeError& e) {
      return stop(StopReason::ProtocolError, e.what());
    }
  }

 private:
  Transport& transport_;
  const ClientOptions& options_;
  FrameReceiver frames_;
  CheckOutcome outcome_;
};

}  // namespace

CheckOutcome client_run_check(Transport& transport, const std::string& node_id, const ArtifactResolver& artifacts,
                              const EnvResolver& env, const ClientOptions& options) {
  return ClientRun(transport, options).run(node_id, artifacts, env);
}

ResourceResponse client_request_resource(Transport& transport, const std::string& node_id,
                                         const std::string& resource_id, const ClientOptions& options) {
  transport.send(encode_frame(MessageType::ResourceReq, encode_payload(ResourceRequest{node_id, resource_id})));
  FrameReceiver frames(transport, options.max_frame_bytes);
  auto frame = frames.next(options.timeout);
  if (!frame) throw TransportError("no RESOURCE_RESP before timeout");
  if (frame->type != MessageType::ResourceResp)
    throw ProtocolError(std::string("expected RESOURCE_RESP, got ") + to_string(frame->type));
  try {
    return decode_resource_response(frame->payload);
  } catch (const DecodeError& e) {
    throw ProtocolError(std::string("malformed RESOURCE_RESP: ") + e.what());
  }
}

ArtifactResolver directory_resolver(std::string dir) {
  return [dir = std::filesystem::path(std::move(dir))](const ArtifactId& a) -> std::optional<Bytes> {
    const auto path = dir / a.id;
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) return std::nullopt;
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) return std::nullopt;
    return data;
  };
}

EnvResolver host_env_resolver() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (name == "runtime.name") return std::string("jitcheck");
    if (name == "runtime.version") return std::string(__VERSION__);
    if (name == "os.name") {
      utsname u{};
      if (::uname(&u) == 0) return std::string(u.sysname);
    }
    return std::nullopt;
  };
}

}  // namespace jitcheck
