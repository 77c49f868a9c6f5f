#include "jitcheck/server.hpp"

#include <chrono>

namespace jitcheck {

std::int64_t system_now() {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
}

ServerCore::ServerCore(std::shared_ptr<const GoldenStore> store, std::shared_ptr<NodeRegistry> registry,
                       std::unique_ptr<RandomSource> rng, Clock clock, ServerSettings settings)
    : store_(std::move(store)),
      registry_(std::move(registry)),
      rng_(std::move(rng)),
      clock_(std::move(clock)),
      settings_(std::move(settings)) {
  if (!store_ || !registry_ || !rng_ || !clock_) throw std::invalid_argument("server core is missing a component");
  if (settings_.program_ttl_seconds == 0) throw std::invalid_argument("program ttl must be positive");
}

MeasurementProgram ServerCore::issue_program(const AutocheckRequest& req) {
  if (req.node_id.empty()) throw InvalidRequest("empty node_id");
  if (store_->empty()) throw ServerMisconfigured("golden store has no artifacts");
  MeasurementProgram p;
  {
    std::lock_guard lock(rng_mu_);
    p = generate_program(req.node_id, store_->targets(), settings_.env_props, now(), settings_.program_ttl_seconds,
                         *rng_);
  }
  issuance_.register_issued(p);
  return p;
}

StatusMessage ServerCore::finish(const std::string& node_id, const ProgramId& id, ReasonCode reason,
                                 std::string detail) {
  const bool pass = reason == ReasonCode::None;
  std::string text = pass ? "PASS" : to_string(reason);
  if (!detail.empty()) text += ": " + detail;
  registry_->record_status(node_id, id, pass ? NodeStatus::Pass : NodeStatus::Fail, std::move(text), now());
  return StatusMessage{id, pass, reason};
}

StatusMessage ServerCore::reject_malformed_report(const std::string& bound_node_id, const ProgramId& bound_program_id,
                                                  const std::string& detail) {
  return finish(bound_node_id, bound_program_id, ReasonCode::MalformedReport, detail);
}

ServerCore::Verdict ServerCore::verify_report(const EncryptedReport& report, const std::string& bound_node_id) {
  const auto consumed = issuance_.consume(report.program_id, bound_node_id, now());
  auto refuse = [&](ReasonCode reason) { return Verdict{finish(bound_node_id, report.program_id, reason, ""), false}; };
  switch (consumed.outcome) {
    case ConsumeOutcome::Ok: break;
    case ConsumeOutcome::UnknownChallenge: return refuse(ReasonCode::UnknownChallenge);
    case ConsumeOutcome::Replay: return refuse(ReasonCode::Replay);
    case ConsumeOutcome::Expired: return refuse(ReasonCode::Expired);
    case ConsumeOutcome::NodeMismatch: return refuse(ReasonCode::NodeMismatch);
  }
  const MeasurementProgram& program = *consumed.program;
  auto verdict = [&](ReasonCode reason, std::string detail = {}) {
    return Verdict{finish(bound_node_id, program.program_id, reason, std::move(detail)), true};
  };

  MeasurementReport received;
  try {
    received = decrypt_report(program, report);
  } catch (const CryptoError& e) {
    const auto reason = e.kind() == CryptoError::Kind::Malformed ? ReasonCode::MalformedReport : ReasonCode::AuthFail;
    return verdict(reason, e.what());
  }
  if (received.node_id != program.node_id) return verdict(ReasonCode::NodeMismatch);

  // Same program, golden bytes.
  std::vector<ByteView> golden;
  golden.reserve(program.targets.size());
  for (const auto& t : program.targets) {
    const auto* a = store_->find(t);
    if (!a) return verdict(ReasonCode::ServerError, "golden copy vanished");
    golden.emplace_back(a->bytes);
  }
  const auto expected = measure_parallel(program, golden);

  bool match = received.artifact_digests.size() == expected.size();
  for (std::size_t i = 0; match && i < expected.size(); ++i)
    match = received.artifact_digests[i].artifact == program.targets[i] && received.artifact_digests[i].digest == expected[i];
  return verdict(match ? ReasonCode::None : ReasonCode::DigestMismatch);
}

ResourceResponse ServerCore::handle_resource_request(const ResourceRequest& req) {
  if (registry_->gating_status(req.node_id, now()) != NodeStatus::Pass) return {};
  const auto* a = store_->find_resource(req.resource_id);
  if (!a) return {};
  return ResourceResponse{true, a->bytes};
}

// --- session ----------------------------------------------------------------

const char* to_string(ServerSession::State s) {
  switch (s) {
    case ServerSession::State::AwaitRequest: return "AWAIT_REQUEST";
    case ServerSession::State::Issued: return "ISSUED";
    case ServerSession::State::Verified: return "VERIFIED";
    case ServerSession::State::Closed: return "CLOSED";
  }
  return "?";
}

ServerSession::ServerSession(ServerCore& core) : core_(core), decoder_(core.settings().max_frame_bytes) {}

void ServerSession::teardown(std::string why) {
  state_ = State::Closed;
  error_ = std::move(why);
}

std::vector<Bytes> ServerSession::on_bytes(ByteView data) {
  std::vector<Bytes> out;
  if (closed()) return out;
  decoder_.push(data);
  try {
    while (!closed()) {
      auto frame = decoder_.next();
      if (!frame) break;
      handle(*frame, out);
    }
  } catch (const ProtocolError& e) {
    teardown(e.what());
  }
  return out;
}

void ServerSession::on_end_of_stream() {
  if (closed()) return;
  try {
    decoder_.finish();
    teardown("peer closed");
  } catch (const ProtocolError& e) {
    teardown(e.what());
  }
}

void ServerSession::handle(const Frame& f, std::vector<Bytes>& out) {
  switch (f.type) {
    case MessageType::AutocheckReq: {
      if (state_ != State::AwaitRequest) throw ProtocolError("AUTOCHECK_REQ out of order");
      AutocheckRequest req;
      try {
        req = decode_autocheck_request(f.payload);
        if (req.node_id.empty()) throw DecodeError("empty node_id");
      } catch (const DecodeError& e) {
        out.push_back(encode_frame(MessageType::Status, encode_payload(StatusMessage{{}, false, ReasonCode::Malformed})));
        teardown(std::string("malformed AUTOCHECK_REQ: ") + e.what());
        return;
      }
      MeasurementProgram p;
      try {
        p = core_.issue_program(req);
      } catch (const std::exception& e) {
        out.push_back(encode_frame(MessageType::Status, encode_payload(StatusMessage{{}, false, ReasonCode::ServerError})));
        teardown(std::string("cannot issue program: ") + e.what());
        return;
      }
      node_id_ = req.node_id;
      program_id_ = p.program_id;
      state_ = State::Issued;
      out.push_back(encode_frame(MessageType::Program, encode_program(p)));
      return;
    }
    case MessageType::Report: {
      if (state_ != State::Issued) throw ProtocolError("REPORT out of order");
      EncryptedReport rep;
      try {
        rep = decode_encrypted_report(f.payload);
      } catch (const DecodeError& e) {
        try {
          const auto status = core_.reject_malformed_report(node_id_, *program_id_, e.what());
          out.push_back(encode_frame(MessageType::Status, encode_payload(status)));
        } catch (const StoreError&) {
          // Unrecorded verdicts are never sent.
        }
        teardown(std::string("malformed REPORT: ") + e.what());
        return;
      }
      ServerCore::Verdict verdict;
      try {
        verdict = core_.verify_report(rep, node_id_);
      } catch (const StoreError& e) {
        // Audit write failed: no status was recorded, so none is sent.
        teardown(std::string("status not recorded: ") + e.what());
        return;
      }
      out.push_back(encode_frame(MessageType::Status, encode_payload(verdict.status)));
      // Only a consumed challenge counts as verified; refused reports end the session.
      if (verdict.consumed)
        state_ = State::Verified;
      else
        teardown(std::string("report refused: ") + to_string(verdict.status.reason));
      return;
    }
    case MessageType::ResourceReq: {
      ResourceRequest req;
      try {
        req = decode_resource_request(f.payload);
      } catch (const DecodeError& e) {
        throw ProtocolError(std::string("malformed RESOURCE_REQ: ") + e.what());
      }
      out.push_back(encode_frame(MessageType::ResourceResp, encode_payload(core_.handle_resource_request(req))));
      return;
    }
    case MessageType::Program:
    case MessageType::Status:
    case MessageType::ResourceResp:
      throw ProtocolError(std::string(to_string(f.type)) + " is not accepted by the server");
  }
}

}  // namespace jitcheck
