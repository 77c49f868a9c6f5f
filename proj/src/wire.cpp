#include "jitcheck/wire.hpp"

#include <limits>

namespace jitcheck {

const char* to_string(MessageType t) {
  switch (t) {
    case MessageType::AutocheckReq: return "AUTOCHECK_REQ";
    case MessageType::Program: return "PROGRAM";
    case MessageType::Report: return "REPORT";
    case MessageType::Status: return "STATUS";
    case MessageType::ResourceReq: return "RESOURCE_REQ";
    case MessageType::ResourceResp: return "RESOURCE_RESP";
  }
  return "?";
}

const char* to_string(ReasonCode r) {
  switch (r) {
    case ReasonCode::None: return "NONE";
    case ReasonCode::Malformed: return "MALFORMED";
    case ReasonCode::UnknownChallenge: return "UNKNOWN_CHALLENGE";
    case ReasonCode::Replay: return "REPLAY";
    case ReasonCode::Expired: return "EXPIRED";
    case ReasonCode::AuthFail: return "AUTH_FAIL";
    case ReasonCode::MalformedReport: return "MALFORMED_REPORT";
    case ReasonCode::DigestMismatch: return "DIGEST_MISMATCH";
    case ReasonCode::NodeMismatch: return "NODE_MISMATCH";
    case ReasonCode::ProtocolViolation: return "PROTOCOL_ERROR";
    case ReasonCode::ServerError: return "SERVER_ERROR";
  }
  return "?";
}

std::optional<ReasonCode> reason_from_byte(std::uint8_t b) {
  if (b > static_cast<std::uint8_t>(ReasonCode::ServerError)) return std::nullopt;
  return static_cast<ReasonCode>(b);
}

namespace {
bool known_type(std::uint8_t t) { return t >= 0x01 && t <= 0x06; }
}  // namespace

Bytes encode_frame(MessageType type, ByteView payload) {
  if (payload.size() > std::numeric_limits<std::uint32_t>::max()) throw std::length_error("frame payload too long");
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(payload.size()));
  w.u8(static_cast<std::uint8_t>(type));
  w.raw(payload);
  return std::move(w).take();
}

void FrameDecoder::push(ByteView bytes) { buffer_.insert(buffer_.end(), bytes.begin(), bytes.end()); }

std::optional<Frame> FrameDecoder::next() {
  if (buffer_.size() < kFrameHeaderBytes) return std::nullopt;
  const std::uint32_t len = (std::uint32_t{buffer_[0]} << 24) | (std::uint32_t{buffer_[1]} << 16) |
                            (std::uint32_t{buffer_[2]} << 8) | buffer_[3];
  const std::uint8_t type = buffer_[4];
  if (len > max_payload_) throw ProtocolError("frame payload of " + std::to_string(len) + " bytes exceeds limit");
  if (!known_type(type)) throw ProtocolError("unknown message type " + std::to_string(type));
  if (buffer_.size() < kFrameHeaderBytes + len) return std::nullopt;

  Frame f;
  f.type = static_cast<MessageType>(type);
  f.payload.assign(buffer_.begin() + kFrameHeaderBytes, buffer_.begin() + kFrameHeaderBytes + len);
  buffer_.erase(buffer_.begin(), buffer_.begin() + kFrameHeaderBytes + len);
  return f;
}

void FrameDecoder::finish() const {
  if (!buffer_.empty()) throw ProtocolError("truncated frame");
}

Bytes encode_payload(const AutocheckRequest& m) {
  ByteWriter w;
  w.str16(m.node_id);
  w.str16(m.client_version);
  return std::move(w).take();
}

Bytes encode_payload(const StatusMessage& m) {
  ByteWriter w;
  w.raw(m.program_id);
  w.u8(m.pass ? 1 : 0);
  w.u8(static_cast<std::uint8_t>(m.reason));
  return std::move(w).take();
}

Bytes encode_payload(const ResourceRequest& m) {
  ByteWriter w;
  w.str16(m.node_id);
  w.str16(m.resource_id);
  return std::move(w).take();
}

Bytes encode_payload(const ResourceResponse& m) {
  if (m.payload.size() > std::numeric_limits<std::uint32_t>::max()) throw std::length_error("resource too large");
  ByteWriter w;
  w.u8(m.granted ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(m.payload.size()));
  w.raw(m.payload);
  return std::move(w).take();
}

AutocheckRequest decode_autocheck_request(ByteView payload) {
  ByteReader r(payload);
  AutocheckRequest m;
  m.node_id = r.str16("node_id");
  m.client_version = r.str16("client_version");
  r.expect_end("AUTOCHECK_REQ");
  return m;
}

StatusMessage decode_status(ByteView payload) {
  ByteReader r(payload);
  StatusMessage m;
  m.program_id = r.block16("program_id");
  const auto status = r.u8("status");
  if (status > 1) throw DecodeError("invalid status byte");
  m.pass = status == 1;
  const auto reason = reason_from_byte(r.u8("reason"));
  if (!reason) throw DecodeError("unknown reason code");
  m.reason = *reason;
  r.expect_end("STATUS");
  return m;
}

ResourceRequest decode_resource_request(ByteView payload) {
  ByteReader r(payload);
  ResourceRequest m;
  m.node_id = r.str16("node_id");
  m.resource_id = r.str16("resource_id");
  r.expect_end("RESOURCE_REQ");
  return m;
}

ResourceResponse decode_resource_response(ByteView payload) {
  ByteReader r(payload);
  ResourceResponse m;
  const auto status = r.u8("status");
  if (status > 1) throw DecodeError("invalid status byte");
  m.granted = status == 1;
  const auto len = r.u32("resource length");
  auto body = r.raw(len, "resource payload");
  m.payload.assign(body.begin(), body.end());
  r.expect_end("RESOURCE_RESP");
  return m;
}

}  // namespace jitcheck
