#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>

#include "jitcheck/bytes.hpp"
#include "jitcheck/program.hpp"

namespace jitcheck {

// Frame: be32 payload length, type byte, payload. All integers big-endian.

enum class MessageType : std::uint8_t {
  AutocheckReq = 0x01,
  Program = 0x02,
  Report = 0x03,
  Status = 0x04,
  ResourceReq = 0x05,
  ResourceResp = 0x06,
};

const char* to_string(MessageType t);

inline constexpr std::uint32_t kDefaultMaxFrameBytes = 16u * 1024u * 1024u;
inline constexpr std::uint16_t kDefaultPort = 7413;
inline constexpr std::size_t kFrameHeaderBytes = 5;

/// Framing violations: oversize payload, unknown type byte, truncated stream,
/// out-of-order message. Never causes a session state transition.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Frame {
  MessageType type{};
  Bytes payload;

  friend bool operator==(const Frame&, const Frame&) = default;
};

Bytes encode_frame(MessageType type, ByteView payload);
inline Bytes encode_frame(const Frame& f) { return encode_frame(f.type, f.payload); }

/// Incremental frame splitter for a byte stream.
class FrameDecoder {
 public:
  explicit FrameDecoder(std::uint32_t max_payload = kDefaultMaxFrameBytes) : max_payload_(max_payload) {}

  void push(ByteView bytes);
  /// Next complete frame, or nullopt if more bytes are needed. Throws
  /// ProtocolError as soon as a header is invalid; the decoder is unusable after.
  std::optional<Frame> next();
  /// Throws ProtocolError("truncated frame") if a partial frame is buffered.
  void finish() const;
  bool idle() const { return buffer_.empty(); }

 private:
  std::uint32_t max_payload_;
  std::deque<std::uint8_t> buffer_;
};

/// Status reason codes. One byte on the wire; text lives in the audit log.
enum class ReasonCode : std::uint8_t {
  None = 0,
  Malformed = 1,
  UnknownChallenge = 2,
  Replay = 3,
  Expired = 4,
  AuthFail = 5,
  MalformedReport = 6,
  DigestMismatch = 7,
  NodeMismatch = 8,
  ProtocolViolation = 9,
  ServerError = 10,
};

const char* to_string(ReasonCode r);
std::optional<ReasonCode> reason_from_byte(std::uint8_t b);

struct AutocheckRequest {
  std::string node_id;
  std::string client_version;

  friend bool operator==(const AutocheckRequest&, const AutocheckRequest&) = default;
};

struct StatusMessage {
  ProgramId program_id{};
  bool pass = false;
  ReasonCode reason = ReasonCode::None;

  friend bool operator==(const StatusMessage&, const StatusMessage&) = default;
};

struct ResourceRequest {
  std::string node_id;
  std::string resource_id;

  friend bool operator==(const ResourceRequest&, const ResourceRequest&) = default;
};

struct ResourceResponse {
  bool granted = false;
  Bytes payload;

  friend bool operator==(const ResourceResponse&, const ResourceResponse&) = default;
};

Bytes encode_payload(const AutocheckRequest& m);
Bytes encode_payload(const StatusMessage& m);
Bytes encode_payload(const ResourceRequest& m);
Bytes encode_payload(const ResourceResponse& m);

// Payload decoders throw DecodeError.
AutocheckRequest decode_autocheck_request(ByteView payload);
StatusMessage decode_status(ByteView payload);
ResourceRequest decode_resource_request(ByteView payload);
ResourceResponse decode_resource_response(ByteView payload);

}  // namespace jitcheck
