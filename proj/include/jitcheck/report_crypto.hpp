#pragma once

#include <stdexcept>

#include "jitcheck/program.hpp"

namespace jitcheck {

/// Wire form of a measurement report. Model of per-challenge "encrypt
/// methods", not production cryptography: a parameterized-digest keystream in
/// counter mode with an encrypt-then-MAC tag from the same digest.
struct EncryptedReport {
  ProgramId program_id{};
  Bytes ciphertext;
  Block16 mac{};

  friend bool operator==(const EncryptedReport&, const EncryptedReport&) = default;
};

class CryptoError : public std::runtime_error {
 public:
  enum class Kind { Usage, Authentication, Malformed, Misbinding };

  CryptoError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

using Key = Block16;

/// parameterized_digest(params, seed || node_id || "SP2P-KEY").
Key derive_key(const MeasurementProgram& p);

/// Block i of the keystream: parameterized_digest(params, key || program_id || be64(i)).
Block16 keystream_block(const MeasurementProgram& p, const Key& key, std::uint64_t index);

/// Report plaintext: program_id, node_id (16-bit len), digest list
/// (16-bit count; per entry id, version, 16-byte digest), env list
/// (16-bit count; name, value).
Bytes encode_report(const MeasurementReport& r);
MeasurementReport decode_report(ByteView bytes);

/// Throws CryptoError(Usage) when the report belongs to another program.
EncryptedReport encrypt_report(const MeasurementProgram& p, const MeasurementReport& r);

/// Verifies the MAC before touching the plaintext. Throws CryptoError with
/// kind Authentication (bad tag), Malformed (tag fine, plaintext undecodable)
/// or Misbinding (program_id does not match p).
MeasurementReport decrypt_report(const MeasurementProgram& p, const EncryptedReport& e);

/// program_id, 32-bit big-endian ciphertext length, ciphertext, mac.
Bytes encode_encrypted_report(const EncryptedReport& e);
EncryptedReport decode_encrypted_report(ByteView bytes);

}  // namespace jitcheck
