#include "jitcheck/report_crypto.hpp"

#include <limits>

namespace jitcheck {

namespace {

constexpr std::string_view kKeyLabel = "SP2P-KEY";
constexpr std::string_view kMacLabel = "SP2P-MAC";

Block16 compute_mac(const MeasurementProgram& p, const Key& key, ByteView ciphertext) {
  return DigestContext(p.params).update(key).update(p.program_id).update(ciphertext).update(kMacLabel).finish();
}

void apply_keystream(const MeasurementProgram& p, const Key& key, Bytes& data) {
  for (std::size_t offset = 0, block = 0; offset < data.size(); offset += 16, ++block) {
    const auto ks = keystream_block(p, key, block);
    const std::size_t n = std::min<std::size_t>(16, data.size() - offset);
    for (std::size_t i = 0; i < n; ++i) data[offset + i] ^= ks[i];
  }
}

bool equal_tags(const Block16& a, const Block16& b) {
  std::uint8_t diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff |= static_cast<std::uint8_t>(a[i] ^ b[i]);
  return diff == 0;
}

}  // namespace

Key derive_key(const MeasurementProgram& p) {
  return DigestContext(p.params).update(p.seed).update(p.node_id).update(kKeyLabel).finish();
}

Block16 keystream_block(const MeasurementProgram& p, const Key& key, std::uint64_t index) {
  ByteWriter counter;
  counter.u64(index);
  return DigestContext(p.params).update(key).update(p.program_id).update(counter.bytes()).finish();
}

Bytes encode_report(const MeasurementReport& r) {
  if (r.artifact_digests.size() > std::numeric_limits<std::uint16_t>::max() ||
      r.env_values.size() > std::numeric_limits<std::uint16_t>::max())
    throw std::invalid_argument("report has too many entries");
  ByteWriter w;
  w.raw(r.program_id);
  w.str16(r.node_id);
  w.u16(static_cast<std::uint16_t>(r.artifact_digests.size()));
  for (const auto& d : r.artifact_digests) {
    w.str16(d.artifact.id);
    w.str16(d.artifact.version);
    w.raw(d.digest);
  }
  w.u16(static_cast<std::uint16_t>(r.env_values.size()));
  for (const auto& [name, value] : r.env_values) {
    w.str16(name);
    w.str16(value);
  }
  return std::move(w).take();
}

MeasurementReport decode_report(ByteView bytes) {
  ByteReader rd(bytes);
  MeasurementReport r;
  r.program_id = rd.block16("report program_id");
  r.node_id = rd.str16("report node_id");
  const auto n = rd.u16("digest count");
  r.artifact_digests.reserve(n);
  for (std::uint16_t i = 0; i < n; ++i) {
    ArtifactDigest d;
    d.artifact.id = rd.str16("digest artifact id");
    d.artifact.version = rd.str16("digest artifact version");
    d.digest = rd.block16("digest");
    r.artifact_digests.push_back(std::move(d));
  }
  const auto m = rd.u16("env count");
  r.env_values.reserve(m);
  for (std::uint16_t i = 0; i < m; ++i) {
    auto name = rd.str16("env name");
    auto value = rd.str16("env value");
    r.env_values.emplace_back(std::move(name), std::move(value));
  }
  rd.expect_end("report");
  return r;
}

EncryptedReport encrypt_report(const MeasurementProgram& p, const MeasurementReport& r) {
  if (r.program_id != p.program_id) throw CryptoError(CryptoError::Kind::Usage, "report was produced for another program");
  const Key key = derive_key(p);
  EncryptedReport e;
  e.program_id = p.program_id;
  e.ciphertext = encode_report(r);
  apply_keystream(p, key, e.ciphertext);
  e.mac = compute_mac(p, key, e.ciphertext);
  return e;
}

MeasurementReport decrypt_report(const MeasurementProgram& p, const EncryptedReport& e) {
  if (e.program_id != p.program_id) throw CryptoError(CryptoError::Kind::Misbinding, "report bound to another program");
  const Key key = derive_key(p);
  if (!equal_tags(compute_mac(p, key, e.ciphertext), e.mac))
    throw CryptoError(CryptoError::Kind::Authentication, "report mac mismatch");
  Bytes plain = e.ciphertext;
  apply_keystream(p, key, plain);
  MeasurementReport r;
  try {
    r = decode_report(plain);
  } catch (const DecodeError& err) {
    throw CryptoError(CryptoError::Kind::Malformed, std::string("malformed report: ") + err.what());
  }
  if (r.program_id != p.program_id) throw CryptoError(CryptoError::Kind::Misbinding, "decrypted report names another program");
  return r;
}

Bytes encode_encrypted_report(const EncryptedReport& e) {
  if (e.ciphertext.size() > std::numeric_limits<std::uint32_t>::max()) throw std::length_error("ciphertext too long");
  ByteWriter w;
  w.raw(e.program_id);
  w.u32(static_cast<std::uint32_t>(e.ciphertext.size()));
  w.raw(e.ciphertext);
  w.raw(e.mac);
  return std::move(w).take();
}

EncryptedReport decode_encrypted_report(ByteView bytes) {
  ByteReader r(bytes);
  EncryptedReport e;
  e.program_id = r.block16("report program_id");
  const auto len = r.u32("ciphertext length");
  auto ct = r.raw(len, "ciphertext");
  e.ciphertext.assign(ct.begin(), ct.end());
  e.mac = r.block16("mac");
  r.expect_end("encrypted report");
  return e;
}

}  // namespace jitcheck
