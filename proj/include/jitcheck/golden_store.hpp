#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "jitcheck/program.hpp"

namespace jitcheck {

class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Golden artifacts
// ---------------------------------------------------------------------------

struct GoldenArtifact {
  ArtifactId artifact_id;
  Bytes bytes;
  std::size_t size = 0;
  /// Standard MD5 of bytes. Bookkeeping only; verification never uses it.
  Digest reference_digest{};

  static GoldenArtifact from_bytes(ArtifactId id, Bytes bytes);
};

struct ManifestEntry {
  std::string id;
  std::string version;
  std::string path;  // relative to the artifact directory

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// Parses a JSON array of {"id", "version", "path"} objects.
std::vector<ManifestEntry> parse_manifest(const std::string& json_text);
std::string manifest_to_json(const std::vector<ManifestEntry>& entries);

/// One entry per regular file under dir, id = generic relative path,
/// version "1", sorted by id. Throws StoreError if dir cannot be read.
std::vector<ManifestEntry> scan_directory(const std::filesystem::path& dir);

/// Loads every manifest entry from artifact_dir. Throws StoreError naming the
/// entry on a missing/unreadable file or a duplicate (id, version).
std::vector<GoldenArtifact> load_manifest(const std::filesystem::path& artifact_dir,
                                          const std::filesystem::path& manifest_file);

/// Immutable after construction; safe to share across sessions.
class GoldenStore {
 public:
  GoldenStore() = default;
  /// Throws StoreError on a duplicate (id, version).
  explicit GoldenStore(std::vector<GoldenArtifact> artifacts);

  const std::vector<GoldenArtifact>& artifacts() const { return artifacts_; }
  std::vector<ArtifactId> targets() const;
  bool empty() const { return artifacts_.empty(); }

  const GoldenArtifact* find(const ArtifactId& id) const;
  /// First artifact with this id, any version.
  const GoldenArtifact* find_resource(const std::string& id) const;

 private:
  std::vector<GoldenArtifact> artifacts_;
};

// ---------------------------------------------------------------------------
// Issued programs
// ---------------------------------------------------------------------------

enum class IssueState { Issued, Consumed, Expired };

enum class ConsumeOutcome { Ok, UnknownChallenge, Replay, Expired, NodeMismatch };

const char* to_string(ConsumeOutcome o);

struct ConsumeResult {
  ConsumeOutcome outcome = ConsumeOutcome::UnknownChallenge;
  /// Set when outcome is Ok.
  std::optional<MeasurementProgram> program;
};

/// Single-use challenge table. In memory only: a restart invalidates every
/// outstanding challenge.
class IssuanceTable {
 public:
  /// Throws StoreError if the program_id was issued before.
  void register_issued(const MeasurementProgram& p);

  /// Precedence: unknown, consumed (replay), expired, node mismatch, TTL
  /// check. Only Ok moves Issued -> Consumed; a late consume moves
  /// Issued -> Expired. A node mismatch leaves the challenge untouched.
  ConsumeResult consume(const ProgramId& id, const std::string& node_id, std::int64_t now);

  std::optional<IssueState> state(const ProgramId& id) const;
  std::size_t size() const;

 private:
  struct Entry {
    MeasurementProgram program;
    IssueState state = IssueState::Issued;
  };

  mutable std::mutex mu_;
  std::map<ProgramId, Entry> entries_;
};

// ---------------------------------------------------------------------------
// Node registry and audit log
// ---------------------------------------------------------------------------

enum class NodeStatus { Unknown, Pass, Fail };

const char* to_string(NodeStatus s);
NodeStatus node_status_from_string(std::string_view s);

struct HistoryEntry {
  std::int64_t timestamp = 0;
  std::optional<ProgramId> program_id;
  NodeStatus status = NodeStatus::Unknown;
  std::string reason;

  friend bool operator==(const HistoryEntry&, const HistoryEntry&) = default;
};

struct NodeRecord {
  std::string node_id;
  NodeStatus status = NodeStatus::Unknown;
  std::optional<ProgramId> last_program_id;
  std::optional<std::int64_t> last_check_at;
  std::vector<HistoryEntry> history;

  friend bool operator==(const NodeRecord&, const NodeRecord&) = default;
};

/// One JSON object per line: timestamp, node_id, program_id (hex, empty when
/// absent), status, reason.
std::string audit_line(const std::string& node_id, const HistoryEntry& e);

class AuditSink {
 public:
  virtual ~AuditSink() = default;
  /// Must have durably accepted the line when it returns; throws StoreError otherwise.
  virtual void append(const std::string& line) = 0;
};

class FileAuditSink final : public AuditSink {
 public:
  explicit FileAuditSink(std::filesystem::path path);
  void append(const std::string& line) override;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

class MemoryAuditSink final : public AuditSink {
 public:
  void append(const std::string& line) override;
  std::vector<std::string> lines() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::string> lines_;
};

/// Lines of an audit log file; a missing file reads as empty.
std::vector<std::string> read_audit_log(const std::filesystem::path& path);

class NodeRegistry {
 public:
  using Snapshot = std::map<std::string, NodeRecord>;

  /// prior_audit_lines are folded in first (restart); new events go to sink.
  explicit NodeRegistry(std::shared_ptr<AuditSink> sink, std::int64_t pass_freshness_seconds = 3600,
                        const std::vector<std::string>& prior_audit_lines = {});

  /// Persists the audit line, then applies it. A sink failure propagates and
  /// leaves the registry unchanged. Timestamps earlier than the node's last
  /// entry are clamped forward so history stays non-decreasing.
  void record_status(const std::string& node_id, std::optional<ProgramId> program_id, NodeStatus status,
                     std::string reason, std::int64_t now);

  NodeRecord get_status(const std::string& node_id) const;

  /// Status used for gating: a PASS older than the freshness window reads as Unknown.
  NodeStatus gating_status(const std::string& node_id, std::int64_t now) const;

  Snapshot snapshot() const;
  std::int64_t pass_freshness_seconds() const { return freshness_; }

  /// Pure fold of audit lines into registry state. Throws StoreError on a bad line.
  static Snapshot replay(const std::vector<std::string>& audit_lines);

 private:
  static void apply(Snapshot& records, const std::string& node_id, const HistoryEntry& e);

  std::shared_ptr<AuditSink> sink_;
  std::int64_t freshness_;
  mutable std::mutex mu_;
  Snapshot records_;
};

}  // namespace jitcheck
