#include "jitcheck/golden_store.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace jitcheck {

namespace fs = std::filesystem;
using json = nlohmann::json;

GoldenArtifact GoldenArtifact::from_bytes(ArtifactId id, Bytes bytes) {
  GoldenArtifact a;
  a.artifact_id = std::move(id);
  a.reference_digest = md5_reference(bytes);
  a.size = bytes.size();
  a.bytes = std::move(bytes);
  return a;
}

std::vector<ManifestEntry> parse_manifest(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw StoreError(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw StoreError("manifest must be a JSON array");
  std::vector<ManifestEntry> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& item = doc[i];
    auto field = [&](const char* key) -> std::string {
      if (!item.is_object() || !item.contains(key) || !item[key].is_string())
        throw StoreError("manifest entry " + std::to_string(i) + ": missing string field \"" + key + "\"");
      return item[key].get<std::string>();
    };
    ManifestEntry e{field("id"), field("version"), field("path")};
    if (e.id.empty()) throw StoreError("manifest entry " + std::to_string(i) + ": empty id");
    out.push_back(std::move(e));
  }
  return out;
}

std::string manifest_to_json(const std::vector<ManifestEntry>& entries) {
  json doc = json::array();
  for (const auto& e : entries) doc.push_back({{"id", e.id}, {"version", e.version}, {"path", e.path}});
  return doc.dump(2);
}

std::vector<ManifestEntry> scan_directory(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw StoreError("not a readable directory: " + dir.string());
  std::vector<ManifestEntry> out;
  fs::recursive_directory_iterator it(dir, ec), end;
  if (ec) throw StoreError("cannot read directory " + dir.string() + ": " + ec.message());
  for (; it != end; it.increment(ec)) {
    if (ec) throw StoreError("cannot read directory " + dir.string() + ": " + ec.message());
    if (!it->is_regular_file()) continue;
    const auto rel = fs::relative(it->path(), dir).generic_string();
    out.push_back({rel, "1", rel});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

namespace {

Bytes read_file(const fs::path& path, const std::string& entry_name) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw StoreError("manifest entry " + entry_name + ": missing file " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StoreError("manifest entry " + entry_name + ": cannot open " + path.string());
  Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw StoreError("manifest entry " + entry_name + ": read error on " + path.string());
  return data;
}

}  // namespace

std::vector<GoldenArtifact> load_manifest(const fs::path& artifact_dir, const fs::path& manifest_file) {
  std::ifstream in(manifest_file);
  if (!in) throw StoreError("cannot open manifest " + manifest_file.string());
  std::stringstream text;
  text << in.rdbuf();
  const auto entries = parse_manifest(text.str());

  std::set<ArtifactId> seen;
  std::vector<GoldenArtifact> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    ArtifactId id{e.id, e.version};
    const auto name = to_string(id);
    if (!seen.insert(id).second) throw StoreError("manifest entry " + name + ": duplicate id");
    out.push_back(GoldenArtifact::from_bytes(std::move(id), read_file(artifact_dir / e.path, name)));
  }
  return out;
}

GoldenStore::GoldenStore(std::vector<GoldenArtifact> artifacts) : artifacts_(std::move(artifacts)) {
  std::set<ArtifactId> seen;
  for (const auto& a : artifacts_)
    if (!seen.insert(a.artifact_id).second) throw StoreError("duplicate artifact " + to_string(a.artifact_id));
}

std::vector<ArtifactId> GoldenStore::targets() const {
  std::vector<ArtifactId> out;
  out.reserve(artifacts_.size());
  for (const auto& a : artifacts_) out.push_back(a.artifact_id);
  return out;
}

const GoldenArtifact* GoldenStore::find(const ArtifactId& id) const {
  for (const auto& a : artifacts_)
    if (a.artifact_id == id) return &a;
  return nullptr;
}

const GoldenArtifact* GoldenStore::find_resource(const std::string& id) const {
  for (const auto& a : artifacts_)
    if (a.artifact_id.id == id) return &a;
  return nullptr;
}

// --- issuance ---------------------------------------------------------------

const char* to_string(ConsumeOutcome o) {
  switch (o) {
    case ConsumeOutcome::Ok: return "OK";
    case ConsumeOutcome::UnknownChallenge: return "UNKNOWN_CHALLENGE";
    case ConsumeOutcome::Replay: return "REPLAY";
    case ConsumeOutcome::Expired: return "EXPIRED";
    case ConsumeOutcome::NodeMismatch: return "NODE_MISMATCH";
  }
  return "?";
}

void IssuanceTable::register_issued(const MeasurementProgram& p) {
  std::lock_guard lock(mu_);
  if (!entries_.try_emplace(p.program_id, Entry{p, IssueState::Issued}).second)
    throw StoreError("program id already issued: " + to_hex(p.program_id));
}

ConsumeResult IssuanceTable::consume(const ProgramId& id, const std::string& node_id, std::int64_t now) {
  std::lock_guard lock(mu_);
  auto it = entries_.find(id);
  if (it == entries_.end()) return {ConsumeOutcome::UnknownChallenge, std::nullopt};
  auto& entry = it->second;
  if (entry.state == IssueState::Consumed) return {ConsumeOutcome::Replay, std::nullopt};
  if (entry.state == IssueState::Expired) return {ConsumeOutcome::Expired, std::nullopt};
  if (entry.program.node_id != node_id) return {ConsumeOutcome::NodeMismatch, std::nullopt};
  if (now > entry.program.issued_at + static_cast<std::int64_t>(entry.program.ttl_seconds)) {
    entry.state = IssueState::Expired;
    return {ConsumeOutcome::Expired, std::nullopt};
  }
  entry.state = IssueState::Consumed;
  return {ConsumeOutcome::Ok, entry.program};
}

std::optional<IssueState> IssuanceTable::state(const ProgramId& id) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(id);
  if (it == entries_.end()) return std::nullopt;
  return it->second.state;
}

std::size_t IssuanceTable::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

// --- registry ---------------------------------------------------------------

const char* to_string(NodeStatus s) {
  switch (s) {
    case NodeStatus::Unknown: return "UNKNOWN";
    case NodeStatus::Pass: return "PASS";
    case NodeStatus::Fail: return "FAIL";
  }
  return "?";
}

NodeStatus node_status_from_string(std::string_view s) {
  if (s == "PASS") return NodeStatus::Pass;
  if (s == "FAIL") return NodeStatus::Fail;
  if (s == "UNKNOWN") return NodeStatus::Unknown;
  throw StoreError("unknown status \"" + std::string(s) + "\"");
}

std::string audit_line(const std::string& node_id, const HistoryEntry& e) {
  json j = {{"timestamp", e.timestamp},
            {"node_id", node_id},
            {"program_id", e.program_id ? to_hex(*e.program_id) : std::string()},
            {"status", to_string(e.status)},
            {"reason", e.reason}};
  return j.dump();
}

FileAuditSink::FileAuditSink(fs::path path) : path_(std::move(path)) {
  std::ofstream out(path_, std::ios::app);
  if (!out) throw StoreError("cannot open audit log " + path_.string());
}

void FileAuditSink::append(const std::string& line) {
  // Reopened per event so a rotated or deleted file surfaces as an error here.
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  out << line << '\n';
  out.flush();
  if (!out) throw StoreError("audit log write failed: " + path_.string());
}

void MemoryAuditSink::append(const std::string& line) {
  std::lock_guard lock(mu_);
  lines_.push_back(line);
}

std::vector<std::string> MemoryAuditSink::lines() const {
  std::lock_guard lock(mu_);
  return lines_;
}

std::vector<std::string> read_audit_log(const fs::path& path) {
  std::vector<std::string> lines;
  std::ifstream in(path);
  if (!in) return lines;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(line);
  return lines;
}

NodeRegistry::NodeRegistry(std::shared_ptr<AuditSink> sink, std::int64_t pass_freshness_seconds,
                           const std::vector<std::string>& prior_audit_lines)
    : sink_(std::move(sink)), freshness_(pass_freshness_seconds), records_(replay(prior_audit_lines)) {
  if (!sink_) throw std::invalid_argument("registry needs an audit sink");
  if (freshness_ <= 0) throw std::invalid_argument("pass freshness must be positive");
}

void NodeRegistry::apply(Snapshot& records, const std::string& node_id, const HistoryEntry& e) {
  auto& rec = records[node_id];
  rec.node_id = node_id;
  rec.status = e.status;
  rec.last_program_id = e.program_id;
  rec.last_check_at = e.timestamp;
  rec.history.push_back(e);
}

void NodeRegistry::record_status(const std::string& node_id, std::optional<ProgramId> program_id, NodeStatus status,
                                 std::string reason, std::int64_t now) {
  std::lock_guard lock(mu_);
  HistoryEntry e{now, program_id, status, std::move(reason)};
  if (auto it = records_.find(node_id); it != records_.end() && !it->second.history.empty())
    e.timestamp = std::max(e.timestamp, it->second.history.back().timestamp);
  sink_->append(audit_line(node_id, e));
  apply(records_, node_id, e);
}

NodeRecord NodeRegistry::get_status(const std::string& node_id) const {
  std::lock_guard lock(mu_);
  if (auto it = records_.find(node_id); it != records_.end()) return it->second;
  NodeRecord unknown;
  unknown.node_id = node_id;
  return unknown;
}

NodeStatus NodeRegistry::gating_status(const std::string& node_id, std::int64_t now) const {
  const auto rec = get_status(node_id);
  if (rec.status == NodeStatus::Pass && (!rec.last_check_at || now - *rec.last_check_at > freshness_))
    return NodeStatus::Unknown;
  return rec.status;
}

NodeRegistry::Snapshot NodeRegistry::snapshot() const {
  std::lock_guard lock(mu_);
  return records_;
}

NodeRegistry::Snapshot NodeRegistry::replay(const std::vector<std::string>& audit_lines) {
  Snapshot records;
  for (std::size_t i = 0; i < audit_lines.size(); ++i) {
    try {
      const auto j = json::parse(audit_lines[i]);
      HistoryEntry e;
      e.timestamp = j.at("timestamp").get<std::int64_t>();
      const auto pid = j.at("program_id").get<std::string>();
      if (!pid.empty()) {
        const auto raw = from_hex(pid);
        if (raw.size() != 16) throw StoreError("program_id is not 16 bytes");
        ProgramId id{};
        std::copy(raw.begin(), raw.end(), id.begin());
        e.program_id = id;
      }
      e.status = node_status_from_string(j.at("status").get<std::string>());
      e.reason = j.at("reason").get<std::string>();
      apply(records, j.at("node_id").get<std::string>(), e);
    } catch (const std::exception& ex) {
      throw StoreError("audit log line " + std::to_string(i + 1) + ": " + ex.what());
    }
  }
  return records;
}

}  // namespace jitcheck
