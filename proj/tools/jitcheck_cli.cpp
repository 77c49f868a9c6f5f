// jitcheck: integrity-check server, node client, manifest builder and
// adversary simulator.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "jitcheck/adversary.hpp"
#include "jitcheck/client.hpp"
#include "jitcheck/golden_store.hpp"
#include "jitcheck/server.hpp"
#include "jitcheck/transport.hpp"

namespace fs = std::filesystem;
using namespace jitcheck;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFail = 1;
constexpr int kExitError = 2;

/// Bad flags or configuration.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ServerConfig {
  std::string listen = "0.0.0.0:" + std::to_string(kDefaultPort);
  std::string artifact_dir;
  std::string manifest;
  std::string audit_log;
  std::int64_t program_ttl_seconds = 60;
  std::int64_t pass_freshness_seconds = 3600;
  std::int64_t max_frame_bytes = kDefaultMaxFrameBytes;
};

ServerConfig read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("config " + path + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  static const std::set<std::string> known = {"listen",          "artifact_dir",          "manifest",       "audit_log",
                                              "program_ttl_seconds", "pass_freshness_seconds", "max_frame_bytes"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw UsageError("unknown config key \"" + key + "\"");
  ServerConfig c;
  try {
    if (j.contains("listen")) c.listen = j["listen"].get<std::string>();
    if (j.contains("artifact_dir")) c.artifact_dir = j["artifact_dir"].get<std::string>();
    if (j.contains("manifest")) c.manifest = j["manifest"].get<std::string>();
    if (j.contains("audit_log")) c.audit_log = j["audit_log"].get<std::string>();
    if (j.contains("program_ttl_seconds")) c.program_ttl_seconds = j["program_ttl_seconds"].get<std::int64_t>();
    if (j.contains("pass_freshness_seconds")) c.pass_freshness_seconds = j["pass_freshness_seconds"].get<std::int64_t>();
    if (j.contains("max_frame_bytes")) c.max_frame_bytes = j["max_frame_bytes"].get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("bad config value: ") + e.what());
  }
  return c;
}

void validate(const ServerConfig& c) {
  if (c.program_ttl_seconds <= 0 || c.program_ttl_seconds > std::numeric_limits<std::uint32_t>::max())
    throw UsageError("program_ttl_seconds must be positive");
  if (c.pass_freshness_seconds <= 0) throw UsageError("pass_freshness_seconds must be positive");
  if (c.max_frame_bytes <= 0 || c.max_frame_bytes > std::numeric_limits<std::uint32_t>::max())
    throw UsageError("max_frame_bytes out of range");
  if (c.artifact_dir.empty() || !fs::is_directory(c.artifact_dir)) throw UsageError("artifact_dir does not exist");
  if (c.manifest.empty() || !fs::is_regular_file(c.manifest)) throw UsageError("manifest does not exist");
  if (c.audit_log.empty()) throw UsageError("audit_log is required");
  const auto parent = fs::absolute(c.audit_log).parent_path();
  if (!fs::is_directory(parent)) throw UsageError("audit_log directory does not exist");
}

/// Writes each audit line to the log file and echoes it to stdout.
class EchoingSink final : public AuditSink {
 public:
  explicit EchoingSink(fs::path path) : file_(std::move(path)) {}
  void append(const std::string& line) override {
    file_.append(line);
    std::cout << line << std::endl;
  }

 private:
  FileAuditSink file_;
};

std::atomic<TcpServer*> g_server{nullptr};

extern "C" void on_signal(int) {
  if (auto* s = g_server.load()) s->stop();
}

int cmd_manifest(const std::string& dir, const std::string& output) {
  const auto entries = scan_directory(dir);
  const auto text = manifest_to_json(entries) + "\n";
  if (output.empty() || output == "-") {
    std::cout << text;
  } else {
    std::ofstream out(output);
    out << text;
    if (!out) throw StoreError("cannot write " + output);
  }
  return kExitOk;
}

int cmd_serve(ServerConfig config) {
  validate(config);
  auto store = std::make_shared<const GoldenStore>(load_manifest(config.artifact_dir, config.manifest));
  if (store->empty()) throw UsageError("manifest lists no artifacts; nothing to check against");
  auto registry = std::make_shared<NodeRegistry>(std::make_shared<EchoingSink>(config.audit_log),
                                                 config.pass_freshness_seconds, read_audit_log(config.audit_log));
  ServerSettings settings;
  settings.program_ttl_seconds = static_cast<std::uint32_t>(config.program_ttl_seconds);
  settings.max_frame_bytes = static_cast<std::uint32_t>(config.max_frame_bytes);
  ServerCore core(store, registry, std::make_unique<SystemRandom>(), system_now, settings);

  TcpServer server(core, parse_endpoint(config.listen));
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "jitcheck: serving " << store->artifacts().size() << " artifact(s) on port " << server.port()
            << std::endl;
  server.run();
  g_server = nullptr;
  std::cerr << "jitcheck: stopped" << std::endl;
  return kExitOk;
}

struct NodeArgs {
  std::string server;
  std::string node_id;
  std::string dir;
  double timeout_seconds = 30;
};

ClientOptions options_from(const NodeArgs& a) {
  ClientOptions o;
  o.timeout = std::chrono::milliseconds(static_cast<std::int64_t>(a.timeout_seconds * 1000));
  return o;
}

/// Exit code for one check; prints the outcome.
int run_one_check(Transport& t, const NodeArgs& a) {
  const auto outcome = client_run_check(t, a.node_id, directory_resolver(a.dir), host_env_resolver(), options_from(a));
  if (outcome.running()) {
    std::cout << "PASS" << std::endl;
    return kExitOk;
  }
  if (outcome.status)
    std::cout << "FAIL " << to_string(outcome.status->reason) << std::endl;
  else
    std::cout << "STOPPED " << to_string(outcome.stop_reason) << std::endl;
  if (!outcome.detail.empty()) std::cerr << "jitcheck: " << outcome.detail << std::endl;
  return kExitFail;
}

std::unique_ptr<TcpTransport> dial(const std::string& server) {
  try {
    return std::make_unique<TcpTransport>(parse_endpoint(server));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

int cmd_check(const NodeArgs& a) {
  auto t = dial(a.server);
  return run_one_check(*t, a);
}

int cmd_node(const NodeArgs& a, const std::vector<std::string>& resources, const std::string& out_dir,
             double interval_seconds) {
  for (;;) {
    auto t = dial(a.server);
    const int rc = run_one_check(*t, a);
    if (rc != kExitOk) return rc;
    for (const auto& id : resources) {
      const auto resp = client_request_resource(*t, a.node_id, id, options_from(a));
      std::cout << (resp.granted ? "GRANTED " : "DENIED ") << id << " " << resp.payload.size() << std::endl;
      if (!resp.granted) return kExitFail;
      if (!out_dir.empty()) {
        const auto path = fs::path(out_dir) / id;
        fs::create_directories(path.parent_path());
        std::ofstream(path, std::ios::binary).write(reinterpret_cast<const char*>(resp.payload.data()),
                                                    static_cast<std::streamsize>(resp.payload.size()));
      }
    }
    if (interval_seconds <= 0) return kExitOk;
    std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<std::int64_t>(interval_seconds * 1000)));
  }
}

int cmd_simulate(const std::string& scenario, std::size_t trials, std::uint64_t seed, bool as_json,
                 const std::string& dir, const std::string& manifest) {
  std::map<AttackerKind, std::size_t> counts;
  try {
    if (scenario == "all") {
      for (auto k : kAllAttackerKinds) counts[k] = trials;
    } else {
      counts[parse_attacker_kind(scenario)] = trials;
    }
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  std::shared_ptr<const GoldenStore> store;
  if (!manifest.empty()) {
    store = std::make_shared<const GoldenStore>(load_manifest(dir.empty() ? "." : dir, manifest));
    if (store->empty()) throw UsageError("manifest lists no artifacts");
  } else {
    store = synthetic_store();
  }
  const auto metrics = run_campaign(store, counts, seed);
  std::cout << (as_json ? metrics.to_json() + "\n" : metrics.to_table());
  return metrics.all_expected() ? kExitOk : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"jitcheck: just-in-time integrity checking for peer-to-peer nodes"};
  app.require_subcommand(1);

  std::string dir, output;
  auto* manifest = app.add_subcommand("manifest", "Write a manifest for every file under a directory");
  manifest->add_option("dir", dir, "Artifact directory")->required();
  manifest->add_option("-o,--output", output, "Output file (default: stdout)");

  std::string config_path;
  ServerConfig overrides;
  std::int64_t ttl = 0, freshness = 0, max_frame = 0;
  auto* serve = app.add_subcommand("serve", "Run the integrity-check server");
  serve->add_option("--config", config_path, "JSON config file")->required();
  serve->add_option("--listen", overrides.listen, "host:port");
  serve->add_option("--artifact-dir", overrides.artifact_dir);
  serve->add_option("--manifest", overrides.manifest);
  serve->add_option("--audit-log", overrides.audit_log);
  serve->add_option("--ttl", ttl, "Program ttl seconds");
  serve->add_option("--freshness", freshness, "PASS validity seconds");
  serve->add_option("--max-frame", max_frame, "Maximum frame payload bytes");

  NodeArgs node_args;
  std::vector<std::string> resources;
  std::string out_dir;
  double interval = 0;
  auto add_node_flags = [&](CLI::App* cmd) {
    cmd->add_option("--server", node_args.server, "Server host:port")->required();
    cmd->add_option("--id", node_args.node_id, "Node id")->required();
    cmd->add_option("--dir", node_args.dir, "Local artifact directory")->required();
    cmd->add_option("--timeout", node_args.timeout_seconds, "Seconds to wait for each server reply")
        ->check(CLI::PositiveNumber);
  };
  auto* node = app.add_subcommand("node", "Run a node: check, then fetch gated resources");
  add_node_flags(node);
  node->add_option("--resource", resources, "Resource id to fetch after a PASS (repeatable)");
  node->add_option("--out", out_dir, "Directory to store fetched resources");
  node->add_option("--interval", interval, "Re-check every N seconds (0: once)");
  auto* check = app.add_subcommand("check", "One-shot check: exit 0 on PASS, 1 on FAIL/STOPPED, 2 on error");
  add_node_flags(check);

  std::string scenario = "all";
  std::size_t trials = 100;
  std::uint64_t seed = 1;
  bool as_json = false;
  std::string sim_dir, sim_manifest;
  auto* simulate = app.add_subcommand("simulate", "Run adversary scenarios against an in-process server");
  simulate->add_option("--scenario", scenario, "Attacker kind or \"all\"");
  simulate->add_option("--trials", trials, "Trials per scenario");
  simulate->add_option("--seed", seed, "Seed for every random choice");
  simulate->add_flag("--json", as_json, "Machine-readable output");
  simulate->add_option("--dir", sim_dir, "Artifact directory (with --manifest)");
  simulate->add_option("--manifest", sim_manifest, "Golden manifest (default: built-in synthetic store)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitError;
  }

  try {
    if (*manifest) return cmd_manifest(dir, output);
    if (*serve) {
      ServerConfig config = read_config(config_path);
      if (serve->count("--listen")) config.listen = overrides.listen;
      if (serve->count("--artifact-dir")) config.artifact_dir = overrides.artifact_dir;
      if (serve->count("--manifest")) config.manifest = overrides.manifest;
      if (serve->count("--audit-log")) config.audit_log = overrides.audit_log;
      if (serve->count("--ttl")) config.program_ttl_seconds = ttl;
      if (serve->count("--freshness")) config.pass_freshness_seconds = freshness;
      if (serve->count("--max-frame")) config.max_frame_bytes = max_frame;
      return cmd_serve(config);
    }
    if (*node) return cmd_node(node_args, resources, out_dir, interval);
    if (*check) return cmd_check(node_args);
    if (*simulate) return cmd_simulate(scenario, trials, seed, as_json, sim_dir, sim_manifest);
  } catch (const UsageError& e) {
    std::cerr << "jitcheck: " << e.what() << "\n" << app.help() << std::endl;
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "jitcheck: " << e.what() << std::endl;
    return kExitError;
  }
  return kExitError;
}
