#pragma once

#include "fairgen/egal_search.hpp"
#include "fairgen/llm_client.hpp"
#include "fairgen/nash.hpp"
#include "fairgen/synthetic.hpp"
#include "fairgen/token_tree.hpp"
#include "fairgen/types.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fairgen {

enum class RunMode { synthetic, remote };

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RemoteScenario {
  EndpointConfig endpoint;
  std::string issue;
  std::vector<std::string> opinions;
};

struct RunConfig {
  int schema_version = 1;
  RunMode mode = RunMode::synthetic;
  std::string scenario = "synthetic";

  SyntheticEnvConfig env;    // synthetic mode
  RemoteScenario remote;     // remote mode

  TreeConfig tree;
  SolverConfig solver;
  SearchConfig search;
  std::vector<std::string> methods = {"beam", "lookahead", "best-of-n", "oracle"};
  bool brush_up_statements = false;             // remote mode only
  PplPrompt ppl_prompt = PplPrompt::agent;      // template used for remote perplexity

  std::vector<double> rho_grid;
  std::vector<std::uint64_t> seeds = {0};
  std::filesystem::path output_dir = "out";

  void validate() const;
};

// Strict parser: unknown fields are errors, not warnings.
RunConfig parse_run_config(const nlohmann::json& body);
RunConfig load_run_config(const std::filesystem::path& path);

// Canonical serialization (sorted keys) and its hash; stable across
// re-serialization of the same logical config.
nlohmann::json run_config_to_json(const RunConfig& cfg);
std::string config_hash(const RunConfig& cfg);

struct RunSummary {
  std::string command;
  std::string config_hash;
  std::string artifact_version = kArtifactVersion;
  std::string started_at;  // ISO-8601 UTC
  double total_seconds = 0.0;
  bool all_converged = true;
  std::vector<std::string> output_files;
  nlohmann::json details;  // per-command extras: solver stats, seed scheme

  nlohmann::json to_json() const;
};

// Writes run_summary.json into the output directory and returns its path.
std::filesystem::path write_run_summary(const std::filesystem::path& output_dir,
                                        const RunSummary& summary);

// Per-component seeds derived from one master seed (scheme recorded in the
// run summary).
nlohmann::json seed_scheme_json(std::uint64_t master);

}  // namespace fairgen
