#include "fairgen/run_config.hpp"

#include "fairgen/hashing.hpp"
#include "fairgen/io.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <set>

namespace fairgen {

using nlohmann::json;

namespace {

void check_keys(const json& object, const std::string& where,
                const std::set<std::string>& allowed) {
  if (!object.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (auto it = object.begin(); it != object.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError(where + ": unknown field '" + it.key() + "'");
}

template <typename T>
T get_field(const json& object, const std::string& where, const std::string& key, T fallback) {
  if (!object.contains(key)) return fallback;
  try {
    return object.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

SyntheticEnvConfig parse_env(const json& body) {
  check_keys(body, "config.env",
             {"n_agents", "branching", "depth", "embed_dim", "polarization", "seed"});
  SyntheticEnvConfig env;
  env.n_agents = get_field(body, "config.env", "n_agents", env.n_agents);
  env.branching = get_field(body, "config.env", "branching", env.branching);
  env.depth = get_field(body, "config.env", "depth", env.depth);
  env.embed_dim = get_field(body, "config.env", "embed_dim", env.embed_dim);
  env.polarization = get_field(body, "config.env", "polarization", env.polarization);
  env.seed = get_field(body, "config.env", "seed", env.seed);
  return env;
}

EndpointConfig parse_endpoint(const json& body) {
  check_keys(body, "config.endpoint",
             {"base_url", "model", "api_key_env", "timeout_s", "max_concurrency", "retries",
              "backoff_s", "top_logprobs", "floor_prob", "eos_text"});
  EndpointConfig endpoint;
  endpoint.base_url = get_field(body, "config.endpoint", "base_url", endpoint.base_url);
  endpoint.model = get_field(body, "config.endpoint", "model", endpoint.model);
  endpoint.api_key_env = get_field(body, "config.endpoint", "api_key_env", endpoint.api_key_env);
  endpoint.timeout_s = get_field(body, "config.endpoint", "timeout_s", endpoint.timeout_s);
  endpoint.max_concurrency =
      get_field(body, "config.endpoint", "max_concurrency", endpoint.max_concurrency);
  endpoint.retries = get_field(body, "config.endpoint", "retries", endpoint.retries);
  endpoint.backoff_s = get_field(body, "config.endpoint", "backoff_s", endpoint.backoff_s);
  endpoint.top_logprobs =
      get_field(body, "config.endpoint", "top_logprobs", endpoint.top_logprobs);
  endpoint.floor_prob = get_field(body, "config.endpoint", "floor_prob", endpoint.floor_prob);
  endpoint.eos_text = get_field(body, "config.endpoint", "eos_text", endpoint.eos_text);
  return endpoint;
}

TreeConfig parse_tree(const json& body) {
  check_keys(body, "config.tree", {"branching", "max_depth", "chunk_size", "terminal_action"});
  TreeConfig tree;
  tree.branching = get_field(body, "config.tree", "branching", tree.branching);
  tree.max_depth = get_field(body, "config.tree", "max_depth", tree.max_depth);
  tree.chunk_size = get_field(body, "config.tree", "chunk_size", tree.chunk_size);
  if (body.contains("terminal_action") && !body.at("terminal_action").is_null())
    tree.terminal_action = get_field(body, "config.tree", "terminal_action", Token{0});
  return tree;
}

SolverConfig parse_solver(const json& body) {
  check_keys(body, "config.solver", {"epsilon", "max_iters", "min_positive"});
  SolverConfig solver;
  solver.epsilon = get_field(body, "config.solver", "epsilon", solver.epsilon);
  solver.max_iters = get_field(body, "config.solver", "max_iters", solver.max_iters);
  solver.min_positive = get_field(body, "config.solver", "min_positive", solver.min_positive);
  return solver;
}

}  // namespace

void RunConfig::validate() const {
  if (schema_version != 1)
    throw ConfigError("config.schema_version: unsupported version " +
                      std::to_string(schema_version));
  if (seeds.empty()) throw ConfigError("config.seeds: must be nonempty");
  if (scenario.empty()) throw ConfigError("config.scenario: must be nonempty");
  tree.validate();
  solver.validate();
  search.validate();
  if (mode == RunMode::synthetic) {
    env.validate();
    if (env.branching != tree.branching || env.depth != tree.max_depth)
      throw ConfigError("config.tree: branching/max_depth must match config.env");
  } else {
    remote.endpoint.validate();
    if (remote.issue.empty()) throw ConfigError("config.issue: required in remote mode");
    if (remote.opinions.empty()) throw ConfigError("config.opinions: required in remote mode");
    if (tree.chunk_size != 1)
      throw ConfigError("config.tree.chunk_size: remote mode is token level (chunk_size 1)");
  }
  const std::set<std::string> known = {"beam", "lookahead", "best-of-n", "oracle"};
  if (methods.empty()) throw ConfigError("config.search.methods: must be nonempty");
  for (const std::string& method : methods)
    if (!known.count(method))
      throw ConfigError("config.search.methods: unknown method '" + method + "'");
}

RunConfig parse_run_config(const json& body) {
  check_keys(body, "config",
             {"schema_version", "mode", "scenario", "env", "endpoint", "issue", "opinions",
              "tree", "solver", "search", "rho_grid", "seeds", "output_dir"});
  RunConfig cfg;
  cfg.schema_version = get_field(body, "config", "schema_version", 0);

  const std::string mode = get_field<std::string>(body, "config", "mode", "synthetic");
  if (mode == "synthetic")
    cfg.mode = RunMode::synthetic;
  else if (mode == "remote")
    cfg.mode = RunMode::remote;
  else
    throw ConfigError("config.mode: expected 'synthetic' or 'remote'");

  cfg.scenario = get_field<std::string>(body, "config", "scenario", cfg.scenario);

  const bool has_synthetic = body.contains("env");
  const bool has_remote = body.contains("endpoint") || body.contains("issue") ||
                          body.contains("opinions");
  if (cfg.mode == RunMode::synthetic && has_remote)
    throw ConfigError("config: synthetic mode must not set endpoint/issue/opinions");
  if (cfg.mode == RunMode::remote && has_synthetic)
    throw ConfigError("config: remote mode must not set env");

  if (body.contains("env")) cfg.env = parse_env(body.at("env"));
  if (body.contains("endpoint")) cfg.remote.endpoint = parse_endpoint(body.at("endpoint"));
  cfg.remote.issue = get_field<std::string>(body, "config", "issue", "");
  cfg.remote.opinions =
      get_field<std::vector<std::string>>(body, "config", "opinions", {});

  if (body.contains("tree")) cfg.tree = parse_tree(body.at("tree"));
  if (body.contains("solver")) cfg.solver = parse_solver(body.at("solver"));

  if (body.contains("search")) {
    const json& search = body.at("search");
    check_keys(search, "config.search",
               {"lookahead_depth", "beam_width", "n_samples", "beta", "oracle_cap", "methods",
                "brush_up", "ppl_prompt"});
    cfg.search.lookahead_depth =
        get_field(search, "config.search", "lookahead_depth", cfg.search.lookahead_depth);
    cfg.search.beam_width = get_field(search, "config.search", "beam_width",
                                      cfg.search.beam_width);
    cfg.search.n_samples = get_field(search, "config.search", "n_samples",
                                     cfg.search.n_samples);
    cfg.search.beta = get_field(search, "config.search", "beta", cfg.search.beta);
    cfg.search.oracle_cap =
        get_field<Index>(search, "config.search", "oracle_cap", cfg.search.oracle_cap);
    cfg.methods = get_field(search, "config.search", "methods", cfg.methods);
    cfg.brush_up_statements = get_field(search, "config.search", "brush_up",
                                        cfg.brush_up_statements);
    const std::string ppl =
        get_field<std::string>(search, "config.search", "ppl_prompt", "agent");
    if (ppl == "agent")
      cfg.ppl_prompt = PplPrompt::agent;
    else if (ppl == "paraphrase")
      cfg.ppl_prompt = PplPrompt::paraphrase;
    else
      throw ConfigError("config.search.ppl_prompt: expected 'agent' or 'paraphrase'");
  }
  cfg.search.branching = cfg.tree.branching;
  cfg.search.max_len = cfg.tree.max_depth;

  cfg.rho_grid = get_field(body, "config", "rho_grid", cfg.rho_grid);
  cfg.seeds = get_field(body, "config", "seeds", cfg.seeds);
  cfg.output_dir = get_field<std::string>(body, "config", "output_dir",
                                          cfg.output_dir.string());
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json body;
  try {
    body = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_run_config(body);
}

json run_config_to_json(const RunConfig& cfg) {
  json body;
  body["schema_version"] = cfg.schema_version;
  body["mode"] = cfg.mode == RunMode::synthetic ? "synthetic" : "remote";
  body["scenario"] = cfg.scenario;
  if (cfg.mode == RunMode::synthetic) {
    body["env"] = {{"n_agents", cfg.env.n_agents},       {"branching", cfg.env.branching},
                   {"depth", cfg.env.depth},             {"embed_dim", cfg.env.embed_dim},
                   {"polarization", cfg.env.polarization}, {"seed", cfg.env.seed}};
  } else {
    body["endpoint"] = {{"base_url", cfg.remote.endpoint.base_url},
                        {"model", cfg.remote.endpoint.model},
                        {"api_key_env", cfg.remote.endpoint.api_key_env},
                        {"timeout_s", cfg.remote.endpoint.timeout_s},
                        {"max_concurrency", cfg.remote.endpoint.max_concurrency},
                        {"retries", cfg.remote.endpoint.retries},
                        {"backoff_s", cfg.remote.endpoint.backoff_s},
                        {"top_logprobs", cfg.remote.endpoint.top_logprobs},
                        {"floor_prob", cfg.remote.endpoint.floor_prob},
                        {"eos_text", cfg.remote.endpoint.eos_text}};
    body["issue"] = cfg.remote.issue;
    body["opinions"] = cfg.remote.opinions;
  }
  json tree = {{"branching", cfg.tree.branching},
               {"max_depth", cfg.tree.max_depth},
               {"chunk_size", cfg.tree.chunk_size}};
  if (cfg.tree.terminal_action) tree["terminal_action"] = *cfg.tree.terminal_action;
  body["tree"] = tree;
  body["solver"] = {{"epsilon", cfg.solver.epsilon},
                    {"max_iters", cfg.solver.max_iters},
                    {"min_positive", cfg.solver.min_positive}};
  body["search"] = {{"lookahead_depth", cfg.search.lookahead_depth},
                    {"beam_width", cfg.search.beam_width},
                    {"n_samples", cfg.search.n_samples},
                    {"beta", cfg.search.beta},
                    {"oracle_cap", cfg.search.oracle_cap},
                    {"methods", cfg.methods},
                    {"brush_up", cfg.brush_up_statements},
                    {"ppl_prompt", cfg.ppl_prompt == PplPrompt::agent ? "agent" : "paraphrase"}};
  body["rho_grid"] = cfg.rho_grid;
  body["seeds"] = cfg.seeds;
  body["output_dir"] = cfg.output_dir.string();
  return body;
}

std::string config_hash(const RunConfig& cfg) {
  const std::uint64_t h = fnv1a64(run_config_to_json(cfg).dump());
  char buffer[17];
  std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(h));
  return buffer;
}

json RunSummary::to_json() const {
  json body;
  body["command"] = command;
  body["config_hash"] = config_hash;
  body["artifact_version"] = artifact_version;
  body["started_at"] = started_at;
  body["total_seconds"] = total_seconds;
  body["all_converged"] = all_converged;
  body["output_files"] = output_files;
  body["details"] = details;
  return body;
}

std::filesystem::path write_run_summary(const std::filesystem::path& output_dir,
                                        const RunSummary& summary) {
  const std::filesystem::path path = output_dir / "run_summary.json";
  write_text_file(path, summary.to_json().dump(2) + "\n");
  return path;
}

json seed_scheme_json(std::uint64_t master) {
  return json{{"scheme", "splitmix64(master xor fnv1a64(component))"},
              {"master", master},
              {"components",
               {{"env", derive_seed(master, "env")},
                {"search", derive_seed(master, "search")},
                {"rollout", derive_seed(master, "rollout")}}}};
}

}  // namespace fairgen
