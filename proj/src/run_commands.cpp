#include "fairgen/run_commands.hpp"

#include "fairgen/core_audit.hpp"
#include "fairgen/hashing.hpp"
#include "fairgen/io.hpp"
#include "fairgen/metrics.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <sstream>

namespace fairgen {

using nlohmann::json;

namespace {

std::string now_iso8601() {
  const std::time_t now = std::time(nullptr);
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buffer;
}

struct Stopwatch {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

RunSummary begin_summary(const RunConfig& cfg, std::string command) {
  RunSummary summary;
  summary.command = std::move(command);
  summary.config_hash = fairgen::config_hash(cfg);
  summary.started_at = now_iso8601();
  summary.details["config"] = run_config_to_json(cfg);
  return summary;
}

void emit_file(RunSummary& summary, const std::filesystem::path& path,
               const std::string& body) {
  write_text_file(path, body);
  summary.output_files.push_back(path.string());
}

std::shared_ptr<const ActionProposer> synthetic_proposer(const RunConfig& cfg) {
  auto base =
      std::make_shared<FixedAlphabetProposer>(cfg.tree.branching, cfg.tree.max_depth);
  if (cfg.tree.chunk_size == 1) return base;
  return std::make_shared<ChunkedProposer>(base, cfg.tree.chunk_size);
}

SyntheticEnvConfig env_for_seed(const RunConfig& cfg, std::uint64_t master) {
  SyntheticEnvConfig env = cfg.env;
  env.seed = master;
  return env;
}

json search_result_json(const SearchResult& result) {
  json body;
  body["method"] = result.method;
  body["path"] = result.path;
  std::vector<double> per_agent(result.per_agent_log_utilities.data(),
                                result.per_agent_log_utilities.data() +
                                    result.per_agent_log_utilities.size());
  body["per_agent_log_utilities"] = per_agent;
  body["ew_log"] = result.ew_log;
  body["zero_prob_steps"] = result.zero_prob_steps;
  body["expanded_nodes"] = result.expanded_nodes;
  return body;
}

TokenSeq parse_token_list(const std::string& text) {
  TokenSeq out;
  std::istringstream in(text);
  std::string piece;
  while (std::getline(in, piece, ','))
    if (!piece.empty()) out.push_back(static_cast<Token>(std::stol(piece)));
  if (out.empty()) throw std::invalid_argument("empty token list '" + text + "'");
  return out;
}

std::vector<TokenSeq> read_statement_dump(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open statements file " + path.string());
  std::vector<TokenSeq> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string field;
    TokenSeq path_tokens;
    bool first = true;
    while (std::getline(fields, field, '\t')) {
      if (first) {
        first = false;  // leading leaf index
        continue;
      }
      path_tokens.push_back(static_cast<Token>(std::stol(field)));
    }
    if (!path_tokens.empty()) out.push_back(std::move(path_tokens));
  }
  if (out.empty()) throw std::runtime_error("statements file has no statements");
  return out;
}

std::vector<std::string> read_text_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open statements file " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(line);
  if (out.empty()) throw std::runtime_error("statements file has no statements");
  return out;
}

}  // namespace

RunSummary run_core_audit(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.mode != RunMode::synthetic)
    throw ConfigError("core-audit: synthetic mode required");
  if (cfg.rho_grid.empty()) throw ConfigError("core-audit: config.rho_grid must be nonempty");
  if (cfg.env.n_agents > kCoalitionEnumerationCap)
    throw ConfigError("core-audit: n_agents " + std::to_string(cfg.env.n_agents) +
                      " exceeds the coalition enumeration cap of " +
                      std::to_string(kCoalitionEnumerationCap) + "; lower the agent count");

  Stopwatch watch;
  RunSummary summary = begin_summary(cfg, "core-audit");
  json per_seed = json::object();
  for (std::uint64_t master : cfg.seeds) {
    const AuditReport report =
        polarization_sweep(env_for_seed(cfg, master), cfg.rho_grid, cfg.solver);
    bool converged = true;
    for (const AuditRow& row : report.rows) converged = converged && row.solver_converged;
    summary.all_converged = summary.all_converged && converged;

    std::ostringstream csv;
    write_audit_csv(csv, report);
    emit_file(summary, cfg.output_dir / ("audit_seed" + std::to_string(master) + ".csv"),
              csv.str());
    std::ostringstream svg;
    write_audit_svg(svg, report);
    emit_file(summary, cfg.output_dir / ("audit_seed" + std::to_string(master) + ".svg"),
              svg.str());
    per_seed[std::to_string(master)] = {{"rows", report.rows.size()},
                                        {"solver_converged", converged},
                                        {"seed_scheme", seed_scheme_json(master)}};
  }
  summary.details["seeds"] = per_seed;
  summary.total_seconds = watch.seconds();
  summary.output_files.push_back(write_run_summary(cfg.output_dir, summary).string());
  return summary;
}

RunSummary run_consensus(const RunConfig& cfg) {
  cfg.validate();
  Stopwatch watch;
  RunSummary summary = begin_summary(cfg, "consensus");

  std::ostringstream csv;
  csv << "method,scenario,seed,objective,value,expanded_nodes\n";
  json runs = json::array();

  if (cfg.mode == RunMode::synthetic) {
    const auto proposer = synthetic_proposer(cfg);
    for (std::uint64_t master : cfg.seeds) {
      const SyntheticEnv env(env_for_seed(cfg, master));
      const AgentList agents = env.agents();
      SearchConfig search = cfg.search;
      search.terminal_action = cfg.tree.terminal_action;
      for (const std::string& method : cfg.methods) {
        Stopwatch method_watch;
        SearchResult result;
        if (method == "oracle") {
          const TokenTree tree = build_tree(*proposer, cfg.tree);
          result = exhaustive_egal_argmax(tree, agents, search);
        } else if (method == "lookahead") {
          result = finite_lookahead(*proposer, agents, search);
        } else if (method == "beam") {
          result = beam_search(*proposer, agents, search);
        } else {
          const UniformPolicy reference(cfg.tree.branching, cfg.tree.max_depth);
          std::mt19937_64 rng(derive_seed(master, "search"));
          result = best_of_n(reference, agents, search, rng);
        }
        json body = search_result_json(result);
        body["seed"] = master;
        body["scenario"] = cfg.scenario;
        body["runtime_ms"] = method_watch.seconds() * 1e3;
        emit_file(summary,
                  cfg.output_dir / ("consensus_" + method + "_seed" +
                                    std::to_string(master) + ".json"),
                  body.dump(2) + "\n");
        runs.push_back({{"method", method}, {"seed", master}, {"ew_log", result.ew_log}});
        csv << method << ',' << cfg.scenario << ',' << master << ",ew_log,"
            << format_double(result.ew_log) << ',' << result.expanded_nodes << '\n';
      }
    }
  } else {
    RemoteSession session(cfg.remote.endpoint, cfg.remote.issue, cfg.remote.opinions,
                          cfg.tree.branching, cfg.tree.max_depth);
    session.probe();
    const auto proposer = session.reference_proposer();
    AgentList agents;
    for (int i = 0; i < session.opinion_count(); ++i) agents.push_back(session.agent_policy(i));

    SearchConfig search = cfg.search;
    search.terminal_action = session.eos_token();

    auto statement_eppl = [&](const std::string& statement) {
      if (statement.empty()) return kPosInf;  // bare terminal token, nothing to score
      double worst = 0.0;
      for (int i = 0; i < session.opinion_count(); ++i)
        worst = std::max(worst, session.statement_ppl(i, statement, cfg.ppl_prompt));
      return worst;
    };

    for (std::uint64_t master : cfg.seeds) {
      for (const std::string& method : cfg.methods) {
        Stopwatch method_watch;
        SearchResult result;
        if (method == "oracle") {
          TreeConfig tree_cfg = cfg.tree;
          tree_cfg.branching = cfg.tree.branching + 1;  // candidates include eos
          tree_cfg.terminal_action = session.eos_token();
          const TokenTree tree = build_tree(*proposer, tree_cfg);
          result = exhaustive_egal_argmax(tree, agents, search);
        } else if (method == "lookahead") {
          result = finite_lookahead(*proposer, agents, search);
        } else if (method == "beam") {
          result = beam_search(*proposer, agents, search);
        } else {
          std::mt19937_64 rng(derive_seed(master, "search"));
          const auto reference = session.reference_policy();
          result = best_of_n(*reference, agents, search, rng,
                             [&](const TokenSeq& path) {
                               return -statement_eppl(session.detokenize(path));
                             });
        }
        std::string statement = session.detokenize(result.path);
        bool brushed = false;
        if (cfg.brush_up_statements) {
          try {
            statement = brush_up(cfg.remote.endpoint, statement);
            brushed = true;
          } catch (const std::exception&) {
            // keep the original statement
          }
        }
        const double eppl = statement_eppl(statement);

        json body = search_result_json(result);
        body["seed"] = master;
        body["scenario"] = cfg.scenario;
        body["statement"] = statement;
        body["eppl"] = eppl;
        body["brushed_up"] = brushed;
        body["runtime_ms"] = method_watch.seconds() * 1e3;
        emit_file(summary,
                  cfg.output_dir / ("consensus_" + method + "_seed" +
                                    std::to_string(master) + ".json"),
                  body.dump(2) + "\n");
        runs.push_back({{"method", method}, {"seed", master}, {"eppl", eppl}});
        csv << method << ',' << cfg.scenario << ',' << master << ",eppl,"
            << format_double(eppl) << ',' << result.expanded_nodes << '\n';
      }
    }
    summary.details["floored_candidates"] = session.floored_candidates();
  }

  emit_file(summary, cfg.output_dir / "consensus_results.csv", csv.str());
  summary.details["runs"] = runs;
  summary.total_seconds = watch.seconds();
  summary.output_files.push_back(write_run_summary(cfg.output_dir, summary).string());
  return summary;
}

RunSummary run_nash(const RunConfig& cfg, const NashOptions& options) {
  cfg.validate();
  Stopwatch watch;
  RunSummary summary = begin_summary(cfg, "nash");

  const bool fixture = options.tree_file.has_value() || options.lottery_file.has_value();
  if (fixture) {
    if (!options.tree_file || !options.lottery_file)
      throw ConfigError("nash: fixture mode needs both --tree-file and --lottery-file");
    std::ifstream tree_in(*options.tree_file);
    if (!tree_in) throw ConfigError("nash: cannot open " + options.tree_file->string());
    const TokenTree tree = read_tree_dump(tree_in);
    std::ifstream lottery_in(*options.lottery_file);
    if (!lottery_in) throw ConfigError("nash: cannot open " + options.lottery_file->string());
    const Vec lottery = read_lottery_csv(lottery_in);

    const InducedPolicy policy = induce_policy(tree, lottery);
    const Vec recovered = policy_leaf_distribution(tree, policy);
    const double round_trip_error = (recovered - lottery).cwiseAbs().maxCoeff();

    std::ostringstream dump;
    write_policy_dump(dump, tree, policy);
    emit_file(summary, cfg.output_dir / "policy_fixture.txt", dump.str());
    std::ostringstream csv;
    write_lottery_csv(csv, lottery);
    emit_file(summary, cfg.output_dir / "lottery_fixture.csv", csv.str());
    summary.details["fixture"] = {{"leaves", tree.leaf_count()},
                                  {"round_trip_max_error", round_trip_error}};
    if (options.audit)
      throw ConfigError("nash: the blocking audit needs synthetic utilities, not a fixture");
  } else {
    if (cfg.mode != RunMode::synthetic) throw ConfigError("nash: synthetic mode required");
    const auto proposer = synthetic_proposer(cfg);
    json per_seed = json::object();
    for (std::uint64_t master : cfg.seeds) {
      const SyntheticEnv env(env_for_seed(cfg, master));
      const TokenTree tree = build_tree(*proposer, cfg.tree);
      const UtilityMatrix utilities = utility_matrix(env.agents(), tree);
      Stopwatch solve_watch;
      const NashSolution solution = maximize_nash_welfare(rescale_rows(utilities), cfg.solver);
      const double solve_seconds = solve_watch.seconds();
      summary.all_converged = summary.all_converged && solution.converged;

      const InducedPolicy policy = induce_policy(tree, solution.lottery);
      const Vec recovered = policy_leaf_distribution(tree, policy);
      const double round_trip_error = (recovered - solution.lottery).cwiseAbs().maxCoeff();

      std::ostringstream lottery_csv;
      write_lottery_csv(lottery_csv, solution.lottery);
      emit_file(summary,
                cfg.output_dir / ("lottery_seed" + std::to_string(master) + ".csv"),
                lottery_csv.str());
      std::ostringstream dump;
      write_policy_dump(dump, tree, policy);
      emit_file(summary, cfg.output_dir / ("policy_seed" + std::to_string(master) + ".txt"),
                dump.str());

      json seed_details = {{"iterations", solution.iterations},
                           {"final_gap", solution.gap},
                           {"converged", solution.converged},
                           {"log_nash_welfare", solution.log_nash_welfare},
                           {"solve_seconds", solve_seconds},
                           {"round_trip_max_error", round_trip_error},
                           {"seed_scheme", seed_scheme_json(master)}};
      if (options.audit) {
        const CoalitionImprovement audit = max_coalition_improvement(utilities,
                                                                     solution.lottery);
        seed_details["alpha_star"] = audit.alpha_star;
        seed_details["witness_coalition"] = audit.coalition_mask;
      }
      per_seed[std::to_string(master)] = seed_details;
    }
    summary.details["seeds"] = per_seed;
  }
  summary.total_seconds = watch.seconds();
  summary.output_files.push_back(write_run_summary(cfg.output_dir, summary).string());
  return summary;
}

RunSummary run_tree_dump(const RunConfig& cfg) {
  cfg.validate();
  Stopwatch watch;
  RunSummary summary = begin_summary(cfg, "tree-dump");

  if (cfg.mode == RunMode::synthetic) {
    const TokenTree tree = build_tree(*synthetic_proposer(cfg), cfg.tree);
    std::ostringstream dump;
    write_tree_dump(dump, tree);
    emit_file(summary, cfg.output_dir / "tree.txt", dump.str());
    summary.details["leaves"] = tree.leaf_count();
    summary.details["depth_in_actions"] = tree.depth_in_actions();
  } else {
    RemoteSession session(cfg.remote.endpoint, cfg.remote.issue, cfg.remote.opinions,
                          cfg.tree.branching, cfg.tree.max_depth);
    session.probe();
    TreeConfig tree_cfg = cfg.tree;
    tree_cfg.branching = cfg.tree.branching + 1;  // candidates include eos
    tree_cfg.terminal_action = session.eos_token();
    const TokenTree tree = build_tree(*session.reference_proposer(), tree_cfg);
    std::ostringstream dump;
    write_tree_dump(dump, tree);
    emit_file(summary, cfg.output_dir / "tree.txt", dump.str());
    std::ostringstream text;
    for (Index j = 0; j < tree.leaf_count(); ++j)
      text << j << '\t' << session.detokenize(tree.leaf_path(j)) << '\n';
    emit_file(summary, cfg.output_dir / "leaves_text.txt", text.str());
    summary.details["leaves"] = tree.leaf_count();
  }
  summary.total_seconds = watch.seconds();
  summary.output_files.push_back(write_run_summary(cfg.output_dir, summary).string());
  return summary;
}

RunSummary run_metrics(const RunConfig& cfg, const MetricsOptions& options) {
  cfg.validate();
  Stopwatch watch;
  RunSummary summary = begin_summary(cfg, "metrics");

  std::vector<MetricsRow> rows;
  if (cfg.mode == RunMode::synthetic) {
    if (!options.statements_file && !options.credit_x1)
      throw ConfigError("metrics: provide --statements and/or --credit-x1/--credit-x2");
    for (std::uint64_t master : cfg.seeds) {
      const SyntheticEnv env(env_for_seed(cfg, master));
      const AgentList agents = env.agents();
      if (options.statements_file) {
        const std::vector<TokenSeq> statements = read_statement_dump(*options.statements_file);
        for (std::size_t s = 0; s < statements.size(); ++s) {
          const ScoredStatement scored = egalitarian_perplexity(agents, statements[s]);
          for (Index i = 0; i < scored.per_agent_ppl.size(); ++i)
            rows.push_back({"statement_" + std::to_string(s), cfg.scenario, master,
                            "agent_" + std::to_string(i), scored.per_agent_ppl[i],
                            scored.eppl});
        }
      }
      if (options.credit_x1 || options.credit_x2) {
        if (!options.credit_x1 || !options.credit_x2)
          throw ConfigError("metrics: credit profiles need both --credit-x1 and --credit-x2");
        const TokenSeq x1 = parse_token_list(*options.credit_x1);
        const TokenSeq x2 = parse_token_list(*options.credit_x2);
        if (options.credit_user < 0 || options.credit_user >= cfg.env.n_agents ||
            options.credit_reference < 0 || options.credit_reference >= cfg.env.n_agents)
          throw ConfigError("metrics: credit agent index outside the environment");
        const auto user = env.agent(options.credit_user);
        const auto reference = env.agent(options.credit_reference);
        const Vec delta1 = credit_delta(*user, *reference, x1);
        const Vec delta2 = credit_delta(*user, *reference, x2);
        const CreditProfile profile = credit_zscores(delta1, delta2);
        std::vector<CreditRow> credit_rows;
        for (Index j = 0; j < profile.d.size(); ++j)
          credit_rows.push_back({j, x1[static_cast<std::size_t>(j)], profile.delta_x1[j],
                                 profile.delta_x2[j], profile.d[j], profile.z[j]});
        std::ostringstream credit_csv;
        write_credit_csv(credit_csv, credit_rows);
        emit_file(summary,
                  cfg.output_dir / ("credit_seed" + std::to_string(master) + ".csv"),
                  credit_csv.str());
        summary.details["credit_degenerate"] = profile.degenerate;
      }
    }
  } else {
    if (!options.statements_file)
      throw ConfigError("metrics: remote mode needs --statements (one statement per line)");
    RemoteSession session(cfg.remote.endpoint, cfg.remote.issue, cfg.remote.opinions,
                          cfg.tree.branching, cfg.tree.max_depth);
    session.probe();
    const std::vector<std::string> statements = read_text_lines(*options.statements_file);
    const std::uint64_t seed_label = cfg.seeds.front();
    for (std::size_t s = 0; s < statements.size(); ++s) {
      double eppl = 0.0;
      std::vector<double> ppls;
      for (int i = 0; i < session.opinion_count(); ++i) {
        const double ppl = session.statement_ppl(i, statements[s], cfg.ppl_prompt);
        ppls.push_back(ppl);
        eppl = std::max(eppl, ppl);
      }
      for (std::size_t i = 0; i < ppls.size(); ++i)
        rows.push_back({"statement_" + std::to_string(s), cfg.scenario, seed_label,
                        "agent_" + std::to_string(i), ppls[i], eppl});
    }
  }

  if (!rows.empty()) {
    std::ostringstream csv;
    write_metrics_csv(csv, rows);
    emit_file(summary, cfg.output_dir / "metrics.csv", csv.str());
  }
  summary.total_seconds = watch.seconds();
  summary.output_files.push_back(write_run_summary(cfg.output_dir, summary).string());
  return summary;
}

}  // namespace fairgen
