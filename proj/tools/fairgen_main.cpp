#include "fairgen/run_commands.hpp"
#include "fairgen/run_config.hpp"

#include "CLI11.hpp"

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

namespace {

struct GlobalFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<std::string> mode;
};

fairgen::RunConfig load_config(const GlobalFlags& flags) {
  fairgen::RunConfig cfg = fairgen::load_run_config(flags.config_path);
  if (flags.seed) cfg.seeds = {*flags.seed};
  if (flags.output_dir) cfg.output_dir = *flags.output_dir;
  if (flags.mode) {
    if (*flags.mode == "synthetic")
      cfg.mode = fairgen::RunMode::synthetic;
    else if (*flags.mode == "remote")
      cfg.mode = fairgen::RunMode::remote;
    else
      throw fairgen::ConfigError("--mode: expected 'synthetic' or 'remote'");
    cfg.validate();
  }
  return cfg;
}

void add_global_flags(CLI::App* cmd, GlobalFlags& flags) {
  cmd->add_option("--config", flags.config_path, "Run configuration JSON")->required();
  cmd->add_option("--seed", flags.seed, "Override the config's seed list with one seed");
  cmd->add_option("--output", flags.output_dir, "Override the config's output directory");
  cmd->add_option("--mode", flags.mode, "Override the config's mode (synthetic|remote)");
}

void report(const fairgen::RunSummary& summary) {
  std::cout << summary.command << ": wrote " << summary.output_files.size() << " files in "
            << summary.total_seconds << " s";
  if (!summary.all_converged) std::cout << " (solver did not fully converge)";
  std::cout << '\n';
  for (const std::string& file : summary.output_files) std::cout << "  " << file << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fair consensus statement generation over token-level decision trees"};
  app.require_subcommand(1);

  GlobalFlags audit_flags;
  CLI::App* audit = app.add_subcommand(
      "core-audit", "Coalition-blocking audit across a polarization sweep");
  add_global_flags(audit, audit_flags);

  GlobalFlags consensus_flags;
  CLI::App* consensus =
      app.add_subcommand("consensus", "Single-statement search (beam, lookahead, best-of-n)");
  add_global_flags(consensus, consensus_flags);
  std::optional<std::string> method_override;
  std::optional<int> depth_override, width_override, samples_override, branching_override,
      max_len_override;
  std::optional<double> beta_override;
  consensus->add_option("--method", method_override,
                        "Run only this method (beam|lookahead|best-of-n|oracle)");
  consensus->add_option("-d,--lookahead-depth", depth_override, "Lookahead depth");
  consensus->add_option("-w,--beam-width", width_override, "Beam width");
  consensus->add_option("-N,--n-samples", samples_override, "Best-of-N sample count");
  consensus->add_option("-B,--branching", branching_override, "Branching factor");
  consensus->add_option("--max-len", max_len_override, "Maximum statement length in tokens");
  consensus->add_option("--beta", beta_override, "Reward scale");

  GlobalFlags nash_flags;
  fairgen::NashOptions nash_options;
  std::string tree_file, lottery_file;
  CLI::App* nash = app.add_subcommand(
      "nash", "Nash-welfare lottery and its induced stochastic policy");
  add_global_flags(nash, nash_flags);
  nash->add_option("--tree-file", tree_file, "Leaf dump for fixture mode");
  nash->add_option("--lottery-file", lottery_file, "Lottery CSV for fixture mode");
  nash->add_flag("--audit", nash_options.audit, "Run the blocking audit on the result");

  GlobalFlags dump_flags;
  CLI::App* dump = app.add_subcommand("tree-dump", "Write the leaf enumeration");
  add_global_flags(dump, dump_flags);

  GlobalFlags metrics_flags;
  fairgen::MetricsOptions metrics_options;
  std::string statements_file, credit_x1, credit_x2;
  CLI::App* metrics =
      app.add_subcommand("metrics", "Perplexity and credit-assignment metrics");
  add_global_flags(metrics, metrics_flags);
  metrics->add_option("--statements", statements_file,
                      "Statements file (leaf dump in synthetic mode, text lines in remote)");
  metrics->add_option("--credit-x1", credit_x1, "First statement, comma-separated tokens");
  metrics->add_option("--credit-x2", credit_x2, "Second statement, comma-separated tokens");
  metrics->add_option("--credit-user", metrics_options.credit_user, "User agent index");
  metrics->add_option("--credit-ref", metrics_options.credit_reference,
                      "Reference agent index");

  CLI11_PARSE(app, argc, argv);

  try {
    if (audit->parsed()) {
      report(fairgen::run_core_audit(load_config(audit_flags)));
    } else if (consensus->parsed()) {
      fairgen::RunConfig cfg = load_config(consensus_flags);
      if (method_override) cfg.methods = {*method_override};
      if (depth_override) cfg.search.lookahead_depth = *depth_override;
      if (width_override) cfg.search.beam_width = *width_override;
      if (samples_override) cfg.search.n_samples = *samples_override;
      if (beta_override) cfg.search.beta = *beta_override;
      if (branching_override) {
        cfg.tree.branching = *branching_override;
        cfg.search.branching = *branching_override;
        if (cfg.mode == fairgen::RunMode::synthetic) cfg.env.branching = *branching_override;
      }
      if (max_len_override) {
        cfg.tree.max_depth = *max_len_override;
        cfg.search.max_len = *max_len_override;
        if (cfg.mode == fairgen::RunMode::synthetic) cfg.env.depth = *max_len_override;
      }
      cfg.validate();
      report(fairgen::run_consensus(cfg));
    } else if (nash->parsed()) {
      if (!tree_file.empty()) nash_options.tree_file = tree_file;
      if (!lottery_file.empty()) nash_options.lottery_file = lottery_file;
      report(fairgen::run_nash(load_config(nash_flags), nash_options));
    } else if (dump->parsed()) {
      report(fairgen::run_tree_dump(load_config(dump_flags)));
    } else if (metrics->parsed()) {
      if (!statements_file.empty()) metrics_options.statements_file = statements_file;
      if (!credit_x1.empty()) metrics_options.credit_x1 = credit_x1;
      if (!credit_x2.empty()) metrics_options.credit_x2 = credit_x2;
      report(fairgen::run_metrics(load_config(metrics_flags), metrics_options));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
