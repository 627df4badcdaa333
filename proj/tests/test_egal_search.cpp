#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fairgen/egal_search.hpp"
#include "fairgen/synthetic.hpp"
#include "fairgen/token_tree.hpp"

#include "support/tabular_policy.hpp"

#include <cmath>
#include <random>

using namespace fairgen;
using test::TabularPolicy;

namespace {

SyntheticEnvConfig search_env(std::uint64_t seed, double rho = 2.0) {
  SyntheticEnvConfig cfg;
  cfg.n_agents = 4;
  cfg.branching = 3;
  cfg.depth = 4;
  cfg.embed_dim = 8;
  cfg.polarization = rho;
  cfg.seed = seed;
  return cfg;
}

SearchConfig search_config(int depth, int width) {
  SearchConfig cfg;
  cfg.lookahead_depth = depth;
  cfg.beam_width = width;
  cfg.branching = 3;
  cfg.max_len = 4;
  return cfg;
}

// Two agents over a one-step, two-leaf tree with pinned log utilities
// (-1, -3) and (-2, -2): the egalitarian argmax is the second leaf.
AgentList two_leaf_agents() {
  Vec a(2), b(2);
  a << std::exp(-1.0), std::exp(-3.0);
  b << std::exp(-2.0), std::exp(-2.0);
  return {std::make_shared<TabularPolicy>(
              std::map<TokenSeq, TabularPolicy::Row>{{{}, {{0, 1}, a}}}),
          std::make_shared<TabularPolicy>(
              std::map<TokenSeq, TabularPolicy::Row>{{{}, {{0, 1}, b}}})};
}

}  // namespace

TEST_CASE("egalitarian welfare of identical agents is their common utility") {
  const SyntheticEnv env(search_env(1));
  const AgentList twins = {env.agent(0), env.agent(0)};
  const TokenSeq path = {0, 1, 2, 0};
  CHECK(egalitarian_welfare(twins, path) ==
        doctest::Approx(path_log_utility(*env.agent(0), path)).epsilon(1e-12));
}

TEST_CASE("uniform environment scores every depth-4 path at 4 log(1/3)") {
  const SyntheticEnv env(search_env(2, 0.0));
  CHECK(egalitarian_welfare(env.agents(), {1, 0, 2, 2}) ==
        doctest::Approx(-4.394449154672439).epsilon(1e-12));
}

TEST_CASE("hand-built minima rank the two leaves as expected") {
  const AgentList agents = two_leaf_agents();
  CHECK(egalitarian_welfare(agents, {0}) == doctest::Approx(-3.0).epsilon(1e-9));
  CHECK(egalitarian_welfare(agents, {1}) == doctest::Approx(-2.0).epsilon(1e-9));

  const TokenTree tree = build_tree(FixedPathProposer({{0}, {1}}), TreeConfig{2, 1, 1, {}});
  SearchConfig cfg = search_config(1, 1);
  cfg.branching = 2;
  cfg.max_len = 1;
  const SearchResult oracle = exhaustive_egal_argmax(tree, agents, cfg);
  CHECK(oracle.path == TokenSeq{1});
  CHECK(oracle.ew_log == doctest::Approx(-2.0).epsilon(1e-9));
  CHECK(oracle.ew_log ==
        doctest::Approx(oracle.per_agent_log_utilities.minCoeff()).epsilon(1e-9));
}

TEST_CASE("single-agent oracle returns the most likely full path") {
  const SyntheticEnv env(search_env(3));
  const AgentList solo = {env.agent(2)};
  const TokenTree tree = build_synthetic_tree(3, 4);
  const SearchResult oracle = exhaustive_egal_argmax(tree, solo, search_config(1, 1));
  double best = kNegInf;
  TokenSeq best_path;
  for (Index j = 0; j < tree.leaf_count(); ++j) {
    const double value = path_log_utility(*solo[0], tree.leaf_path(j));
    if (value > best) {
      best = value;
      best_path = tree.leaf_path(j);
    }
  }
  CHECK(oracle.path == best_path);
  CHECK(oracle.ew_log == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("oracle dominates every enumerated leaf") {
  const SyntheticEnv env(search_env(4));
  const TokenTree tree = build_synthetic_tree(3, 4);
  const SearchResult oracle = exhaustive_egal_argmax(tree, env.agents(), search_config(1, 1));
  for (Index j = 0; j < tree.leaf_count(); ++j)
    CHECK(oracle.ew_log >= egalitarian_welfare(env.agents(), tree.leaf_path(j)) - 1e-12);
}

TEST_CASE("oracle cap is enforced") {
  const TokenTree tree = build_synthetic_tree(3, 4);
  SearchConfig cfg = search_config(1, 1);
  cfg.oracle_cap = 80;
  const SyntheticEnv env(search_env(5));
  CHECK_THROWS_AS(exhaustive_egal_argmax(tree, env.agents(), cfg), std::invalid_argument);
}

TEST_CASE("full-horizon lookahead equals the oracle exactly") {
  for (std::uint64_t seed : {11, 12, 13}) {
    const SyntheticEnv env(search_env(seed));
    const FixedAlphabetProposer proposer(3, 4);
    const TokenTree tree = build_synthetic_tree(3, 4);
    const SearchResult oracle =
        exhaustive_egal_argmax(tree, env.agents(), search_config(4, 1));
    const SearchResult lookahead = finite_lookahead(proposer, env.agents(),
                                                    search_config(4, 1));
    CHECK(lookahead.path == oracle.path);
    CHECK(lookahead.ew_log == doctest::Approx(oracle.ew_log).epsilon(1e-12));
  }
}

TEST_CASE("depth-1 lookahead is the greedy trajectory") {
  const SyntheticEnv env(search_env(14));
  const FixedAlphabetProposer proposer(3, 4);
  const SearchResult greedy = finite_lookahead(proposer, env.agents(), search_config(1, 1));

  // hand-rolled greedy on cumulative minima
  TokenSeq path;
  Vec logs = Vec::Zero(4);
  for (int t = 0; t < 4; ++t) {
    double best = kNegInf;
    Token best_token = 0;
    Vec best_logs;
    for (Token a = 0; a < 3; ++a) {
      Vec next = logs;
      for (int i = 0; i < 4; ++i)
        next[i] += std::log(env.agent(i)->action_distribution(path)[a]);
      if (next.minCoeff() > best) {
        best = next.minCoeff();
        best_token = a;
        best_logs = next;
      }
    }
    path.push_back(best_token);
    logs = best_logs;
  }
  CHECK(greedy.path == path);
  CHECK(greedy.ew_log == doctest::Approx(logs.minCoeff()).epsilon(1e-12));
}

TEST_CASE("intermediate lookahead stays below the oracle") {
  const SyntheticEnv env(search_env(15));
  const FixedAlphabetProposer proposer(3, 4);
  const TokenTree tree = build_synthetic_tree(3, 4);
  const SearchResult oracle = exhaustive_egal_argmax(tree, env.agents(), search_config(2, 1));
  const SearchResult lookahead = finite_lookahead(proposer, env.agents(), search_config(2, 1));
  CHECK(lookahead.ew_log <= oracle.ew_log + 1e-12);
  MESSAGE("lookahead d=2 gap to oracle: ", oracle.ew_log - lookahead.ew_log);
}

TEST_CASE("beam holding every path equals the oracle") {
  const SyntheticEnv env(search_env(16));
  const FixedAlphabetProposer proposer(3, 4);
  const TokenTree tree = build_synthetic_tree(3, 4);
  const SearchResult oracle = exhaustive_egal_argmax(tree, env.agents(), search_config(1, 81));
  const SearchResult beam = beam_search(proposer, env.agents(), search_config(1, 81));
  CHECK(beam.path == oracle.path);
  CHECK(beam.ew_log == doctest::Approx(oracle.ew_log).epsilon(1e-12));
}

TEST_CASE("width-1 beam equals depth-1 lookahead") {
  const SyntheticEnv env(search_env(17));
  const FixedAlphabetProposer proposer(3, 4);
  const SearchResult beam = beam_search(proposer, env.agents(), search_config(1, 1));
  const SearchResult greedy = finite_lookahead(proposer, env.agents(), search_config(1, 1));
  CHECK(beam.path == greedy.path);
}

TEST_CASE("beam width 4 never loses to greedy over 20 seeds") {
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    const SyntheticEnv env(search_env(seed));
    const FixedAlphabetProposer proposer(3, 4);
    const TokenTree tree = build_synthetic_tree(3, 4);
    const SearchResult oracle =
        exhaustive_egal_argmax(tree, env.agents(), search_config(1, 1));
    const SearchResult beam = beam_search(proposer, env.agents(), search_config(1, 4));
    const SearchResult greedy = beam_search(proposer, env.agents(), search_config(1, 1));
    CHECK(beam.ew_log >= greedy.ew_log - 1e-12);
    CHECK(beam.ew_log <= oracle.ew_log + 1e-12);
    CHECK(greedy.ew_log <= oracle.ew_log + 1e-12);
  }
}

TEST_CASE("partial egalitarian score never increases along a path") {
  const SyntheticEnv env(search_env(18));
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<Token> token(0, 2);
  for (int round = 0; round < 20; ++round) {
    TokenSeq path;
    double previous = 0.0;
    for (int t = 0; t < 4; ++t) {
      path.push_back(token(rng));
      const double current = egalitarian_welfare(env.agents(), path);
      CHECK(current <= previous + 1e-12);
      previous = current;
    }
  }
}

TEST_CASE("per-agent utilities never fall below the reported minimum") {
  const SyntheticEnv env(search_env(19));
  const FixedAlphabetProposer proposer(3, 4);
  const SearchResult beam = beam_search(proposer, env.agents(), search_config(1, 4));
  for (Index i = 0; i < beam.per_agent_log_utilities.size(); ++i)
    CHECK(beam.per_agent_log_utilities[i] >= beam.ew_log - 1e-12);
}

TEST_CASE("searches are deterministic for fixed seeds and configs") {
  const SyntheticEnv env(search_env(20));
  const FixedAlphabetProposer proposer(3, 4);
  const SearchResult a = beam_search(proposer, env.agents(), search_config(2, 3));
  const SearchResult b = beam_search(proposer, env.agents(), search_config(2, 3));
  CHECK(a.path == b.path);
  std::mt19937_64 rng_a(99), rng_b(99);
  const UniformPolicy reference(3, 4);
  const SearchResult sample_a = best_of_n(reference, env.agents(), search_config(1, 1), rng_a);
  const SearchResult sample_b = best_of_n(reference, env.agents(), search_config(1, 1), rng_b);
  CHECK(sample_a.path == sample_b.path);
}

TEST_CASE("best-of-one is a plain reference sample") {
  const SyntheticEnv env(search_env(21));
  SearchConfig cfg = search_config(1, 1);
  cfg.n_samples = 1;
  const UniformPolicy reference(3, 4);
  std::mt19937_64 rng(5);
  const SearchResult result = best_of_n(reference, env.agents(), cfg, rng);
  CHECK(result.path.size() == 4);
  CHECK(result.method == "best-of-n");
}

TEST_CASE("huge sample counts reach the oracle on a tiny tree") {
  SyntheticEnvConfig env_cfg = search_env(22);
  env_cfg.branching = 2;
  env_cfg.depth = 2;
  const SyntheticEnv env(env_cfg);
  const TokenTree tree = build_synthetic_tree(2, 2);
  SearchConfig cfg = search_config(1, 1);
  cfg.branching = 2;
  cfg.max_len = 2;
  const SearchResult oracle = exhaustive_egal_argmax(tree, env.agents(), cfg);
  cfg.n_samples = 256;
  const UniformPolicy reference(2, 2);
  std::mt19937_64 rng(6);
  const SearchResult sampled = best_of_n(reference, env.agents(), cfg, rng);
  CHECK(sampled.ew_log == doctest::Approx(oracle.ew_log).epsilon(1e-12));
}

TEST_CASE("mean best-of-n welfare is non-decreasing in the sample count") {
  double mean4 = 0.0, mean16 = 0.0;
  const int seeds = 50;
  for (int seed = 0; seed < seeds; ++seed) {
    const SyntheticEnv env(search_env(static_cast<std::uint64_t>(seed + 500)));
    const UniformPolicy reference(3, 4);
    SearchConfig cfg = search_config(1, 1);
    cfg.n_samples = 4;
    std::mt19937_64 rng_a(static_cast<std::uint64_t>(seed));
    mean4 += best_of_n(reference, env.agents(), cfg, rng_a).ew_log;
    cfg.n_samples = 16;
    std::mt19937_64 rng_b(static_cast<std::uint64_t>(seed));
    mean16 += best_of_n(reference, env.agents(), cfg, rng_b).ew_log;
  }
  CHECK(mean16 / seeds >= mean4 / seeds);
}

TEST_CASE("zero-probability paths rank below finite ones, fewer zeros first") {
  // Agent B forbids token 1 at the root; the other paths stay finite.
  Vec root_a(2), root_b(2), next(2);
  root_a << 0.5, 0.5;
  root_b << 1.0, 0.0;
  next << 0.5, 0.5;
  std::map<TokenSeq, TabularPolicy::Row> rows_a = {
      {{}, {{0, 1}, root_a}}, {{0}, {{0, 1}, next}}, {{1}, {{0, 1}, next}}};
  std::map<TokenSeq, TabularPolicy::Row> rows_b = {
      {{}, {{0, 1}, root_b}}, {{0}, {{0, 1}, next}}, {{1}, {{0, 1}, next}}};
  const AgentList agents = {std::make_shared<TabularPolicy>(rows_a),
                            std::make_shared<TabularPolicy>(rows_b)};
  const FixedAlphabetProposer proposer(2, 2);
  SearchConfig cfg = search_config(2, 4);
  cfg.branching = 2;
  cfg.max_len = 2;
  const SearchResult beam = beam_search(proposer, agents, cfg);
  CHECK(beam.zero_prob_steps == 0);
  CHECK(beam.path[0] == 0);  // avoids the forbidden subtree
  const double finite = egalitarian_welfare(agents, beam.path);
  CHECK(std::isfinite(finite));
}
