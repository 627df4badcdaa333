#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fairgen/nash.hpp"
#include "fairgen/synthetic.hpp"
#include "fairgen/token_tree.hpp"

#include <cmath>
#include <random>

using namespace fairgen;

namespace {

UtilityMatrix matrix_from(std::initializer_list<std::initializer_list<double>> rows) {
  UtilityMatrix out;
  const Index n = static_cast<Index>(rows.size());
  const Index m = static_cast<Index>(rows.begin()->size());
  out.values = Mat(n, m);
  Index i = 0;
  for (const auto& row : rows) {
    Index j = 0;
    for (double v : row) out.values(i, j++) = v;
    ++i;
  }
  return out;
}

// Brute-force maximum of the log Nash welfare over a step-size grid on the
// 3-point simplex.
double grid_max_log_nw(const UtilityMatrix& utilities, double step) {
  REQUIRE(utilities.leaves() == 3);
  const int cells = static_cast<int>(std::lround(1.0 / step));
  double best = kNegInf;
  for (int i = 0; i <= cells; ++i) {
    for (int j = 0; j <= cells - i; ++j) {
      Vec p(3);
      p << i * step, j * step, 1.0 - (i + j) * step;
      best = std::max(best, nash_welfare(utilities, p));
    }
  }
  return best;
}

UtilityMatrix random_instance(std::mt19937_64& rng, Index n, Index m) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  UtilityMatrix out;
  out.values = Mat(n, m);
  for (Index i = 0; i < n; ++i) {
    double row_max = 0.0;
    do {
      for (Index j = 0; j < m; ++j) out.values(i, j) = uniform(rng);
      row_max = out.values.row(i).maxCoeff();
    } while (row_max < 0.05);
  }
  return out;
}

std::vector<TokenSeq> appendix_fixture_paths() {
  return {{0, 0, 0}, {0, 0, 1}, {0, 1, 0}, {0, 1, 1}, {1}};
}

Vec appendix_fixture_lottery() {
  Vec p(5);
  p << 0.2, 0.05, 0.1, 0.3, 0.35;
  return p;
}

Vec random_lottery(std::mt19937_64& rng, Index m, bool with_zeros) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Vec p(m);
  for (Index j = 0; j < m; ++j) p[j] = uniform(rng);
  if (with_zeros)
    for (Index j = 0; j < m; ++j)
      if (uniform(rng) < 0.3) p[j] = 0.0;
  if (p.sum() <= 0.0) p[0] = 1.0;
  return p / p.sum();
}

}  // namespace

TEST_CASE("nash welfare of the symmetric two-agent split is 2 log 1/2") {
  const UtilityMatrix u = matrix_from({{1.0, 0.0}, {0.0, 1.0}});
  Vec p(2);
  p << 0.5, 0.5;
  CHECK(nash_welfare(u, p) == doctest::Approx(-1.3862943611198906).epsilon(1e-12));
}

TEST_CASE("nash welfare of a point mass is the column log sum") {
  const UtilityMatrix u = matrix_from({{0.3, 0.6}, {0.9, 0.2}, {0.5, 0.5}});
  Vec p(2);
  p << 0.0, 1.0;
  CHECK(nash_welfare(u, p) ==
        doctest::Approx(std::log(0.6) + std::log(0.2) + std::log(0.5)).epsilon(1e-12));
  p << 1.0, 0.0;
  CHECK(nash_welfare(u, p) ==
        doctest::Approx(std::log(0.3) + std::log(0.9) + std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("nash welfare matches an independent recomputation on random instances") {
  std::mt19937_64 rng(1);
  for (int round = 0; round < 10; ++round) {
    const UtilityMatrix u = random_instance(rng, 3, 5);
    const Vec p = random_lottery(rng, 5, false);
    double expected = 0.0;
    for (Index i = 0; i < 3; ++i) {
      double dot = 0.0;
      for (Index j = 0; j < 5; ++j) dot += u.values(i, j) * p[j];
      expected += std::log(dot);
    }
    CHECK(nash_welfare(u, p) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("nash welfare is -inf when an agent has zero expected utility") {
  const UtilityMatrix u = matrix_from({{1.0, 0.0}, {0.0, 1.0}});
  Vec p(2);
  p << 1.0, 0.0;
  CHECK(nash_welfare(u, p) == kNegInf);
}

TEST_CASE("single agent converges to a point mass on the argmax leaf") {
  const UtilityMatrix u = matrix_from({{0.2, 0.9, 0.9, 0.1}});
  const NashSolution solution = maximize_nash_welfare(u);
  CHECK(solution.converged);
  CHECK(solution.lottery[1] > 1.0 - 1e-4);  // tie broken toward the lower index
}

TEST_CASE("symmetric two-agent instance splits evenly") {
  const UtilityMatrix u = matrix_from({{1.0, 0.0}, {0.0, 1.0}});
  const NashSolution solution = maximize_nash_welfare(u);
  CHECK(solution.converged);
  CHECK(solution.lottery[0] == doctest::Approx(0.5).epsilon(1e-4));
  CHECK(solution.lottery[1] == doctest::Approx(0.5).epsilon(1e-4));
}

TEST_CASE("solver is within epsilon of a 0.01-step grid oracle") {
  std::mt19937_64 rng(2);
  for (int round = 0; round < 10; ++round) {
    const UtilityMatrix u = random_instance(rng, 2, 3);
    const NashSolution solution = maximize_nash_welfare(u);
    const double grid_best = grid_max_log_nw(u, 0.01);
    CHECK(solution.log_nash_welfare >= grid_best - 1e-4);
  }
}

TEST_CASE("objective trace is non-decreasing") {
  std::mt19937_64 rng(3);
  for (int round = 0; round < 10; ++round) {
    const UtilityMatrix u = random_instance(rng, 3, 6);
    SolverConfig cfg;
    cfg.record_trace = true;
    const NashSolution solution = maximize_nash_welfare(u, cfg);
    for (std::size_t k = 1; k < solution.trace.size(); ++k)
      CHECK(solution.trace[k] >= solution.trace[k - 1]);
  }
}

TEST_CASE("gradient matches central finite differences at interior points") {
  std::mt19937_64 rng(4);
  const double h = 1e-6;
  for (int round = 0; round < 20; ++round) {
    const UtilityMatrix u = random_instance(rng, 3, 5);
    Vec p = random_lottery(rng, 5, false);
    p = 0.9 * p + Vec::Constant(5, 0.1 / 5.0);  // keep the point interior
    const Vec grad = nash_welfare_gradient(u, p);
    for (Index j = 0; j < 5; ++j) {
      Vec up = p, down = p;
      up[j] += h;
      down[j] -= h;
      const double fd = (nash_welfare(u, up) - nash_welfare(u, down)) / (2 * h);
      CHECK(std::abs(grad[j] - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("positive row rescaling shifts the objective by the log constant") {
  std::mt19937_64 rng(5);
  const UtilityMatrix u = random_instance(rng, 3, 4);
  UtilityMatrix scaled = u;
  const double c = 7.5;
  scaled.values.row(1) *= c;
  const NashSolution base = maximize_nash_welfare(u);
  const NashSolution shifted = maximize_nash_welfare(scaled);
  CHECK(shifted.log_nash_welfare ==
        doctest::Approx(base.log_nash_welfare + std::log(c)).epsilon(1e-4));
  // argmax is unchanged: each lottery is near-optimal for the other scaling
  CHECK(nash_welfare(u, shifted.lottery) >= base.log_nash_welfare - 2e-6);
  CHECK(nash_welfare(scaled, base.lottery) >= shifted.log_nash_welfare - 2e-6);
}

TEST_CASE("an all-zero agent row raises a positivity error naming the agent") {
  const UtilityMatrix u = matrix_from({{1.0, 0.5}, {0.0, 0.0}});
  CHECK_THROWS_AS(maximize_nash_welfare(u), PositivityError);
  try {
    maximize_nash_welfare(u);
  } catch (const PositivityError& e) {
    CHECK(e.agent() == 1);
  }
}

TEST_CASE("hitting the iteration cap flags the result as non-converged") {
  std::mt19937_64 rng(6);
  const UtilityMatrix u = random_instance(rng, 3, 6);
  SolverConfig cfg;
  cfg.max_iters = 2;
  cfg.epsilon = 1e-14;
  const NashSolution solution = maximize_nash_welfare(u, cfg);
  CHECK_FALSE(solution.converged);
  CHECK(solution.iterations == 2);
}

TEST_CASE("chunked optimum never exceeds the full optimum and grows with the sample") {
  const SyntheticEnvConfig env_cfg = [] {
    SyntheticEnvConfig cfg;
    cfg.n_agents = 3;
    cfg.branching = 2;
    cfg.depth = 4;
    cfg.polarization = 2.0;
    cfg.seed = 42;
    return cfg;
  }();
  const SyntheticEnv env(env_cfg);
  const TokenTree full = build_synthetic_tree(2, 4);
  const UtilityMatrix utilities = utility_matrix(env.agents(), full);
  const double full_opt = maximize_nash_welfare(utilities).log_nash_welfare;

  auto base = std::make_shared<FixedAlphabetProposer>(2, 4);
  TreeConfig tree_cfg;
  tree_cfg.branching = 2;
  tree_cfg.max_depth = 4;
  tree_cfg.chunk_size = 2;

  double previous = kNegInf;
  for (int samples : {2, 3, 4}) {
    const ChunkedProposer proposer(base, 2, samples, 9001);
    const TokenTree chunked = build_tree(proposer, tree_cfg);
    const std::vector<Index> keep = chunked_leaf_subset(full, chunked);
    UtilityMatrix restricted;
    restricted.values = Mat(utilities.agents(), static_cast<Index>(keep.size()));
    for (Index j = 0; j < static_cast<Index>(keep.size()); ++j)
      restricted.values.col(j) = utilities.values.col(keep[static_cast<std::size_t>(j)]);
    const double sub_opt = maximize_nash_welfare(restricted).log_nash_welfare;
    CHECK(sub_opt <= full_opt + 1e-6);
    CHECK(sub_opt >= previous - 1e-6);  // enlarging the sample never hurts
    previous = sub_opt;
  }

  // exhaustive chunking reaches the full optimum
  const TokenTree chunked = build_synthetic_tree(2, 4, 2);
  const std::vector<Index> keep = chunked_leaf_subset(full, chunked);
  CHECK(static_cast<Index>(keep.size()) == full.leaf_count());
}

TEST_CASE("induced conditionals reproduce the worked example to four decimals") {
  const TokenTree tree = build_tree(FixedPathProposer(appendix_fixture_paths()),
                                    TreeConfig{2, 3, 1, {}});
  const InducedPolicy policy = induce_policy(tree, appendix_fixture_lottery());
  bool checked = false;
  for (Index id = 0; id < tree.node_count(); ++id) {
    if (tree.node(id).prefix != TokenSeq{0}) continue;
    const Vec& probs = policy.action_probs[static_cast<std::size_t>(id)];
    REQUIRE(probs.size() == 2);
    CHECK(probs[0] == doctest::Approx(0.25 / 0.65).epsilon(5e-5));
    CHECK(probs[1] == doctest::Approx(0.40 / 0.65).epsilon(5e-5));
    CHECK(std::abs(probs[0] - 0.3846) < 1e-4);
    CHECK(std::abs(probs[1] - 0.6154) < 1e-4);
    checked = true;
  }
  CHECK(checked);
}

TEST_CASE("point-mass lottery induces an indicator policy") {
  const TokenTree tree = build_synthetic_tree(2, 3);
  Vec p = Vec::Zero(8);
  p[5] = 1.0;
  const InducedPolicy policy = induce_policy(tree, p);
  const Vec recovered = policy_leaf_distribution(tree, policy);
  CHECK(recovered[5] == doctest::Approx(1.0).epsilon(1e-15));
  for (Index id = 0; id < tree.node_count(); ++id) {
    const Vec& probs = policy.action_probs[static_cast<std::size_t>(id)];
    if (policy.node_mass[id] > 0.0) {
      if (probs.size() > 0) CHECK(probs.sum() == doctest::Approx(1.0).epsilon(1e-9));
    } else {
      if (probs.size() > 0) CHECK(probs.maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("induced conditionals match per-node brute-force mass ratios") {
  std::mt19937_64 rng(7);
  const TokenTree tree = build_synthetic_tree(3, 3);
  const Vec p = random_lottery(rng, tree.leaf_count(), true);
  const InducedPolicy policy = induce_policy(tree, p);
  const Vec mass = policy.node_mass;
  for (Index id = 0; id < tree.node_count(); ++id) {
    const TokenTree::Node& node = tree.node(id);
    for (std::size_t c = 0; c < node.children.size(); ++c) {
      const double expected =
          mass[id] > 0.0 ? mass[node.children[c]] / mass[id] : 0.0;
      CHECK(policy.action_probs[static_cast<std::size_t>(id)][static_cast<Index>(c)] ==
            doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("policy round trip recovers the worked-example lottery exactly") {
  const TokenTree tree = build_tree(FixedPathProposer(appendix_fixture_paths()),
                                    TreeConfig{2, 3, 1, {}});
  const Vec p = appendix_fixture_lottery();
  const Vec recovered = policy_leaf_distribution(tree, induce_policy(tree, p));
  CHECK((recovered - p).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("uniform lottery round trips") {
  const TokenTree tree = build_synthetic_tree(3, 4);
  const Vec p = Vec::Constant(81, 1.0 / 81.0);
  const Vec recovered = policy_leaf_distribution(tree, induce_policy(tree, p));
  CHECK((recovered - p).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("100 random lotteries with zeros round trip within 1e-10") {
  std::mt19937_64 rng(8);
  const TokenTree tree = build_synthetic_tree(3, 4);
  double worst = 0.0;
  for (int round = 0; round < 100; ++round) {
    const Vec p = random_lottery(rng, tree.leaf_count(), round % 2 == 1);
    const Vec recovered = policy_leaf_distribution(tree, induce_policy(tree, p));
    worst = std::max(worst, (recovered - p).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("rollout from a point mass always lands on that leaf") {
  const TokenTree tree = build_synthetic_tree(2, 3);
  Vec p = Vec::Zero(8);
  p[3] = 1.0;
  const InducedPolicy policy = induce_policy(tree, p);
  std::mt19937_64 rng(9);
  for (int round = 0; round < 50; ++round) CHECK(rollout(tree, policy, rng) == 3);
}

TEST_CASE("worked-example rollout frequency of the 0.3 leaf is 0.3 within 0.01") {
  const TokenTree tree = build_tree(FixedPathProposer(appendix_fixture_paths()),
                                    TreeConfig{2, 3, 1, {}});
  const InducedPolicy policy = induce_policy(tree, appendix_fixture_lottery());
  std::mt19937_64 rng(10);
  int hits = 0;
  const int rounds = 100000;
  for (int round = 0; round < rounds; ++round)
    if (rollout(tree, policy, rng) == 3) ++hits;
  const double frequency = static_cast<double>(hits) / rounds;
  CHECK(std::abs(frequency - 0.3) < 0.01);
}

TEST_CASE("rollout histogram passes a 99% chi-square test against the lottery") {
  const TokenTree tree = build_synthetic_tree(2, 3);  // 8 leaves, 7 degrees of freedom
  std::mt19937_64 seed_rng(11);
  const Vec p = random_lottery(seed_rng, 8, false);
  const InducedPolicy policy = induce_policy(tree, p);
  std::mt19937_64 rng(12);
  const int rounds = 50000;
  Vec counts = Vec::Zero(8);
  for (int round = 0; round < rounds; ++round) counts[rollout(tree, policy, rng)] += 1.0;
  double chi_square = 0.0;
  for (Index j = 0; j < 8; ++j) {
    const double expected = rounds * p[j];
    chi_square += (counts[j] - expected) * (counts[j] - expected) / expected;
  }
  CHECK(chi_square < 18.475);  // 99th percentile at 7 degrees of freedom
}

TEST_CASE("rollout on a zero-mass root is rejected") {
  const TokenTree tree = build_synthetic_tree(2, 2);
  CHECK_THROWS_AS(induce_policy(tree, Vec::Zero(4)), std::invalid_argument);
}
