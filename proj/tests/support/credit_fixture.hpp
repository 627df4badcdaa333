#pragma once

#include "fairgen/synthetic.hpp"

#include <random>

namespace fairgen::test {

// A perturbation of the preference vector living in the span of position
// `target`'s token vectors and orthogonal to every other position's token
// vectors. Softmax shifts cancel at the untouched positions, so only the
// target position's distribution moves. Needs embed_dim > branching*(depth-1).
inline Vec localized_perturbation(const SyntheticEnv& env, int target, std::uint64_t seed) {
  const SyntheticEnvConfig& cfg = env.config();
  Mat others(cfg.embed_dim, cfg.branching * (cfg.depth - 1));
  Index column = 0;
  for (int t = 0; t < cfg.depth; ++t) {
    if (t == target) continue;
    for (int a = 0; a < cfg.branching; ++a)
      others.col(column++) = env.token_vectors(t).col(a);
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int attempt = 0; attempt < 16; ++attempt) {
    Vec raw = Vec::Zero(cfg.embed_dim);
    for (int a = 0; a < cfg.branching; ++a)
      raw += normal(rng) * env.token_vectors(target).col(a);
    const Vec coeffs = others.colPivHouseholderQr().solve(raw);
    Vec delta = raw - others * coeffs;
    if (delta.norm() > 1e-8) return delta / delta.norm();
  }
  throw std::runtime_error("localized_perturbation: no orthogonal component found");
}

}  // namespace fairgen::test
