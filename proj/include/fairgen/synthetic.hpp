#pragma once

#include "fairgen/policies.hpp"
#include "fairgen/types.hpp"

#include <cstdint>
#include <memory>

namespace fairgen {

struct SyntheticEnvConfig {
  int n_agents = 4;
  int branching = 3;
  int depth = 4;
  int embed_dim = 8;
  double polarization = 1.0;  // rho >= 0
  std::uint64_t seed = 0;

  void validate() const;
};

// Softmax preference environment: unit token vectors per (position, token),
// unit agent vectors, and next-token scores rho * w' (z + v). The token
// table is drawn once per environment and shared by all agents.
class SyntheticEnv {
 public:
  explicit SyntheticEnv(const SyntheticEnvConfig& cfg);

  const SyntheticEnvConfig& config() const;
  const Mat& token_vectors(int position) const;  // embed_dim x branching
  const Vec& agent_vector(int agent) const;

  std::shared_ptr<const AgentPolicy> agent(int agent) const;
  // Policy with an arbitrary preference vector over this environment's tokens.
  std::shared_ptr<const AgentPolicy> policy_for(Vec preference) const;

  AgentList agents() const;

  struct Data;  // defined in synthetic.cpp

 private:
  std::shared_ptr<const Data> data_;
};

AgentList make_synthetic_agents(const SyntheticEnvConfig& cfg);

}  // namespace fairgen
