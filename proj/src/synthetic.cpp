#include "fairgen/synthetic.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

namespace fairgen {

void SyntheticEnvConfig::validate() const {
  if (n_agents < 1) throw std::invalid_argument("SyntheticEnvConfig: n_agents must be >= 1");
  if (branching < 1) throw std::invalid_argument("SyntheticEnvConfig: branching must be >= 1");
  if (depth < 1) throw std::invalid_argument("SyntheticEnvConfig: depth must be >= 1");
  if (embed_dim < 1) throw std::invalid_argument("SyntheticEnvConfig: embed_dim must be >= 1");
  if (!(polarization >= 0))
    throw std::invalid_argument("SyntheticEnvConfig: polarization must be >= 0");
}

struct SyntheticEnv::Data {
  SyntheticEnvConfig cfg;
  std::vector<Mat> token_vectors;  // per position, embed_dim x branching
  std::vector<Vec> agent_vectors;
};

namespace {

Vec draw_unit_vector(std::mt19937_64& rng, std::normal_distribution<double>& normal, int dim) {
  Vec v(dim);
  for (int k = 0; k < dim; ++k) v[k] = normal(rng);
  const double norm = v.norm();
  if (norm == 0.0) return draw_unit_vector(rng, normal, dim);
  return v / norm;
}

class SoftmaxAgentPolicy final : public AgentPolicy {
 public:
  SoftmaxAgentPolicy(std::shared_ptr<const SyntheticEnv::Data> data, Vec preference)
      : data_(std::move(data)), preference_(std::move(preference)) {}

  std::vector<Token> enabled_tokens(const TokenSeq& prefix) const override {
    check_prefix(prefix);
    std::vector<Token> tokens(static_cast<std::size_t>(data_->cfg.branching));
    for (std::size_t a = 0; a < tokens.size(); ++a) tokens[a] = static_cast<Token>(a);
    return tokens;
  }

  Vec action_distribution(const TokenSeq& prefix) const override {
    check_prefix(prefix);
    const int t = static_cast<int>(prefix.size());
    const int dim = data_->cfg.embed_dim;
    Vec state = Vec::Zero(dim);
    for (int tau = 0; tau < t; ++tau)
      state += data_->token_vectors[static_cast<std::size_t>(tau)].col(prefix[tau]);
    const Mat& tokens = data_->token_vectors[static_cast<std::size_t>(t)];
    Vec scores = data_->cfg.polarization *
                 ((tokens.transpose() * preference_).array() + preference_.dot(state)).matrix();
    scores.array() -= scores.maxCoeff();
    Vec probs = scores.array().exp();
    probs /= probs.sum();
    return probs;
  }

 private:
  void check_prefix(const TokenSeq& prefix) const {
    if (static_cast<int>(prefix.size()) >= data_->cfg.depth)
      throw std::out_of_range("SoftmaxAgentPolicy: prefix at or beyond environment depth");
    for (Token a : prefix)
      if (a < 0 || a >= data_->cfg.branching)
        throw std::out_of_range("SoftmaxAgentPolicy: token outside alphabet");
  }

  std::shared_ptr<const SyntheticEnv::Data> data_;
  Vec preference_;
};

}  // namespace

SyntheticEnv::SyntheticEnv(const SyntheticEnvConfig& cfg) {
  cfg.validate();
  auto data = std::make_shared<Data>();
  data->cfg = cfg;

  // Fixed draw order: token vectors by (position, token), then agent vectors.
  // Polarization does not enter the draws, so sweeps over rho share vectors.
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  data->token_vectors.reserve(static_cast<std::size_t>(cfg.depth));
  for (int t = 0; t < cfg.depth; ++t) {
    Mat vectors(cfg.embed_dim, cfg.branching);
    for (int a = 0; a < cfg.branching; ++a)
      vectors.col(a) = draw_unit_vector(rng, normal, cfg.embed_dim);
    data->token_vectors.push_back(std::move(vectors));
  }
  data->agent_vectors.reserve(static_cast<std::size_t>(cfg.n_agents));
  for (int i = 0; i < cfg.n_agents; ++i)
    data->agent_vectors.push_back(draw_unit_vector(rng, normal, cfg.embed_dim));
  data_ = std::move(data);
}

const SyntheticEnvConfig& SyntheticEnv::config() const { return data_->cfg; }

const Mat& SyntheticEnv::token_vectors(int position) const {
  if (position < 0 || position >= data_->cfg.depth)
    throw std::out_of_range("SyntheticEnv: position outside depth");
  return data_->token_vectors[static_cast<std::size_t>(position)];
}

const Vec& SyntheticEnv::agent_vector(int agent) const {
  if (agent < 0 || agent >= data_->cfg.n_agents)
    throw std::out_of_range("SyntheticEnv: no such agent");
  return data_->agent_vectors[static_cast<std::size_t>(agent)];
}

std::shared_ptr<const AgentPolicy> SyntheticEnv::agent(int agent) const {
  return policy_for(agent_vector(agent));
}

std::shared_ptr<const AgentPolicy> SyntheticEnv::policy_for(Vec preference) const {
  if (preference.size() != data_->cfg.embed_dim)
    throw std::invalid_argument("SyntheticEnv: preference dimension mismatch");
  return std::make_shared<SoftmaxAgentPolicy>(data_, std::move(preference));
}

AgentList SyntheticEnv::agents() const {
  AgentList out;
  out.reserve(static_cast<std::size_t>(data_->cfg.n_agents));
  for (int i = 0; i < data_->cfg.n_agents; ++i) out.push_back(agent(i));
  return out;
}

AgentList make_synthetic_agents(const SyntheticEnvConfig& cfg) {
  return SyntheticEnv(cfg).agents();
}

}  // namespace fairgen
