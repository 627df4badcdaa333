#include "fairgen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fairgen {

double agent_perplexity(const AgentPolicy& policy, const TokenSeq& statement) {
  const double score = paraphrase_score(policy, {}, statement);
  if (score == kNegInf) return kPosInf;
  return std::exp(-score);
}

ScoredStatement egalitarian_perplexity(const AgentList& agents, const TokenSeq& statement) {
  if (agents.empty()) throw std::invalid_argument("egalitarian_perplexity: no agents");
  ScoredStatement out;
  out.actions = statement;
  out.per_agent_ppl = Vec(static_cast<Index>(agents.size()));
  for (std::size_t i = 0; i < agents.size(); ++i)
    out.per_agent_ppl[static_cast<Index>(i)] = agent_perplexity(*agents[i], statement);
  out.eppl = out.per_agent_ppl.maxCoeff();
  return out;
}

double paraphrase_score(const AgentPolicy& policy, const TokenSeq& context,
                        const TokenSeq& statement) {
  if (statement.empty()) throw std::invalid_argument("paraphrase_score: empty statement");
  TokenSeq prefix = context;
  double total = 0.0;
  for (Token a : statement) {
    const double p = step_prob(policy, prefix, a);
    if (p <= 0.0) return kNegInf;
    total += std::log(p);
    prefix.push_back(a);
  }
  return total / static_cast<double>(statement.size());
}

namespace {

Vec midranks(const Vec& values) {
  const Index n = values.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(),
            [&](Index a, Index b) { return values[a] < values[b]; });
  Vec ranks(n);
  Index i = 0;
  while (i < n) {
    Index j = i;
    while (j + 1 < n && values[order[static_cast<std::size_t>(j + 1)]] ==
                            values[order[static_cast<std::size_t>(i)]])
      ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (Index k = i; k <= j; ++k) ranks[order[static_cast<std::size_t>(k)]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::optional<double> spearman(const Vec& x, const Vec& y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
  if (x.size() < 2) throw std::invalid_argument("spearman: need at least two samples");
  const Vec rx = midranks(x);
  const Vec ry = midranks(y);
  const Vec cx = rx.array() - rx.mean();
  const Vec cy = ry.array() - ry.mean();
  const double denom = std::sqrt(cx.squaredNorm() * cy.squaredNorm());
  if (denom <= 0.0) return std::nullopt;  // constant input
  return cx.dot(cy) / denom;
}

Vec credit_delta(const AgentPolicy& user, const AgentPolicy& reference,
                 const TokenSeq& sequence) {
  Vec out(static_cast<Index>(sequence.size()));
  TokenSeq prefix;
  prefix.reserve(sequence.size());
  for (std::size_t j = 0; j < sequence.size(); ++j) {
    const double pu = step_prob(user, prefix, sequence[j]);
    const double pr = step_prob(reference, prefix, sequence[j]);
    out[static_cast<Index>(j)] = (pu <= 0.0 || pr <= 0.0)
                                     ? std::numeric_limits<double>::quiet_NaN()
                                     : std::log(pu) - std::log(pr);
    prefix.push_back(sequence[j]);
  }
  return out;
}

CreditProfile credit_zscores(const Vec& delta_x1, const Vec& delta_x2) {
  if (delta_x1.size() != delta_x2.size())
    throw std::invalid_argument("credit_zscores: length mismatch");
  if (delta_x1.size() < 1) throw std::invalid_argument("credit_zscores: empty input");
  if (!delta_x1.allFinite() || !delta_x2.allFinite())
    throw std::invalid_argument(
        "credit_zscores: non-finite delta; drop sentinel positions before scoring");

  CreditProfile out;
  out.delta_x1 = delta_x1;
  out.delta_x2 = delta_x2;
  out.d = (delta_x1 - delta_x2).cwiseAbs();
  const double mean = out.d.mean();
  const double variance = (out.d.array() - mean).square().mean();  // population form
  const double stddev = std::sqrt(variance);
  if (stddev > 0.0) {
    out.z = (out.d.array() - mean) / stddev;
  } else {
    out.z = Vec::Zero(out.d.size());
    out.degenerate = true;
  }
  return out;
}

std::pair<Vec, Vec> align_deltas(const Vec& delta_x1, const Vec& delta_x2,
                                 const std::vector<Index>& index_x1,
                                 const std::vector<Index>& index_x2) {
  if (index_x1.size() != index_x2.size())
    throw std::invalid_argument("align_deltas: index maps differ in length");
  Vec a(static_cast<Index>(index_x1.size()));
  Vec b(static_cast<Index>(index_x2.size()));
  for (std::size_t k = 0; k < index_x1.size(); ++k) {
    if (index_x1[k] < 0 || index_x1[k] >= delta_x1.size() || index_x2[k] < 0 ||
        index_x2[k] >= delta_x2.size())
      throw std::out_of_range("align_deltas: index outside delta range");
    a[static_cast<Index>(k)] = delta_x1[index_x1[k]];
    b[static_cast<Index>(k)] = delta_x2[index_x2[k]];
  }
  return {a, b};
}

}  // namespace fairgen
