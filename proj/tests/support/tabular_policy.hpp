#pragma once

#include "fairgen/policies.hpp"

#include <map>
#include <stdexcept>

namespace fairgen::test {

// Hand-built policy fixture: explicit step probabilities per prefix. Entries
// need not normalize, which lets tests pin arbitrary per-path utilities.
class TabularPolicy final : public AgentPolicy {
 public:
  struct Row {
    std::vector<Token> tokens;
    Vec probs;
  };

  explicit TabularPolicy(std::map<TokenSeq, Row> rows) : rows_(std::move(rows)) {}

  std::vector<Token> enabled_tokens(const TokenSeq& prefix) const override {
    return row(prefix).tokens;
  }

  Vec action_distribution(const TokenSeq& prefix) const override { return row(prefix).probs; }

 private:
  const Row& row(const TokenSeq& prefix) const {
    auto it = rows_.find(prefix);
    if (it == rows_.end()) throw std::out_of_range("TabularPolicy: unknown prefix");
    return it->second;
  }

  std::map<TokenSeq, Row> rows_;
};

}  // namespace fairgen::test
