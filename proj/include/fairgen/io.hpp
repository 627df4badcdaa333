#pragma once

#include "fairgen/core_audit.hpp"
#include "fairgen/nash.hpp"
#include "fairgen/policies.hpp"
#include "fairgen/token_tree.hpp"
#include "fairgen/types.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace fairgen {

// Shortest round-trip decimal form; stable across runs.
std::string format_double(double value);

// lottery CSV: header "leaf_index,weight", one row per leaf
void write_lottery_csv(std::ostream& out, const Vec& lottery);
Vec read_lottery_csv(std::istream& in);

// utility CSV: header "agent,<leaf indices...>", one row per agent
void write_utility_csv(std::ostream& out, const UtilityMatrix& utilities);

// audit CSV: rho,policy,alpha_star,witness_coalition,runtime_ms
void write_audit_csv(std::ostream& out, const AuditReport& report);

struct MetricsRow {
  std::string method;
  std::string scenario;
  std::uint64_t seed = 0;
  std::string agent_id;
  double ppl = 0.0;
  double eppl = 0.0;
};
// metrics CSV: method,scenario,seed,agent_id,ppl,eppl
void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows);

struct CreditRow {
  Index position = 0;
  Token token = 0;
  double delta_x1 = 0.0;
  double delta_x2 = 0.0;
  double d = 0.0;
  double z = 0.0;
};
// credit CSV: position,token,delta_x1,delta_x2,d,z
void write_credit_csv(std::ostream& out, const std::vector<CreditRow>& rows);

// Per-node conditional dump: prefix, action tokens, conditional probability.
void write_policy_dump(std::ostream& out, const TokenTree& tree, const InducedPolicy& policy);

// Line plot of alpha_star versus rho with a log-scale y axis, one series per
// audited policy.
void write_audit_svg(std::ostream& out, const AuditReport& report);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& body);

}  // namespace fairgen
