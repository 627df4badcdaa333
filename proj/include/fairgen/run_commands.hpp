#pragma once

#include "fairgen/run_config.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace fairgen {

struct NashOptions {
  std::optional<std::filesystem::path> tree_file;     // fixture mode: leaf dump
  std::optional<std::filesystem::path> lottery_file;  // fixture mode: lottery CSV
  bool audit = false;                                 // blocking audit on the result
};

struct MetricsOptions {
  std::optional<std::filesystem::path> statements_file;  // leaf dump (synthetic) or text lines
  // Credit profile for a pair of statements (synthetic mode): comma-separated
  // token lists plus the user/reference agent indices.
  std::optional<std::string> credit_x1;
  std::optional<std::string> credit_x2;
  int credit_user = 1;
  int credit_reference = 0;
};

// Each command writes its artifacts plus run_summary.json into the config's
// output directory and returns the summary.
RunSummary run_core_audit(const RunConfig& cfg);
RunSummary run_consensus(const RunConfig& cfg);
RunSummary run_nash(const RunConfig& cfg, const NashOptions& options = {});
RunSummary run_tree_dump(const RunConfig& cfg);
RunSummary run_metrics(const RunConfig& cfg, const MetricsOptions& options = {});

}  // namespace fairgen
