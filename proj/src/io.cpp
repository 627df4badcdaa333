#include "fairgen/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace fairgen {

std::string format_double(double value) {
  char buffer[64];
  const auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
  return std::string(buffer, end);
}

void write_lottery_csv(std::ostream& out, const Vec& lottery) {
  out << "leaf_index,weight\n";
  for (Index j = 0; j < lottery.size(); ++j)
    out << j << ',' << format_double(lottery[j]) << '\n';
}

Vec read_lottery_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("leaf_index,weight", 0) != 0)
    throw std::runtime_error("lottery CSV: missing header");
  std::vector<double> weights;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::size_t comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error("lottery CSV: malformed row");
    const long long index = std::stoll(line.substr(0, comma));
    if (index != static_cast<long long>(weights.size()))
      throw std::runtime_error("lottery CSV: leaf indices out of order");
    weights.push_back(std::stod(line.substr(comma + 1)));
  }
  if (weights.empty()) throw std::runtime_error("lottery CSV: no rows");
  Vec out(static_cast<Index>(weights.size()));
  for (std::size_t j = 0; j < weights.size(); ++j) out[static_cast<Index>(j)] = weights[j];
  return out;
}

void write_utility_csv(std::ostream& out, const UtilityMatrix& utilities) {
  out << "agent";
  for (Index j = 0; j < utilities.leaves(); ++j) out << ',' << j;
  out << '\n';
  for (Index i = 0; i < utilities.agents(); ++i) {
    out << (static_cast<std::size_t>(i) < utilities.agent_ids.size()
                ? utilities.agent_ids[static_cast<std::size_t>(i)]
                : "agent_" + std::to_string(i));
    for (Index j = 0; j < utilities.leaves(); ++j)
      out << ',' << format_double(utilities.values(i, j));
    out << '\n';
  }
}

void write_audit_csv(std::ostream& out, const AuditReport& report) {
  out << "rho,policy,alpha_star,witness_coalition,runtime_ms\n";
  for (const AuditRow& row : report.rows)
    out << format_double(row.rho) << ',' << row.policy << ',' << format_double(row.alpha_star)
        << ',' << row.witness_coalition << ',' << format_double(row.runtime_ms) << '\n';
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
  out << "method,scenario,seed,agent_id,ppl,eppl\n";
  for (const MetricsRow& row : rows)
    out << row.method << ',' << row.scenario << ',' << row.seed << ',' << row.agent_id << ','
        << format_double(row.ppl) << ',' << format_double(row.eppl) << '\n';
}

void write_credit_csv(std::ostream& out, const std::vector<CreditRow>& rows) {
  out << "position,token,delta_x1,delta_x2,d,z\n";
  for (const CreditRow& row : rows)
    out << row.position << ',' << row.token << ',' << format_double(row.delta_x1) << ','
        << format_double(row.delta_x2) << ',' << format_double(row.d) << ','
        << format_double(row.z) << '\n';
}

void write_policy_dump(std::ostream& out, const TokenTree& tree, const InducedPolicy& policy) {
  if (static_cast<Index>(policy.action_probs.size()) != tree.node_count())
    throw std::invalid_argument("write_policy_dump: policy/tree mismatch");
  for (Index id = 0; id < tree.node_count(); ++id) {
    const TokenTree::Node& node = tree.node(id);
    for (std::size_t c = 0; c < node.children.size(); ++c) {
      const TokenTree::Node& child = tree.node(node.children[c]);
      out << format_prefix(node.prefix) << '\t' << format_prefix(child.action) << '\t'
          << format_double(
                 policy.action_probs[static_cast<std::size_t>(id)][static_cast<Index>(c)])
          << '\n';
    }
  }
}

namespace {

constexpr double kSvgWidth = 640.0;
constexpr double kSvgHeight = 400.0;
constexpr double kMarginLeft = 64.0;
constexpr double kMarginRight = 150.0;
constexpr double kMarginTop = 24.0;
constexpr double kMarginBottom = 48.0;

std::string svg_num(double v) {
  std::ostringstream out;
  out.precision(2);
  out << std::fixed << v;
  return out.str();
}

}  // namespace

void write_audit_svg(std::ostream& out, const AuditReport& report) {
  if (report.rows.empty()) throw std::invalid_argument("write_audit_svg: empty report");

  std::map<std::string, std::vector<std::pair<double, double>>> series;
  double rho_min = kPosInf, rho_max = kNegInf, log_max = 0.0;
  for (const AuditRow& row : report.rows) {
    series[row.policy].emplace_back(row.rho, row.alpha_star);
    rho_min = std::min(rho_min, row.rho);
    rho_max = std::max(rho_max, row.rho);
    log_max = std::max(log_max, std::log10(std::max(row.alpha_star, 1.0)));
  }
  const double log_top = std::max(1.0, std::ceil(log_max));
  if (rho_max <= rho_min) rho_max = rho_min + 1.0;

  const double plot_w = kSvgWidth - kMarginLeft - kMarginRight;
  const double plot_h = kSvgHeight - kMarginTop - kMarginBottom;
  auto x_of = [&](double rho) {
    return kMarginLeft + plot_w * (rho - rho_min) / (rho_max - rho_min);
  };
  auto y_of = [&](double alpha) {
    const double lg = std::log10(std::max(alpha, 1e-3));
    return kMarginTop + plot_h * (1.0 - lg / log_top);
  };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSvgWidth << "\" height=\""
      << kSvgHeight << "\" viewBox=\"0 0 " << kSvgWidth << ' ' << kSvgHeight << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // Axes and decade ticks.
  out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kMarginTop << "\" x2=\"" << kMarginLeft
      << "\" y2=\"" << kMarginTop + plot_h << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kMarginTop + plot_h << "\" x2=\""
      << kMarginLeft + plot_w << "\" y2=\"" << kMarginTop + plot_h
      << "\" stroke=\"black\"/>\n";
  for (int decade = 0; decade <= static_cast<int>(log_top); ++decade) {
    const double y = kMarginTop + plot_h * (1.0 - decade / log_top);
    out << "<line x1=\"" << kMarginLeft - 4 << "\" y1=\"" << svg_num(y) << "\" x2=\""
        << kMarginLeft << "\" y2=\"" << svg_num(y) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << kMarginLeft - 8 << "\" y=\"" << svg_num(y + 4)
        << "\" text-anchor=\"end\" font-size=\"12\">1e" << decade << "</text>\n";
  }
  const int x_ticks = 5;
  for (int i = 0; i <= x_ticks; ++i) {
    const double rho = rho_min + (rho_max - rho_min) * i / x_ticks;
    const double x = x_of(rho);
    out << "<line x1=\"" << svg_num(x) << "\" y1=\"" << kMarginTop + plot_h << "\" x2=\""
        << svg_num(x) << "\" y2=\"" << kMarginTop + plot_h + 4 << "\" stroke=\"black\"/>\n";
    std::ostringstream label;
    label.precision(2);
    label << std::fixed << rho;
    out << "<text x=\"" << svg_num(x) << "\" y=\"" << kMarginTop + plot_h + 18
        << "\" text-anchor=\"middle\" font-size=\"12\">" << label.str() << "</text>\n";
  }
  out << "<text x=\"" << kMarginLeft + plot_w / 2 << "\" y=\"" << kSvgHeight - 8
      << "\" text-anchor=\"middle\" font-size=\"13\">polarization rho</text>\n";
  out << "<text x=\"16\" y=\"" << kMarginTop + plot_h / 2
      << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 "
      << kMarginTop + plot_h / 2 << ")\">max coalition improvement</text>\n";

  const std::map<std::string, std::string> colors = {
      {"nash", "#1f77b4"}, {"uniform", "#9467bd"}, {"utilitarian", "#ff7f0e"}};
  double legend_y = kMarginTop + 12;
  for (const auto& [label, points] : series) {
    const auto color_it = colors.find(label);
    const std::string color = color_it == colors.end() ? "#333333" : color_it->second;
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& [rho, alpha] : points)
      out << svg_num(x_of(rho)) << ',' << svg_num(y_of(alpha)) << ' ';
    out << "\"/>\n";
    const double lx = kMarginLeft + plot_w + 12;
    out << "<line x1=\"" << lx << "\" y1=\"" << svg_num(legend_y) << "\" x2=\"" << lx + 22
        << "\" y2=\"" << svg_num(legend_y) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << lx + 28 << "\" y=\"" << svg_num(legend_y + 4)
        << "\" font-size=\"12\">" << label << "</text>\n";
    legend_y += 18;
  }
  out << "</svg>\n";
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << body;
}

}  // namespace fairgen
