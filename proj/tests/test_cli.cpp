#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fairgen/io.hpp"
#include "fairgen/mock_llm_server.hpp"
#include "fairgen/run_commands.hpp"
#include "fairgen/run_config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

using namespace fairgen;
namespace fs = std::filesystem;

namespace {

fs::path config_dir() { return fs::path(FAIRGEN_CONFIG_DIR); }

fs::path fresh_output_dir(const std::string& tag) {
  static int counter = 0;
  const fs::path dir =
      fs::temp_directory_path() / ("fairgen_cli_" + tag + "_" + std::to_string(counter++) +
                                   "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string strip_runtime_column(const std::string& csv) {
  std::istringstream in(csv);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t cut = line.rfind(',');
    out << line.substr(0, cut) << '\n';
  }
  return out.str();
}

int count_lines(const std::string& text) {
  return static_cast<int>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_CASE("checked-in configs parse") {
  for (const char* name : {"core_audit_default.json", "consensus_default.json",
                           "nash_default.json", "tree_dump_small.json", "remote_mock.json"}) {
    CAPTURE(name);
    CHECK_NOTHROW(load_run_config(config_dir() / name));
  }
}

TEST_CASE("unknown config fields are errors with field paths") {
  nlohmann::json body = run_config_to_json(load_run_config(config_dir() / "nash_default.json"));
  body["env"]["polarisation"] = 1.0;  // misspelled
  CHECK_THROWS_WITH_AS(parse_run_config(body), doctest::Contains("config.env"), ConfigError);
  body["env"].erase("polarisation");
  body["surprise"] = true;
  CHECK_THROWS_WITH_AS(parse_run_config(body), doctest::Contains("surprise"), ConfigError);
}

TEST_CASE("config invariants are enforced") {
  nlohmann::json body = run_config_to_json(load_run_config(config_dir() / "nash_default.json"));
  body["seeds"] = nlohmann::json::array();
  CHECK_THROWS_WITH_AS(parse_run_config(body), doctest::Contains("seeds"), ConfigError);
  body["seeds"] = {1};
  body["issue"] = "mixed";  // remote field in synthetic mode
  CHECK_THROWS_AS(parse_run_config(body), ConfigError);
}

TEST_CASE("config hash is stable across re-serialization") {
  const RunConfig cfg = load_run_config(config_dir() / "core_audit_default.json");
  const RunConfig reparsed = parse_run_config(run_config_to_json(cfg));
  CHECK(config_hash(cfg) == config_hash(reparsed));
}

TEST_CASE("empty rho grid fails core-audit validation") {
  RunConfig cfg = load_run_config(config_dir() / "core_audit_default.json");
  cfg.rho_grid.clear();
  cfg.output_dir = fresh_output_dir("audit_empty");
  CHECK_THROWS_WITH_AS(run_core_audit(cfg), doctest::Contains("rho_grid"), ConfigError);
}

TEST_CASE("thirteen agents trip the enumeration cap") {
  RunConfig cfg = load_run_config(config_dir() / "core_audit_default.json");
  cfg.env.n_agents = 13;
  cfg.output_dir = fresh_output_dir("audit_cap");
  CHECK_THROWS_WITH_AS(run_core_audit(cfg), doctest::Contains("lower the agent count"),
                       ConfigError);
}

TEST_CASE("core-audit emits the documented row count per seed") {
  RunConfig cfg = load_run_config(config_dir() / "core_audit_default.json");
  cfg.rho_grid = {0.8, 1.9, 3.0};
  cfg.seeds = {7};
  cfg.output_dir = fresh_output_dir("audit_rows");
  const RunSummary summary = run_core_audit(cfg);
  const std::string csv = read_text_file(cfg.output_dir / "audit_seed7.csv");
  CHECK(count_lines(csv) == 1 + 3 * 3);  // header + |grid| x 3 policies
  CHECK(fs::exists(cfg.output_dir / "audit_seed7.svg"));
  CHECK(fs::exists(cfg.output_dir / "run_summary.json"));
  CHECK(summary.output_files.size() == 3);
}

TEST_CASE("core-audit reruns are byte-identical up to measured runtimes") {
  RunConfig cfg = load_run_config(config_dir() / "core_audit_default.json");
  cfg.rho_grid = {1.2, 2.4};
  cfg.seeds = {3};
  cfg.output_dir = fresh_output_dir("audit_rerun_a");
  run_core_audit(cfg);
  const std::string first = read_text_file(cfg.output_dir / "audit_seed3.csv");
  cfg.output_dir = fresh_output_dir("audit_rerun_b");
  run_core_audit(cfg);
  const std::string second = read_text_file(cfg.output_dir / "audit_seed3.csv");
  CHECK(strip_runtime_column(first) == strip_runtime_column(second));
}

TEST_CASE("consensus writes one result file per method and seed") {
  RunConfig cfg = load_run_config(config_dir() / "consensus_default.json");
  cfg.seeds = {11};
  cfg.output_dir = fresh_output_dir("consensus");
  run_consensus(cfg);
  for (const char* method : {"beam", "lookahead", "best-of-n", "oracle"})
    CHECK(fs::exists(cfg.output_dir / ("consensus_" + std::string(method) + "_seed11.json")));
  const std::string csv = read_text_file(cfg.output_dir / "consensus_results.csv");
  CHECK(count_lines(csv) == 1 + 4);

  // reruns reproduce the CSV byte for byte
  const RunConfig again = [&] {
    RunConfig c = cfg;
    c.output_dir = fresh_output_dir("consensus_again");
    return c;
  }();
  run_consensus(again);
  CHECK(read_text_file(again.output_dir / "consensus_results.csv") == csv);
}

TEST_CASE("a beam as wide as the leaf set matches the oracle in the CSV") {
  RunConfig cfg = load_run_config(config_dir() / "consensus_default.json");
  cfg.seeds = {5};
  cfg.search.beam_width = 81;
  cfg.methods = {"beam", "oracle"};
  cfg.output_dir = fresh_output_dir("consensus_wide");
  run_consensus(cfg);
  const std::string csv = read_text_file(cfg.output_dir / "consensus_results.csv");
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);  // header
  std::map<std::string, std::string> value_by_method;
  while (std::getline(in, line)) {
    const std::size_t first = line.find(',');
    std::istringstream row(line);
    std::string method;
    std::getline(row, method, ',');
    const std::size_t last = line.rfind(',');
    const std::size_t second_last = line.rfind(',', last - 1);
    value_by_method[method] = line.substr(second_last + 1, last - second_last - 1);
    (void)first;
  }
  REQUIRE(value_by_method.count("beam"));
  REQUIRE(value_by_method.count("oracle"));
  CHECK(value_by_method["beam"] == value_by_method["oracle"]);
}

TEST_CASE("oracle refuses oversized trees through the CLI path") {
  RunConfig cfg = load_run_config(config_dir() / "consensus_default.json");
  cfg.methods = {"oracle"};
  cfg.search.oracle_cap = 10;
  cfg.output_dir = fresh_output_dir("consensus_cap");
  CHECK_THROWS_WITH_AS(run_consensus(cfg), doctest::Contains("oracle cap"),
                       std::invalid_argument);
}

TEST_CASE("nash fixture run reproduces the worked conditionals in the dump") {
  RunConfig cfg = load_run_config(config_dir() / "nash_default.json");
  cfg.output_dir = fresh_output_dir("nash_fixture");
  NashOptions options;
  options.tree_file = config_dir() / "fixtures" / "appb_tree.txt";
  options.lottery_file = config_dir() / "fixtures" / "appb_lottery.csv";
  const RunSummary summary = run_nash(cfg, options);
  const std::string dump = read_text_file(cfg.output_dir / "policy_fixture.txt");
  CHECK(dump.find("0\t0\t" + format_double(0.25 / 0.65)) != std::string::npos);
  CHECK(dump.find("0\t1\t" + format_double(0.40 / 0.65)) != std::string::npos);
  CHECK(summary.details["fixture"]["round_trip_max_error"].get<double>() < 1e-10);
}

TEST_CASE("synthetic nash run solves, audits, and round-trips") {
  RunConfig cfg = load_run_config(config_dir() / "nash_default.json");
  cfg.seeds = {4};
  cfg.output_dir = fresh_output_dir("nash_solve");
  NashOptions options;
  options.audit = true;
  const RunSummary summary = run_nash(cfg, options);
  CHECK(summary.all_converged);
  const auto& seed_details = summary.details["seeds"]["4"];
  CHECK(seed_details["round_trip_max_error"].get<double>() < 1e-10);
  CHECK(seed_details["alpha_star"].get<double>() <= 1.0 + 1e-3);
  const Vec lottery = [&] {
    std::ifstream in(cfg.output_dir / "lottery_seed4.csv");
    return read_lottery_csv(in);
  }();
  CHECK(lottery.size() == 81);
  CHECK(std::abs(lottery.sum() - 1.0) < 1e-9);
}

TEST_CASE("uniform agents produce a uniform nash lottery through the CLI path") {
  RunConfig cfg = load_run_config(config_dir() / "nash_default.json");
  cfg.env.polarization = 0.0;
  cfg.seeds = {2};
  cfg.output_dir = fresh_output_dir("nash_uniform");
  run_nash(cfg);
  std::ifstream in(cfg.output_dir / "lottery_seed2.csv");
  const Vec lottery = read_lottery_csv(in);
  CHECK((lottery.array() - 1.0 / 81.0).abs().maxCoeff() < 1e-4);
}

TEST_CASE("tree dump writes four lexicographic leaves for B=2 L=2") {
  RunConfig cfg = load_run_config(config_dir() / "tree_dump_small.json");
  cfg.output_dir = fresh_output_dir("dump");
  run_tree_dump(cfg);
  CHECK(read_text_file(cfg.output_dir / "tree.txt") == "0\t0\t0\n1\t0\t1\n2\t1\t0\n3\t1\t1\n");

  RunConfig chunked = cfg;
  chunked.tree.chunk_size = 2;
  chunked.output_dir = fresh_output_dir("dump_chunked");
  run_tree_dump(chunked);
  CHECK(read_text_file(chunked.output_dir / "tree.txt") ==
        read_text_file(cfg.output_dir / "tree.txt"));
}

TEST_CASE("remote tree dump matches the mock script") {
  MockLlmServer server;
  RunConfig cfg = load_run_config(config_dir() / "remote_mock.json");
  cfg.remote.endpoint.base_url = server.base_url();
  cfg.output_dir = fresh_output_dir("dump_remote");
  run_tree_dump(cfg);
  const std::string text = read_text_file(cfg.output_dir / "leaves_text.txt");
  CHECK(count_lines(text) > 1);
  // every non-terminal word comes from the mock vocabulary
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const std::string words = line.substr(line.find('\t') + 1);
    if (words.empty()) continue;
    std::istringstream word_in(words);
    std::string word;
    while (word_in >> word) {
      bool known = false;
      for (const std::string& vocab_word : MockLlmServer::vocabulary())
        if (vocab_word == " " + word) known = true;
      CHECK(known);
    }
  }
}

TEST_CASE("remote consensus without a reachable endpoint fails the startup probe") {
  RunConfig cfg = load_run_config(config_dir() / "remote_mock.json");
  cfg.remote.endpoint.base_url = "http://127.0.0.1:9";  // nothing listens here
  cfg.remote.endpoint.retries = 0;
  cfg.remote.endpoint.timeout_s = 0.5;
  cfg.output_dir = fresh_output_dir("remote_down");
  CHECK_THROWS_AS(run_consensus(cfg), RequestError);
}

TEST_CASE("remote consensus and metrics run against the mock server") {
  MockLlmServer server;
  RunConfig cfg = load_run_config(config_dir() / "remote_mock.json");
  cfg.remote.endpoint.base_url = server.base_url();
  cfg.output_dir = fresh_output_dir("remote_consensus");
  const RunSummary summary = run_consensus(cfg);
  CHECK(fs::exists(cfg.output_dir / "consensus_beam_seed1.json"));
  const std::string csv = read_text_file(cfg.output_dir / "consensus_results.csv");
  CHECK(count_lines(csv) == 1 + 4);
  CHECK(csv.find("eppl") != std::string::npos);
  CHECK(summary.details.contains("floored_candidates"));

  // metrics over a statements file
  const fs::path statements = cfg.output_dir / "statements.txt";
  write_text_file(statements, "we should balance growth\nfairness policy\n");
  RunConfig metrics_cfg = cfg;
  metrics_cfg.output_dir = fresh_output_dir("remote_metrics");
  MetricsOptions options;
  options.statements_file = statements;
  run_metrics(metrics_cfg, options);
  const std::string metrics_csv = read_text_file(metrics_cfg.output_dir / "metrics.csv");
  CHECK(count_lines(metrics_csv) == 1 + 2 * 2);  // two statements x two agents
}

TEST_CASE("synthetic metrics cover statements and credit profiles") {
  RunConfig cfg = load_run_config(config_dir() / "nash_default.json");
  cfg.seeds = {6};
  cfg.output_dir = fresh_output_dir("metrics_synth");
  const fs::path statements = cfg.output_dir / "statements.txt";
  write_text_file(statements, "0\t0\t1\t2\t0\n1\t2\t2\t2\t2\n");
  MetricsOptions options;
  options.statements_file = statements;
  options.credit_x1 = "0,1,2,0";
  options.credit_x2 = "0,1,1,0";
  options.credit_user = 1;
  options.credit_reference = 0;
  run_metrics(cfg, options);
  const std::string metrics_csv = read_text_file(cfg.output_dir / "metrics.csv");
  CHECK(count_lines(metrics_csv) == 1 + 2 * 4);  // two statements x four agents
  const std::string credit_csv = read_text_file(cfg.output_dir / "credit_seed6.csv");
  CHECK(count_lines(credit_csv) == 1 + 4);
  CHECK(credit_csv.rfind("position,token,delta_x1,delta_x2,d,z\n", 0) == 0);
}

TEST_CASE("the installed binary runs end to end") {
  const fs::path out = fresh_output_dir("binary");
  const std::string command = std::string(FAIRGEN_CLI_PATH) + " tree-dump --config " +
                              (config_dir() / "tree_dump_small.json").string() + " --output " +
                              out.string() + " > /dev/null 2>&1";
  CHECK(std::system(command.c_str()) == 0);
  CHECK(fs::exists(out / "tree.txt"));
  CHECK(fs::exists(out / "run_summary.json"));

  const std::string bad = std::string(FAIRGEN_CLI_PATH) + " tree-dump --config " +
                          (config_dir() / "does_not_exist.json").string() +
                          " > /dev/null 2>&1";
  CHECK(std::system(bad.c_str()) != 0);
}
