#include "fairgen/egal_search.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fairgen {

void SearchConfig::validate() const {
  if (lookahead_depth < 1)
    throw std::invalid_argument("SearchConfig: lookahead_depth must be >= 1");
  if (beam_width < 1) throw std::invalid_argument("SearchConfig: beam_width must be >= 1");
  if (branching < 1) throw std::invalid_argument("SearchConfig: branching must be >= 1");
  if (max_len < 1) throw std::invalid_argument("SearchConfig: max_len must be >= 1");
  if (n_samples < 1) throw std::invalid_argument("SearchConfig: n_samples must be >= 1");
  if (!(beta > 0)) throw std::invalid_argument("SearchConfig: beta must be positive");
  if (oracle_cap < 1) throw std::invalid_argument("SearchConfig: oracle_cap must be >= 1");
}

namespace {

struct PathState {
  TokenSeq path;
  Vec agent_logs;  // beta-scaled cumulative log utilities
  int zero_steps = 0;

  double score() const { return zero_steps > 0 ? kNegInf : agent_logs.minCoeff(); }
};

PathState make_root(std::size_t agents) {
  PathState s;
  s.agent_logs = Vec::Zero(static_cast<Index>(agents));
  return s;
}

PathState extend(const PathState& state, const TokenSeq& action, const AgentList& agents,
                 double beta) {
  PathState out = state;
  TokenSeq prefix = state.path;
  for (Token t : action) {
    for (std::size_t i = 0; i < agents.size(); ++i) {
      const double p = step_prob(*agents[i], prefix, t);
      if (p <= 0.0) {
        out.agent_logs[static_cast<Index>(i)] = kNegInf;
        ++out.zero_steps;
      } else if (out.agent_logs[static_cast<Index>(i)] != kNegInf) {
        out.agent_logs[static_cast<Index>(i)] += beta * std::log(p);
      }
    }
    prefix.push_back(t);
  }
  out.path = std::move(prefix);
  return out;
}

// Ranking used everywhere: finite scores first (higher better), then paths
// with fewer zero-probability steps, then lexicographic action order.
bool ranked_above(const PathState& a, const PathState& b) {
  const bool a_finite = a.zero_steps == 0;
  const bool b_finite = b.zero_steps == 0;
  if (a_finite != b_finite) return a_finite;
  if (!a_finite && a.zero_steps != b.zero_steps) return a.zero_steps < b.zero_steps;
  if (a_finite && a.score() != b.score()) return a.score() > b.score();
  return a.path < b.path;
}

bool terminal_state(const ActionProposer& proposer, const SearchConfig& cfg,
                    const TokenSeq& path) {
  if (static_cast<int>(path.size()) >= cfg.max_len) return true;
  if (cfg.terminal_action && !path.empty() && path.back() == *cfg.terminal_action) return true;
  return proposer.terminal(path);
}

SearchResult finish(PathState state, std::string method, long expanded) {
  SearchResult out;
  out.ew_log = state.score();
  out.per_agent_log_utilities = std::move(state.agent_logs);
  out.path = std::move(state.path);
  out.zero_prob_steps = state.zero_steps;
  out.method = std::move(method);
  out.expanded_nodes = expanded;
  return out;
}

}  // namespace

double egalitarian_welfare(const AgentList& agents, const TokenSeq& path, double beta) {
  if (agents.empty()) throw std::invalid_argument("egalitarian_welfare: no agents");
  RewardConfig reward{beta};
  double worst = kPosInf;
  for (const auto& agent : agents)
    worst = std::min(worst, path_log_utility(*agent, path, reward));
  return worst;
}

SearchResult exhaustive_egal_argmax(const TokenTree& tree, const AgentList& agents,
                                    const SearchConfig& cfg) {
  cfg.validate();
  if (agents.empty()) throw std::invalid_argument("exhaustive_egal_argmax: no agents");
  if (tree.leaf_count() > cfg.oracle_cap)
    throw std::invalid_argument("exhaustive_egal_argmax: " +
                                std::to_string(tree.leaf_count()) +
                                " leaves exceed the oracle cap of " +
                                std::to_string(cfg.oracle_cap));

  PathState best;
  bool have_best = false;
  long expanded = 0;

  // Depth-first accumulation; leaves are visited in leaf-index order, so
  // keeping strict improvements breaks ties toward the lowest leaf index.
  std::vector<std::pair<Index, PathState>> stack;
  stack.emplace_back(tree.root(), make_root(agents.size()));
  while (!stack.empty()) {
    auto [id, state] = std::move(stack.back());
    stack.pop_back();
    ++expanded;
    const TokenTree::Node& node = tree.node(id);
    if (node.leaf_index >= 0) {
      if (!have_best || ranked_above(state, best)) {
        best = std::move(state);
        have_best = true;
      }
      continue;
    }
    for (std::size_t c = node.children.size(); c-- > 0;) {
      const TokenTree::Node& child = tree.node(node.children[c]);
      stack.emplace_back(node.children[c], extend(state, child.action, agents, cfg.beta));
    }
  }
  if (!have_best) throw std::logic_error("exhaustive_egal_argmax: tree has no leaves");
  return finish(std::move(best), "oracle", expanded);
}

SearchResult finite_lookahead(const ActionProposer& proposer, const AgentList& agents,
                              const SearchConfig& cfg) {
  cfg.validate();
  if (agents.empty()) throw std::invalid_argument("finite_lookahead: no agents");

  PathState state = make_root(agents.size());
  long expanded = 0;

  while (!terminal_state(proposer, cfg, state.path)) {
    // Frontier of action sequences up to depth d from the current state.
    struct Candidate {
      PathState state;
      TokenSeq first_action;
    };
    std::optional<Candidate> best;

    struct Frame {
      PathState state;
      TokenSeq first_action;
      int depth;
    };
    std::vector<Frame> stack;
    stack.push_back({state, {}, 0});
    while (!stack.empty()) {
      Frame frame = std::move(stack.back());
      stack.pop_back();
      const bool at_horizon = frame.depth >= cfg.lookahead_depth ||
                              terminal_state(proposer, cfg, frame.state.path);
      if (at_horizon) {
        if (frame.depth == 0) break;  // current state is terminal
        if (!best || ranked_above(frame.state, best->state))
          best = Candidate{std::move(frame.state), std::move(frame.first_action)};
        continue;
      }
      ++expanded;
      std::vector<TokenSeq> actions;
      try {
        actions = proposer.propose(frame.state.path);
      } catch (const std::exception& e) {
        throw std::runtime_error("finite_lookahead: proposer failed at prefix " +
                                 format_prefix(frame.state.path) + ": " + e.what());
      }
      if (actions.empty())
        throw std::runtime_error("finite_lookahead: no candidate actions at prefix " +
                                 format_prefix(frame.state.path));
      for (std::size_t c = actions.size(); c-- > 0;) {
        Frame next;
        next.state = extend(frame.state, actions[c], agents, cfg.beta);
        next.first_action = frame.depth == 0 ? actions[c] : frame.first_action;
        next.depth = frame.depth + 1;
        stack.push_back(std::move(next));
      }
    }
    if (!best) break;
    state = extend(state, best->first_action, agents, cfg.beta);
  }
  return finish(std::move(state), "lookahead", expanded);
}

SearchResult beam_search(const ActionProposer& proposer, const AgentList& agents,
                         const SearchConfig& cfg) {
  cfg.validate();
  if (agents.empty()) throw std::invalid_argument("beam_search: no agents");

  std::vector<PathState> beam{make_root(agents.size())};
  long expanded = 0;

  for (int step = 0; step < cfg.max_len; ++step) {
    bool all_terminal = true;
    std::vector<PathState> candidates;
    for (PathState& entry : beam) {
      if (terminal_state(proposer, cfg, entry.path)) {
        candidates.push_back(std::move(entry));
        continue;
      }
      all_terminal = false;
      ++expanded;
      std::vector<TokenSeq> actions;
      try {
        actions = proposer.propose(entry.path);
      } catch (const std::exception& e) {
        throw std::runtime_error("beam_search: proposer failed at prefix " +
                                 format_prefix(entry.path) + ": " + e.what());
      }
      if (actions.empty())
        throw std::runtime_error("beam_search: no candidate actions at prefix " +
                                 format_prefix(entry.path));
      for (const TokenSeq& action : actions)
        candidates.push_back(extend(entry, action, agents, cfg.beta));
    }
    if (all_terminal) {
      beam = std::move(candidates);
      break;
    }
    std::sort(candidates.begin(), candidates.end(), ranked_above);
    if (static_cast<int>(candidates.size()) > cfg.beam_width)
      candidates.resize(static_cast<std::size_t>(cfg.beam_width));
    beam = std::move(candidates);
  }

  const PathState* best = nullptr;
  for (const PathState& entry : beam) {
    if (!terminal_state(proposer, cfg, entry.path)) continue;
    if (!best || ranked_above(entry, *best)) best = &entry;
  }
  if (!best) throw std::logic_error("beam_search: no complete path in the final beam");
  return finish(*best, "beam", expanded);
}

SearchResult best_of_n(const AgentPolicy& reference, const AgentList& agents,
                       const SearchConfig& cfg, std::mt19937_64& rng,
                       const std::function<double(const TokenSeq&)>& score) {
  cfg.validate();
  if (agents.empty()) throw std::invalid_argument("best_of_n: no agents");

  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::optional<PathState> best;
  double best_override = kNegInf;
  long expanded = 0;

  for (int sample = 0; sample < cfg.n_samples; ++sample) {
    PathState state = make_root(agents.size());
    while (static_cast<int>(state.path.size()) < cfg.max_len) {
      if (cfg.terminal_action && !state.path.empty() &&
          state.path.back() == *cfg.terminal_action)
        break;
      const std::vector<Token> tokens = reference.enabled_tokens(state.path);
      if (tokens.empty()) break;
      const Vec dist = reference.action_distribution(state.path);
      ++expanded;
      const double u = uniform(rng);
      double acc = 0.0;
      std::size_t chosen = tokens.size() - 1;
      for (std::size_t c = 0; c < tokens.size(); ++c) {
        acc += dist[static_cast<Index>(c)];
        if (u < acc) {
          chosen = c;
          break;
        }
      }
      state = extend(state, {tokens[chosen]}, agents, cfg.beta);
    }

    if (score) {
      const double value = score(state.path);
      if (!best || value > best_override ||
          (value == best_override && state.path < best->path)) {
        best = std::move(state);
        best_override = value;
      }
    } else if (!best || ranked_above(state, *best)) {
      best = std::move(state);
    }
  }
  SearchResult out = finish(std::move(*best), "best-of-n", expanded);
  return out;
}

}  // namespace fairgen
