#pragma once

#include "fairgen/policies.hpp"
#include "fairgen/token_tree.hpp"
#include "fairgen/types.hpp"

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fairgen {

// OpenAI-compatible completions endpoint with echoed token log-probabilities.
struct EndpointConfig {
  std::string base_url = "http://127.0.0.1:8080";
  std::string model = "mock-hash";
  std::string api_key_env = "FAIRGEN_API_KEY";  // name of the env var, not the key
  double timeout_s = 30.0;
  int max_concurrency = 4;
  int retries = 2;
  double backoff_s = 0.25;
  int top_logprobs = 32;      // k requested for next-token scoring
  double floor_prob = 1e-10;  // assigned to candidates missing from top-k
  std::string eos_text = "<|eos|>";

  void validate() const;
};

class RequestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CapabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Message {
  std::string role;
  std::string content;
};

// Role-tagged message skeleton with {placeholder} slots. Rendering requires
// a value for every placeholder the skeleton uses.
class PromptTemplate {
 public:
  explicit PromptTemplate(std::vector<Message> skeleton);

  std::vector<Message> render(const std::map<std::string, std::string>& values) const;
  // Flat completions-scoring form: "[Role] content" lines; the last message's
  // content ends the string so a continuation can be appended directly.
  std::string render_text(const std::map<std::string, std::string>& values) const;
  const std::vector<std::string>& placeholders() const { return placeholders_; }

  static const PromptTemplate& reference_policy();  // consensus over all opinions
  static const PromptTemplate& agent_policy();      // single-opinion statement
  static const PromptTemplate& brush_up();          // fix only the ending
  static const PromptTemplate& paraphrase();        // scoring prompt

 private:
  std::vector<Message> skeleton_;
  std::vector<std::string> placeholders_;
};

// --- Stateless endpoint operations -------------------------------------------

// log p(a_k | prompt, a_1..k-1) for every token of `continuation`, via the
// endpoint's echo-with-logprobs scoring mode. Empty continuation returns an
// empty list without a request.
std::vector<double> completion_logprobs(const EndpointConfig& cfg, const std::string& prompt,
                                        const std::string& continuation);

// Length-normalized mean of completion_logprobs.
double score_statement(const EndpointConfig& cfg, const std::string& prompt,
                       const std::string& continuation);

// Top-k next-token candidates after `prompt`, by log-probability descending
// (ties by token text).
std::vector<std::pair<std::string, double>> next_token_logprobs(const EndpointConfig& cfg,
                                                                const std::string& prompt);

// Verifies the endpoint supports echoed logprobs; throws CapabilityError.
void probe_endpoint(const EndpointConfig& cfg);

// Single chat completion with the brush-up template; returns the model text
// verbatim. Callers keep the original statement when this throws.
std::string brush_up(const EndpointConfig& cfg, const std::string& statement);

// --- Session: proposer + per-opinion policies over one shared vocabulary -----

class TokenVocab {
 public:
  Token intern(const std::string& text);
  const std::string& text(Token token) const;
  std::optional<Token> find(const std::string& text) const;
  Index size() const { return static_cast<Index>(texts_.size()); }

 private:
  std::vector<std::string> texts_;
  std::map<std::string, Token> ids_;
};

enum class PplPrompt { agent, paraphrase };

// Wires the reference proposer and the per-opinion agent policies to one
// endpoint, vocabulary, and response cache. Candidate sets are the reference
// model's top-B next tokens with the terminal token always included; agent
// distributions are the endpoint's next-token distribution restricted and
// renormalized to that candidate set.
class RemoteSession {
 public:
  RemoteSession(EndpointConfig cfg, std::string issue, std::vector<std::string> opinions,
                int top_b, int max_tokens);

  const EndpointConfig& config() const;
  int opinion_count() const;
  int max_tokens() const;

  void probe() const;  // startup capability check

  std::shared_ptr<const ActionProposer> reference_proposer() const;
  std::shared_ptr<const AgentPolicy> agent_policy(int opinion) const;
  // Restricted-and-renormalized next-token policy under the reference prompt;
  // the sampling baseline for best-of-n.
  std::shared_ptr<const AgentPolicy> reference_policy() const;

  Token eos_token() const;
  const TokenVocab& vocab() const;
  std::string detokenize(const TokenSeq& path) const;  // drops eos, trims lead space

  // Length-normalized log score / perplexity of a statement under agent
  // `opinion`'s prompt (echo scoring; template per `which`).
  double statement_score(int opinion, const std::string& statement,
                         PplPrompt which = PplPrompt::agent) const;
  double statement_ppl(int opinion, const std::string& statement,
                       PplPrompt which = PplPrompt::agent) const;

  long floored_candidates() const;  // candidates missing from top-k so far

  struct State;

 private:
  std::shared_ptr<State> state_;
};

}  // namespace fairgen
