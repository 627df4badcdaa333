#pragma once

#include "fairgen/types.hpp"

#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace fairgen {

// Deterministic OpenAI-compatible completions/chat server for offline runs
// and tests. Behavior is keyed by the request's model name:
//   mock-hash        scores from a hash of (preceding text, token); default
//   mock-uniform     uniform distribution over the vocabulary
//   mock-arith       echoed token i scores -0.1 * (i + 1)
//   mock-pair        next-token top list { " yes": ln .2, " no": ln .2, " maybe": ln .6 }
//   mock-flaky       first two requests return 503, then behaves as mock-hash
//   mock-nologprobs  completions responses omit logprobs entirely
// Chat (brush up): mock-chat-trim drops the statement's last word,
// mock-chat-empty returns "", anything else echoes the statement.
class MockLlmServer {
 public:
  explicit MockLlmServer(int port = 0);  // 0 picks a free port
  ~MockLlmServer();
  MockLlmServer(const MockLlmServer&) = delete;
  MockLlmServer& operator=(const MockLlmServer&) = delete;

  int port() const;
  std::string base_url() const;
  long requests_served() const;

  // Scoring formulas, exposed so tests can compute expected values.
  static const std::vector<std::string>& vocabulary();  // last entry is the eos token
  // (token text, byte offset) pairs; a token is one optional leading space
  // plus a run of non-space bytes.
  static std::vector<std::pair<std::string, std::size_t>> tokenize(const std::string& text);
  static double token_logprob(const std::string& model, const std::string& context,
                              const std::string& token, std::size_t token_index);
  // Distribution over vocabulary() for the next token after `context`.
  static std::vector<double> next_token_distribution(const std::string& model,
                                                     const std::string& context);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace fairgen
