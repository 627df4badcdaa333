#include "fairgen/llm_client.hpp"

#include "fairgen/hashing.hpp"

#include "httplib.h"
#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <set>
#include <thread>

namespace fairgen {

using nlohmann::json;

void EndpointConfig::validate() const {
  if (base_url.empty()) throw std::invalid_argument("EndpointConfig: base_url is empty");
  if (model.empty()) throw std::invalid_argument("EndpointConfig: model is empty");
  if (!(timeout_s > 0)) throw std::invalid_argument("EndpointConfig: timeout must be positive");
  if (max_concurrency < 1)
    throw std::invalid_argument("EndpointConfig: max_concurrency must be >= 1");
  if (retries < 0) throw std::invalid_argument("EndpointConfig: retries must be >= 0");
  if (top_logprobs < 1) throw std::invalid_argument("EndpointConfig: top_logprobs must be >= 1");
  if (!(floor_prob > 0) || floor_prob >= 1)
    throw std::invalid_argument("EndpointConfig: floor_prob must be in (0, 1)");
}

// --- PromptTemplate -----------------------------------------------------------

namespace {

std::vector<std::string> scan_placeholders(const std::vector<Message>& skeleton) {
  std::set<std::string> found;
  for (const Message& message : skeleton) {
    const std::string& text = message.content;
    std::size_t pos = 0;
    while ((pos = text.find('{', pos)) != std::string::npos) {
      const std::size_t end = text.find('}', pos + 1);
      if (end == std::string::npos) break;
      const std::string name = text.substr(pos + 1, end - pos - 1);
      if (!name.empty() && name.find_first_of("{} \n") == std::string::npos)
        found.insert(name);
      pos = end + 1;
    }
  }
  return {found.begin(), found.end()};
}

std::string replace_all(std::string text, const std::string& needle,
                        const std::string& value) {
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    text.replace(pos, needle.size(), value);
    pos += value.size();
  }
  return text;
}

std::string role_tag(const std::string& role) {
  std::string tag = role;
  if (!tag.empty()) tag[0] = static_cast<char>(std::toupper(tag[0]));
  return "[" + tag + "]";
}

}  // namespace

PromptTemplate::PromptTemplate(std::vector<Message> skeleton) : skeleton_(std::move(skeleton)) {
  placeholders_ = scan_placeholders(skeleton_);
}

std::vector<Message> PromptTemplate::render(
    const std::map<std::string, std::string>& values) const {
  for (const std::string& name : placeholders_)
    if (!values.count(name))
      throw std::invalid_argument("PromptTemplate: missing value for placeholder {" + name +
                                  "}");
  std::vector<Message> out = skeleton_;
  for (Message& message : out)
    for (const auto& [name, value] : values)
      message.content = replace_all(message.content, "{" + name + "}", value);
  return out;
}

std::string PromptTemplate::render_text(const std::map<std::string, std::string>& values) const {
  const std::vector<Message> messages = render(values);
  std::string out;
  for (std::size_t i = 0; i < messages.size(); ++i) {
    if (i > 0) out += '\n';
    out += role_tag(messages[i].role) + " " + messages[i].content;
  }
  return out;
}

const PromptTemplate& PromptTemplate::reference_policy() {
  static const PromptTemplate t({
      {"system",
       "You are generating a consensus statement that represents the views of multiple "
       "participants.\n\nYour task is to continue the statement in a way that addresses the "
       "issue and considers all participants' opinions. Be concise and keep the statement "
       "short (less than 50 tokens) and focused. ONLY WRITE THE STATEMENT AND NOTHING ELSE."},
      {"user", "Issue:\n{issue}\n\nParticipants' opinions:\n{opinion}\n\nConsensus statement:"},
      {"assistant", ""},
  });
  return t;
}

const PromptTemplate& PromptTemplate::agent_policy() {
  static const PromptTemplate t({
      {"system",
       "You are generating a statement that represents the views of a single participant.\n\n"
       "Your task is to continue the statement in a way that addresses the issue and "
       "considers ONLY this participant's opinion. Be concise and keep the statement short "
       "(less than 50 tokens) and focused. ONLY WRITE THE STATEMENT AND NOTHING ELSE."},
      {"user",
       "Issue:\n{issue}\n\nParticipant's opinion:\n{opinion}\n\nStatement reflecting ONLY "
       "this participant's opinion:"},
      {"assistant", ""},
  });
  return t;
}

const PromptTemplate& PromptTemplate::brush_up() {
  static const PromptTemplate t({
      {"user",
       "You are helping to fix ONLY the ending of a generated statement.\n\nVERY IMPORTANT: "
       "If the statement ending is already complete and well-formed, DO NOT modify it at "
       "all.\n\nYour task is to:\n1. DO NOT change any part of the statement except the last "
       "few sentences if they have issues\n2. Look for and fix ONLY these issues at the end "
       "of the statement:\n   - Remove repetition in the final sentences\n   - Complete any "
       "unfinished final sentence that can be completed easily\n   - Remove any incomplete "
       "final sentence that cannot be meaningfully finished\n3. Keep the changes minimal and "
       "focused only on the ending\n4. DO NOT add any new information or opinions\n5. DO NOT "
       "modify anything except problematic sentences at the end\n6. If the statement is "
       "already complete and well-formed, return it EXACTLY as provided\n\nHere is the "
       "statement:\n\n{statement}"},
  });
  return t;
}

const PromptTemplate& PromptTemplate::paraphrase() {
  static const PromptTemplate t({
      {"system", "You paraphrase people's views."},
      {"user", "Topic: {issue}\nOriginal opinion: {opinion}"},
      {"assistant", "Paraphrase:"},
  });
  return t;
}

// --- HTTP plumbing ------------------------------------------------------------

namespace {

json post_json(const EndpointConfig& cfg, const std::string& path, const json& body) {
  cfg.validate();
  httplib::Client client(cfg.base_url);
  client.set_connection_timeout(std::chrono::duration<double>(cfg.timeout_s));
  client.set_read_timeout(std::chrono::duration<double>(cfg.timeout_s));
  client.set_write_timeout(std::chrono::duration<double>(cfg.timeout_s));

  httplib::Headers headers;
  if (const char* key = std::getenv(cfg.api_key_env.c_str()); key && *key)
    headers.emplace("Authorization", std::string("Bearer ") + key);

  const std::string payload = body.dump();
  std::string last_error;
  for (int attempt = 0; attempt <= cfg.retries; ++attempt) {
    if (attempt > 0)
      std::this_thread::sleep_for(std::chrono::duration<double>(
          cfg.backoff_s * static_cast<double>(1 << (attempt - 1))));
    httplib::Result res = client.Post(path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;  // retry
    }
    if (res->status >= 500) {
      last_error = "server returned status " + std::to_string(res->status);
      continue;  // retry
    }
    if (res->status != 200)
      throw RequestError("endpoint " + path + " returned status " +
                         std::to_string(res->status) + ": " + res->body);
    try {
      return json::parse(res->body);
    } catch (const json::exception& e) {
      throw RequestError(std::string("endpoint returned malformed JSON: ") + e.what());
    }
  }
  throw RequestError("endpoint " + path + " failed after " + std::to_string(cfg.retries + 1) +
                     " attempts: " + last_error);
}

const json& first_choice(const json& response) {
  if (!response.contains("choices") || !response["choices"].is_array() ||
      response["choices"].empty())
    throw RequestError("endpoint response has no choices");
  return response["choices"][0];
}

}  // namespace

std::vector<double> completion_logprobs(const EndpointConfig& cfg, const std::string& prompt,
                                        const std::string& continuation) {
  if (continuation.empty()) return {};
  const json body = {{"model", cfg.model},
                     {"prompt", prompt + continuation},
                     {"max_tokens", 0},
                     {"echo", true},
                     {"logprobs", cfg.top_logprobs}};
  const json response = post_json(cfg, "/v1/completions", body);
  const json& choice = first_choice(response);
  if (!choice.contains("logprobs") || choice["logprobs"].is_null())
    throw CapabilityError("endpoint does not return echoed logprobs");
  const json& lp = choice["logprobs"];
  if (!lp.contains("token_logprobs") || !lp.contains("text_offset"))
    throw CapabilityError("endpoint logprobs lack token_logprobs/text_offset");
  const json& values = lp["token_logprobs"];
  const json& offsets = lp["text_offset"];
  if (values.size() != offsets.size())
    throw RequestError("endpoint logprobs arrays disagree in length");

  std::vector<double> out;
  bool first = true;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t offset = offsets[i].get<std::size_t>();
    if (offset < prompt.size()) continue;
    if (first && offset != prompt.size())
      throw RequestError("continuation does not start on a token boundary");
    first = false;
    if (values[i].is_null())
      throw RequestError("endpoint returned a null logprob inside the continuation");
    out.push_back(values[i].get<double>());
  }
  if (out.empty()) throw RequestError("endpoint returned no tokens for the continuation");
  return out;
}

double score_statement(const EndpointConfig& cfg, const std::string& prompt,
                       const std::string& continuation) {
  const std::vector<double> logprobs = completion_logprobs(cfg, prompt, continuation);
  if (logprobs.empty()) throw std::invalid_argument("score_statement: empty continuation");
  double total = 0.0;
  for (double lp : logprobs) total += lp;
  return total / static_cast<double>(logprobs.size());
}

std::vector<std::pair<std::string, double>> next_token_logprobs(const EndpointConfig& cfg,
                                                                const std::string& prompt) {
  const json body = {{"model", cfg.model},
                     {"prompt", prompt},
                     {"max_tokens", 1},
                     {"temperature", 0},
                     {"logprobs", cfg.top_logprobs}};
  const json response = post_json(cfg, "/v1/completions", body);
  const json& choice = first_choice(response);
  if (!choice.contains("logprobs") || choice["logprobs"].is_null() ||
      !choice["logprobs"].contains("top_logprobs") ||
      choice["logprobs"]["top_logprobs"].empty())
    throw CapabilityError("endpoint does not return next-token top logprobs");
  const json& top = choice["logprobs"]["top_logprobs"][0];

  std::vector<std::pair<std::string, double>> out;
  out.reserve(top.size());
  for (auto it = top.begin(); it != top.end(); ++it)
    out.emplace_back(it.key(), it.value().get<double>());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return out;
}

void probe_endpoint(const EndpointConfig& cfg) {
  try {
    completion_logprobs(cfg, "capability", " probe");
  } catch (const CapabilityError&) {
    throw;
  } catch (const RequestError& e) {
    throw RequestError(std::string("endpoint probe failed: ") + e.what());
  }
}

std::string brush_up(const EndpointConfig& cfg, const std::string& statement) {
  if (statement.empty()) throw std::invalid_argument("brush_up: empty statement");
  const std::vector<Message> messages =
      PromptTemplate::brush_up().render({{"statement", statement}});
  json message_array = json::array();
  for (const Message& message : messages)
    message_array.push_back({{"role", message.role}, {"content", message.content}});
  const json body = {{"model", cfg.model},
                     {"messages", message_array},
                     {"logprobs", false},
                     {"top_logprobs", 0}};
  const json response = post_json(cfg, "/v1/chat/completions", body);
  const json& choice = first_choice(response);
  if (!choice.contains("message") || !choice["message"].contains("content"))
    throw RequestError("chat response has no message content");
  const std::string content = choice["message"]["content"].get<std::string>();
  if (content.empty()) throw RequestError("brush_up: endpoint returned an empty statement");
  return content;
}

// --- TokenVocab ---------------------------------------------------------------

Token TokenVocab::intern(const std::string& text) {
  auto it = ids_.find(text);
  if (it != ids_.end()) return it->second;
  const Token id = static_cast<Token>(texts_.size());
  texts_.push_back(text);
  ids_.emplace(text, id);
  return id;
}

const std::string& TokenVocab::text(Token token) const {
  if (token < 0 || static_cast<std::size_t>(token) >= texts_.size())
    throw std::out_of_range("TokenVocab: unknown token id");
  return texts_[static_cast<std::size_t>(token)];
}

std::optional<Token> TokenVocab::find(const std::string& text) const {
  auto it = ids_.find(text);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

// --- RemoteSession --------------------------------------------------------------

namespace {

class Semaphore {
 public:
  explicit Semaphore(int slots) : slots_(slots) {}
  void acquire() {
    std::unique_lock lock(mutex_);
    ready_.wait(lock, [&] { return slots_ > 0; });
    --slots_;
  }
  void release() {
    {
      std::lock_guard lock(mutex_);
      ++slots_;
    }
    ready_.notify_one();
  }

 private:
  std::mutex mutex_;
  std::condition_variable ready_;
  int slots_;
};

struct SemaphoreGuard {
  explicit SemaphoreGuard(Semaphore& s) : sem(s) { sem.acquire(); }
  ~SemaphoreGuard() { sem.release(); }
  Semaphore& sem;
};

}  // namespace

struct RemoteSession::State {
  EndpointConfig cfg;
  std::string issue;
  std::vector<std::string> opinions;
  int top_b = 2;
  int max_tokens = 16;

  std::string reference_prompt;
  std::vector<std::string> agent_prompts;

  mutable std::mutex mutex;
  mutable TokenVocab vocab;
  Token eos = 0;
  mutable std::map<TokenSeq, std::vector<Token>> candidate_cache;
  mutable std::map<std::pair<int, TokenSeq>, Vec> distribution_cache;
  mutable std::atomic<long> floored{0};
  mutable Semaphore semaphore{1};

  State(EndpointConfig c, std::string iss, std::vector<std::string> ops, int b, int len)
      : cfg(std::move(c)),
        issue(std::move(iss)),
        opinions(std::move(ops)),
        top_b(b),
        max_tokens(len),
        semaphore(cfg.max_concurrency) {
    cfg.validate();
    if (opinions.empty()) throw std::invalid_argument("RemoteSession: no opinions");
    if (top_b < 1) throw std::invalid_argument("RemoteSession: top_b must be >= 1");
    if (max_tokens < 1) throw std::invalid_argument("RemoteSession: max_tokens must be >= 1");
    std::string joined;
    for (std::size_t i = 0; i < opinions.size(); ++i) {
      if (i > 0) joined += '\n';
      joined += opinions[i];
    }
    reference_prompt =
        PromptTemplate::reference_policy().render_text({{"issue", issue}, {"opinion", joined}});
    for (const std::string& opinion : opinions)
      agent_prompts.push_back(PromptTemplate::agent_policy().render_text(
          {{"issue", issue}, {"opinion", opinion}}));
    eos = vocab.intern(cfg.eos_text);
  }

  std::string detok_raw(const TokenSeq& path) const {
    std::string out;
    for (Token t : path) out += vocab.text(t);
    return out;
  }

  // Reference model's top-B candidates at a prefix, terminal token included.
  std::vector<Token> candidates(const TokenSeq& prefix) const {
    {
      std::lock_guard lock(mutex);
      auto it = candidate_cache.find(prefix);
      if (it != candidate_cache.end()) return it->second;
    }
    std::vector<std::pair<std::string, double>> scored;
    {
      SemaphoreGuard guard(semaphore);
      std::string prompt;
      {
        std::lock_guard lock(mutex);
        prompt = reference_prompt + detok_raw(prefix);
      }
      scored = next_token_logprobs(cfg, prompt);
    }
    std::lock_guard lock(mutex);
    std::vector<Token> out;
    bool has_eos = false;
    for (const auto& [text, lp] : scored) {
      if (static_cast<int>(out.size()) >= top_b) break;
      const Token id = vocab.intern(text);
      if (id == eos) has_eos = true;
      out.push_back(id);
    }
    if (!has_eos) out.push_back(eos);  // terminal action is always available
    candidate_cache.emplace(prefix, out);
    return out;
  }

  // opinion -1 selects the reference prompt.
  Vec agent_distribution(int opinion, const TokenSeq& prefix) const {
    const auto key = std::make_pair(opinion, prefix);
    {
      std::lock_guard lock(mutex);
      auto it = distribution_cache.find(key);
      if (it != distribution_cache.end()) return it->second;
    }
    const std::vector<Token> tokens = candidates(prefix);
    std::vector<std::pair<std::string, double>> scored;
    {
      SemaphoreGuard guard(semaphore);
      std::string prompt;
      {
        std::lock_guard lock(mutex);
        prompt = (opinion < 0 ? reference_prompt
                              : agent_prompts[static_cast<std::size_t>(opinion)]) +
                 detok_raw(prefix);
      }
      scored = next_token_logprobs(cfg, prompt);
    }
    std::lock_guard lock(mutex);
    std::map<std::string, double> by_text(scored.begin(), scored.end());
    Vec logprobs(static_cast<Index>(tokens.size()));
    for (std::size_t c = 0; c < tokens.size(); ++c) {
      auto it = by_text.find(vocab.text(tokens[c]));
      if (it == by_text.end()) {
        logprobs[static_cast<Index>(c)] = std::log(cfg.floor_prob);
        ++floored;
      } else {
        logprobs[static_cast<Index>(c)] = it->second;
      }
    }
    // Restrict to the candidate set and renormalize.
    logprobs.array() -= logprobs.maxCoeff();
    Vec probs = logprobs.array().exp();
    probs /= probs.sum();
    distribution_cache.emplace(key, probs);
    return probs;
  }
};

namespace {

class RemoteProposer final : public ActionProposer {
 public:
  explicit RemoteProposer(std::shared_ptr<RemoteSession::State> state)
      : state_(std::move(state)) {}

  std::vector<TokenSeq> propose(const TokenSeq& prefix) const override {
    std::vector<TokenSeq> out;
    for (Token t : state_->candidates(prefix)) out.push_back({t});
    return out;
  }

  bool terminal(const TokenSeq& prefix) const override {
    if (static_cast<int>(prefix.size()) >= state_->max_tokens) return true;
    return !prefix.empty() && prefix.back() == state_->eos;
  }

 private:
  std::shared_ptr<RemoteSession::State> state_;
};

class RemoteAgentPolicy final : public AgentPolicy {
 public:
  RemoteAgentPolicy(std::shared_ptr<RemoteSession::State> state, int opinion)
      : state_(std::move(state)), opinion_(opinion) {}

  std::vector<Token> enabled_tokens(const TokenSeq& prefix) const override {
    return state_->candidates(prefix);
  }

  Vec action_distribution(const TokenSeq& prefix) const override {
    return state_->agent_distribution(opinion_, prefix);
  }

 private:
  std::shared_ptr<RemoteSession::State> state_;
  int opinion_;
};

}  // namespace

RemoteSession::RemoteSession(EndpointConfig cfg, std::string issue,
                             std::vector<std::string> opinions, int top_b, int max_tokens)
    : state_(std::make_shared<State>(std::move(cfg), std::move(issue), std::move(opinions),
                                     top_b, max_tokens)) {}

const EndpointConfig& RemoteSession::config() const { return state_->cfg; }
int RemoteSession::opinion_count() const { return static_cast<int>(state_->opinions.size()); }
int RemoteSession::max_tokens() const { return state_->max_tokens; }

void RemoteSession::probe() const { probe_endpoint(state_->cfg); }

std::shared_ptr<const ActionProposer> RemoteSession::reference_proposer() const {
  return std::make_shared<RemoteProposer>(state_);
}

std::shared_ptr<const AgentPolicy> RemoteSession::agent_policy(int opinion) const {
  if (opinion < 0 || opinion >= opinion_count())
    throw std::out_of_range("RemoteSession: no such opinion");
  return std::make_shared<RemoteAgentPolicy>(state_, opinion);
}

std::shared_ptr<const AgentPolicy> RemoteSession::reference_policy() const {
  return std::make_shared<RemoteAgentPolicy>(state_, -1);
}

Token RemoteSession::eos_token() const { return state_->eos; }

const TokenVocab& RemoteSession::vocab() const { return state_->vocab; }

std::string RemoteSession::detokenize(const TokenSeq& path) const {
  std::lock_guard lock(state_->mutex);
  std::string out;
  for (Token t : path) {
    if (t == state_->eos) break;
    out += state_->vocab.text(t);
  }
  if (!out.empty() && out.front() == ' ') out.erase(out.begin());
  return out;
}

double RemoteSession::statement_score(int opinion, const std::string& statement,
                                      PplPrompt which) const {
  if (opinion < 0 || opinion >= opinion_count())
    throw std::out_of_range("RemoteSession: no such opinion");
  if (statement.empty()) throw std::invalid_argument("statement_score: empty statement");
  const PromptTemplate& tmpl = which == PplPrompt::agent ? PromptTemplate::agent_policy()
                                                         : PromptTemplate::paraphrase();
  const std::string prompt = tmpl.render_text(
      {{"issue", state_->issue},
       {"opinion", state_->opinions[static_cast<std::size_t>(opinion)]}});
  const std::string continuation =
      statement.front() == ' ' ? statement : " " + statement;
  SemaphoreGuard guard(state_->semaphore);
  return score_statement(state_->cfg, prompt, continuation);
}

double RemoteSession::statement_ppl(int opinion, const std::string& statement,
                                    PplPrompt which) const {
  return std::exp(-statement_score(opinion, statement, which));
}

long RemoteSession::floored_candidates() const { return state_->floored.load(); }

}  // namespace fairgen
