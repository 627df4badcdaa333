#include "fairgen/mock_llm_server.hpp"

#include "fairgen/hashing.hpp"

#include "httplib.h"
#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace fairgen {

using nlohmann::json;

namespace {

constexpr const char* kEos = "<|eos|>";

double hash_unit(const std::string& context, const std::string& token) {
  const std::uint64_t h = splitmix64(fnv1a64(context) ^ fnv1a64(token));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double log_sum_exp(const std::vector<double>& scores) {
  double top = scores.front();
  for (double s : scores) top = std::max(top, s);
  double acc = 0.0;
  for (double s : scores) acc += std::exp(s - top);
  return top + std::log(acc);
}

}  // namespace

const std::vector<std::string>& MockLlmServer::vocabulary() {
  static const std::vector<std::string> vocab = {
      " we",     " should", " support", " balance", " community",
      " policy", " growth", " fairness", kEos,
  };
  return vocab;
}

std::vector<std::pair<std::string, std::size_t>> MockLlmServer::tokenize(
    const std::string& text) {
  std::vector<std::pair<std::string, std::size_t>> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t start = pos;
    if (text[pos] == ' ') ++pos;
    while (pos < text.size() && text[pos] != ' ') ++pos;
    out.emplace_back(text.substr(start, pos - start), start);
  }
  return out;
}

std::vector<double> MockLlmServer::next_token_distribution(const std::string& model,
                                                           const std::string& context) {
  const std::vector<std::string>& vocab = vocabulary();
  std::vector<double> logprobs(vocab.size());
  if (model == "mock-uniform" || model == "mock-arith" || model == "mock-pair") {
    const double lp = -std::log(static_cast<double>(vocab.size()));
    std::fill(logprobs.begin(), logprobs.end(), lp);
    return logprobs;
  }
  std::vector<double> scores(vocab.size());
  for (std::size_t i = 0; i < vocab.size(); ++i)
    scores[i] = 3.0 * hash_unit(context, vocab[i]);
  const double normalizer = log_sum_exp(scores);
  for (std::size_t i = 0; i < vocab.size(); ++i) logprobs[i] = scores[i] - normalizer;
  return logprobs;
}

double MockLlmServer::token_logprob(const std::string& model, const std::string& context,
                                    const std::string& token, std::size_t token_index) {
  if (model == "mock-arith") return -0.1 * static_cast<double>(token_index + 1);
  if (model == "mock-uniform" || model == "mock-pair")
    return -std::log(static_cast<double>(vocabulary().size()));
  const std::vector<std::string>& vocab = vocabulary();
  for (std::size_t i = 0; i < vocab.size(); ++i)
    if (vocab[i] == token) return next_token_distribution(model, context)[i];
  return -8.0;  // outside the vocabulary (prompt scaffolding)
}

struct MockLlmServer::Impl {
  httplib::Server server;
  std::thread worker;
  int port = 0;
  std::atomic<long> served{0};
  std::atomic<long> flaky_failures{0};

  json completion_response(const json& request) {
    const std::string model = request.value("model", "mock-hash");
    const std::string prompt = request.value("prompt", "");
    const int max_tokens = request.value("max_tokens", 0);
    const bool echo = request.value("echo", false);
    const int k = request.value("logprobs", 0);

    json choice;
    choice["index"] = 0;
    choice["finish_reason"] = "length";

    json tokens = json::array();
    json token_logprobs = json::array();
    json top_logprobs = json::array();
    json text_offsets = json::array();

    if (echo && max_tokens == 0) {
      const auto pieces = tokenize(prompt);
      for (std::size_t i = 0; i < pieces.size(); ++i) {
        const auto& [text, offset] = pieces[i];
        tokens.push_back(text);
        text_offsets.push_back(offset);
        token_logprobs.push_back(token_logprob(model, prompt.substr(0, offset), text, i));
        top_logprobs.push_back(nullptr);
      }
      choice["text"] = prompt;
    } else {
      // Single-step generation: return the argmax token with its top-k list.
      const std::vector<std::string>& vocab = vocabulary();
      std::vector<std::pair<std::string, double>> scored;
      if (model == "mock-pair") {
        scored = {{" maybe", std::log(0.6)}, {" yes", std::log(0.2)}, {" no", std::log(0.2)}};
      } else {
        const std::vector<double> dist = next_token_distribution(model, prompt);
        for (std::size_t i = 0; i < vocab.size(); ++i) scored.emplace_back(vocab[i], dist[i]);
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
          if (a.second != b.second) return a.second > b.second;
          return a.first < b.first;
        });
      }
      json top = json::object();
      const std::size_t keep = std::min<std::size_t>(scored.size(),
                                                     k > 0 ? static_cast<std::size_t>(k) : 1);
      for (std::size_t i = 0; i < keep; ++i) top[scored[i].first] = scored[i].second;
      tokens.push_back(scored.front().first);
      token_logprobs.push_back(scored.front().second);
      top_logprobs.push_back(top);
      text_offsets.push_back(prompt.size());
      choice["text"] = scored.front().first;
    }

    if (model != "mock-nologprobs") {
      choice["logprobs"] = {{"tokens", tokens},
                            {"token_logprobs", token_logprobs},
                            {"top_logprobs", top_logprobs},
                            {"text_offset", text_offsets}};
    }
    return json{{"id", "cmpl-mock"},
                {"object", "text_completion"},
                {"model", model},
                {"choices", json::array({choice})}};
  }

  json chat_response(const json& request) {
    const std::string model = request.value("model", "mock-hash");
    std::string statement;
    if (request.contains("messages")) {
      for (const json& message : request["messages"]) {
        const std::string content = message.value("content", "");
        const std::string marker = "Here is the statement:\n\n";
        const std::size_t pos = content.find(marker);
        if (pos != std::string::npos) statement = content.substr(pos + marker.size());
      }
    }
    std::string reply = statement;
    if (model == "mock-chat-empty") {
      reply.clear();
    } else if (model == "mock-chat-trim") {
      const std::size_t cut = reply.find_last_of(' ');
      reply = cut == std::string::npos ? "" : reply.substr(0, cut);
    }
    return json{{"id", "chat-mock"},
                {"object", "chat.completion"},
                {"model", model},
                {"choices",
                 json::array({json{{"index", 0},
                                   {"message", {{"role", "assistant"}, {"content", reply}}},
                                   {"finish_reason", "stop"}}})}};
  }
};

MockLlmServer::MockLlmServer(int port) : impl_(std::make_unique<Impl>()) {
  Impl* impl = impl_.get();

  impl->server.Post("/v1/completions", [impl](const httplib::Request& req,
                                              httplib::Response& res) {
    ++impl->served;
    json request;
    try {
      request = json::parse(req.body);
    } catch (const json::exception&) {
      res.status = 400;
      res.set_content(R"({"error":"bad json"})", "application/json");
      return;
    }
    if (request.value("model", "") == "mock-flaky" && impl->flaky_failures.load() < 2) {
      ++impl->flaky_failures;
      res.status = 503;
      res.set_content(R"({"error":"temporarily unavailable"})", "application/json");
      return;
    }
    res.set_content(impl->completion_response(request).dump(), "application/json");
  });

  impl->server.Post("/v1/chat/completions",
                    [impl](const httplib::Request& req, httplib::Response& res) {
                      ++impl->served;
                      json request;
                      try {
                        request = json::parse(req.body);
                      } catch (const json::exception&) {
                        res.status = 400;
                        res.set_content(R"({"error":"bad json"})", "application/json");
                        return;
                      }
                      res.set_content(impl->chat_response(request).dump(), "application/json");
                    });

  if (port == 0) {
    impl->port = impl->server.bind_to_any_port("127.0.0.1");
  } else {
    if (!impl->server.bind_to_port("127.0.0.1", port))
      throw std::runtime_error("MockLlmServer: failed to bind port " + std::to_string(port));
    impl->port = port;
  }
  if (impl->port <= 0) throw std::runtime_error("MockLlmServer: failed to bind a port");
  impl->worker = std::thread([impl] { impl->server.listen_after_bind(); });
  while (!impl->server.is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(1));
}

MockLlmServer::~MockLlmServer() {
  impl_->server.stop();
  if (impl_->worker.joinable()) impl_->worker.join();
}

int MockLlmServer::port() const { return impl_->port; }

std::string MockLlmServer::base_url() const {
  return "http://127.0.0.1:" + std::to_string(impl_->port);
}

long MockLlmServer::requests_served() const { return impl_->served.load(); }

}  // namespace fairgen
