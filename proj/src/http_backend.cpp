#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "parrot/error.hpp"
#include "parrot/textgen.hpp"

namespace parrot::textgen {

using json = nlohmann::json;

struct HttpBackend::State {
  explicit State(std::ptrdiff_t slots) : in_flight(slots) {}

  std::counting_semaphore<1024> in_flight;
  mutable std::mutex dim_mutex;
  std::optional<std::size_t> embedding_dim;
};

namespace {

// Splits "http://host:port/v1" into ("http://host:port", "/v1").
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
  const auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint must include a scheme: " + endpoint);
  const std::string scheme = endpoint.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw ConfigError("unsupported endpoint scheme: " + scheme);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (scheme == "https") throw ConfigError("https endpoints need a build with OpenSSL");
#endif
  const auto path_start = endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {endpoint, ""};
  std::string prefix = endpoint.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {endpoint.substr(0, path_start), prefix};
}

class InFlightSlot {
 public:
  explicit InFlightSlot(std::counting_semaphore<1024>& sem) : sem_(sem) { sem_.acquire(); }
  ~InFlightSlot() { sem_.release(); }
  InFlightSlot(const InFlightSlot&) = delete;
  InFlightSlot& operator=(const InFlightSlot&) = delete;

 private:
  std::counting_semaphore<1024>& sem_;
};

bool retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

HttpBackend::HttpBackend(HttpConfig config) : config_(std::move(config)) {
  if (config_.endpoint.empty()) throw ConfigError("http backend needs an endpoint");
  if (config_.model.empty()) throw ConfigError("http backend needs a model name");
  if (config_.max_in_flight < 1 || config_.max_in_flight > 1024) {
    throw ConfigError("max_in_flight must lie in [1, 1024]");
  }
  if (config_.max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
  if (!(config_.timeout_seconds > 0.0)) throw ConfigError("timeout must be positive");
  std::tie(scheme_host_port_, path_prefix_) = split_endpoint(config_.endpoint);
  state_ = std::make_unique<State>(static_cast<std::ptrdiff_t>(config_.max_in_flight));
  state_->embedding_dim = config_.embedding_dim;
}

HttpBackend::~HttpBackend() = default;

std::string HttpBackend::post_json(const std::string& path, const std::string& body) const {
  httplib::Headers headers;
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }
  const auto timeout_s = static_cast<time_t>(config_.timeout_seconds);
  const auto timeout_us =
      static_cast<time_t>(std::llround((config_.timeout_seconds - static_cast<double>(timeout_s)) * 1e6));

  double backoff = config_.backoff_initial_seconds;
  std::string last_error;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
      backoff *= config_.backoff_multiplier;
    }
    httplib::Result res = [&] {
      InFlightSlot slot(state_->in_flight);
      httplib::Client client(scheme_host_port_);
      client.set_connection_timeout(timeout_s, timeout_us);
      client.set_read_timeout(timeout_s, timeout_us);
      client.set_write_timeout(timeout_s, timeout_us);
      return client.Post(path_prefix_ + path, headers, body, "application/json");
    }();
    if (!res) {
      last_error = "transport failure: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) return res->body;
    last_error = fmt::format("HTTP {} from {}{}: {}", res->status, path_prefix_, path, res->body.substr(0, 200));
    if (!retryable_status(res->status)) throw BackendError(last_error);
  }
  throw TransportError(last_error, config_.max_attempts);
}

Completion HttpBackend::generate(std::string_view prompt, const GenerationParams& params) const {
  params.validate();
  json req = {{"model", config_.model},
              {"prompt", std::string(prompt)},
              {"max_tokens", params.max_new_tokens},
              {"temperature", params.temperature},
              {"top_k", params.top_k}};
  if (params.seed) req["seed"] = *params.seed;
  const std::string body = post_json("/completions", req.dump());
  try {
    const auto res = json::parse(body);
    const auto& choice = res.at("choices").at(0);
    Completion out;
    out.text = choice.at("text").get<std::string>();
    if (choice.contains("finish_reason") && choice.at("finish_reason").is_string()) {
      out.truncated = choice.at("finish_reason").get<std::string>() == "length";
    }
    if (out.text.find_first_not_of(" \t\r\n") == std::string::npos) throw EmptyGenerationError();
    return out;
  } catch (const json::exception& e) {
    throw BackendError(std::string("malformed completion response: ") + e.what());
  }
}

TokenLogProbs HttpBackend::score_logprobs(std::string_view text) const {
  if (text.empty()) throw InvalidArgument("cannot score empty text");
  // Echo mode returns the prompt's tokens with their conditional logprobs.
  // One generated token is requested because some servers reject zero; it is
  // cut off using text_offset (or dropped as the final token).
  const json req = {{"model", config_.model}, {"prompt", std::string(text)}, {"max_tokens", 1},
                    {"temperature", 0.0},     {"echo", true},              {"logprobs", 0}};
  const std::string body = post_json("/completions", req.dump());
  try {
    const auto res = json::parse(body);
    const auto& choice = res.at("choices").at(0);
    if (!choice.contains("logprobs") || choice.at("logprobs").is_null()) throw CapabilityError("logprobs");
    const auto& lp = choice.at("logprobs");
    const auto& tokens = lp.at("tokens");
    const auto& values = lp.at("token_logprobs");
    if (tokens.size() != values.size()) throw BackendError("token/logprob length mismatch");
    std::size_t keep = tokens.size();
    if (lp.contains("text_offset") && lp.at("text_offset").is_array() && lp.at("text_offset").size() == keep) {
      const auto& offsets = lp.at("text_offset");
      keep = 0;
      while (keep < offsets.size() && offsets.at(keep).get<std::size_t>() < text.size()) ++keep;
    } else if (keep > 0) {
      --keep;
    }
    TokenLogProbs out;
    for (std::size_t i = 0; i < keep; ++i) {
      if (values.at(i).is_null()) continue;
      out.tokens.push_back(tokens.at(i).get<std::string>());
      out.logprobs.push_back(values.at(i).get<double>());
    }
    if (out.logprobs.empty()) throw BackendError("no scored tokens returned");
    out.validate();
    return out;
  } catch (const json::exception& e) {
    throw BackendError(std::string("malformed logprob response: ") + e.what());
  }
}

EmbeddingVector HttpBackend::embed(std::string_view text) const {
  if (text.empty()) throw InvalidArgument("cannot embed empty text");
  const json req = {{"model", config_.embedding_model.empty() ? config_.model : config_.embedding_model},
                    {"input", std::string(text)}};
  const std::string body = post_json("/embeddings", req.dump());
  EmbeddingVector out;
  try {
    const auto res = json::parse(body);
    out.values = res.at("data").at(0).at("embedding").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw BackendError(std::string("malformed embedding response: ") + e.what());
  }
  for (double v : out.values) {
    if (!std::isfinite(v)) throw BackendError("embedding contains non-finite values");
  }
  std::lock_guard lock(state_->dim_mutex);
  if (!state_->embedding_dim) {
    state_->embedding_dim = out.dim();
  } else if (*state_->embedding_dim != out.dim()) {
    throw BackendError(fmt::format("embedding dimension mismatch: expected {}, got {}", *state_->embedding_dim,
                                   out.dim()));
  }
  return out;
}

}  // namespace parrot::textgen
