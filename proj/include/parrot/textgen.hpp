#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

namespace parrot::textgen {

struct GenerationParams {
  double temperature = 0.7;
  int top_k = 40;
  int max_new_tokens = 128;
  std::optional<std::uint64_t> seed;

  /// Throws InvalidArgument when a field is out of range.
  void validate() const;
};

struct Completion {
  std::string text;
  /// The backend stopped at max_new_tokens rather than finishing on its own.
  bool truncated = false;
};

/// Per-token natural-log probabilities for one text under one model.
struct TokenLogProbs {
  std::vector<std::string> tokens;
  std::vector<double> logprobs;

  /// Throws BackendError unless lengths match and every logprob is finite and <= 0.
  void validate() const;
  std::size_t size() const noexcept { return logprobs.size(); }
};

struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dim() const noexcept { return values.size(); }
};

enum class Capability { generate, logprobs, embed };

std::string_view to_string(Capability capability) noexcept;

struct Capabilities {
  bool generate = false;
  bool logprobs = false;
  bool embed = false;

  bool has(Capability capability) const noexcept;
};

/// A text-generation service. Implementations must be safe to call from
/// several threads at once.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual std::string id() const = 0;
  virtual Capabilities capabilities() const = 0;

  /// Upper bound on concurrent requests callers should issue.
  virtual std::size_t max_in_flight() const { return 4; }

  /// Completion text only, without the prompt.
  virtual Completion generate(std::string_view prompt, const GenerationParams& params) const;
  virtual TokenLogProbs score_logprobs(std::string_view text) const;
  virtual EmbeddingVector embed(std::string_view text) const;
};

/// Throws CapabilityError if `backend` lacks `capability`.
void require(const Backend& backend, Capability capability);

// --- offline stub ----------------------------------------------------------

/// Deterministic pseudo-word list shared by the stub generator and the
/// synthetic corpora in tests. Words are lowercase, unique, and contain no
/// punctuation.
const std::vector<std::string>& stub_vocabulary();

/// The stub's tokenizer: each token is a run of whitespace followed by a run
/// of non-whitespace, so concatenating tokens reproduces the text.
std::vector<std::string> stub_tokenize(std::string_view text);

struct StubOptions {
  std::size_t embedding_dim = 256;
  /// When set, every token gets this logprob instead of the hashed value.
  std::optional<double> constant_logprob;
  std::size_t max_in_flight = 4;
};

/// Offline backend. Every output is a pure function of its inputs.
///
/// generate(): for a verbatim-request prompt, a 40-64 word paragraph of
/// seeded filler sentences with the requested span inserted at a random word
/// boundary; for any other prompt, filler continuation of up to
/// max_new_tokens words. Words count as tokens for max_new_tokens.
///
/// score_logprobs(): stub_tokenize() tokens, each with a logprob in
/// [-6, -0.25] derived from a hash of the token string.
///
/// embed(): signed feature-hashed bag of words.
class StubBackend final : public Backend {
 public:
  explicit StubBackend(StubOptions options = {});

  std::string id() const override { return "stub"; }
  Capabilities capabilities() const override { return {true, true, true}; }
  std::size_t max_in_flight() const override { return options_.max_in_flight; }

  Completion generate(std::string_view prompt, const GenerationParams& params) const override;
  TokenLogProbs score_logprobs(std::string_view text) const override;
  EmbeddingVector embed(std::string_view text) const override;

 private:
  StubOptions options_;
};

/// Returns the same completion for every prompt. Used as an oracle backend
/// (e.g. one that always answers with the target suffix).
class FixedTextBackend final : public Backend {
 public:
  explicit FixedTextBackend(std::string text) : text_(std::move(text)) {}

  std::string id() const override { return "fixed"; }
  Capabilities capabilities() const override { return {true, false, false}; }
  Completion generate(std::string_view prompt, const GenerationParams& params) const override;

 private:
  std::string text_;
};

// --- OpenAI-compatible HTTP client ----------------------------------------

struct HttpConfig {
  /// Base URL including the API prefix, e.g. "http://127.0.0.1:8000/v1".
  std::string endpoint;
  std::string model;
  /// Defaults to `model` when empty.
  std::string embedding_model;
  /// Name of the environment variable holding the API key. The key itself
  /// never appears in configuration.
  std::string api_key_env = "OPENAI_API_KEY";
  double timeout_seconds = 60.0;
  std::size_t max_in_flight = 4;
  int max_attempts = 4;
  double backoff_initial_seconds = 0.5;
  double backoff_multiplier = 2.0;
  /// Expected embedding dimension; learned from the first response when unset.
  std::optional<std::size_t> embedding_dim;
};

/// Client for /completions (generation and echo scoring) and /embeddings.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(HttpConfig config);
  ~HttpBackend() override;

  std::string id() const override { return "http:" + config_.model; }
  Capabilities capabilities() const override { return {true, true, true}; }
  std::size_t max_in_flight() const override { return config_.max_in_flight; }

  Completion generate(std::string_view prompt, const GenerationParams& params) const override;
  TokenLogProbs score_logprobs(std::string_view text) const override;
  EmbeddingVector embed(std::string_view text) const override;

  const HttpConfig& config() const noexcept { return config_; }

 private:
  struct State;

  std::string post_json(const std::string& path, const std::string& body) const;

  HttpConfig config_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  std::unique_ptr<State> state_;
};

struct BackendSettings {
  /// "stub" or "http".
  std::string kind = "stub";
  StubOptions stub;
  HttpConfig http;
};

/// Throws ConfigError for an unknown kind or an http backend without endpoint/model.
std::unique_ptr<Backend> make_backend(const BackendSettings& settings);

}  // namespace parrot::textgen
