#include "parrot/textgen.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "parrot/error.hpp"
#include "parrot/prompt.hpp"
#include "parrot/rng.hpp"
#include "parrot/text.hpp"

namespace parrot::textgen {

void GenerationParams::validate() const {
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) throw InvalidArgument("temperature must be >= 0");
  if (top_k < 1) throw InvalidArgument("top_k must be >= 1");
  if (max_new_tokens < 1) throw InvalidArgument("max_new_tokens must be >= 1");
}

void TokenLogProbs::validate() const {
  if (tokens.size() != logprobs.size()) {
    throw BackendError(fmt::format("token/logprob length mismatch ({} vs {})", tokens.size(), logprobs.size()));
  }
  for (double lp : logprobs) {
    if (!std::isfinite(lp) || lp > 0.0) throw BackendError(fmt::format("invalid logprob {}", lp));
  }
}

std::string_view to_string(Capability capability) noexcept {
  switch (capability) {
    case Capability::generate: return "generate";
    case Capability::logprobs: return "logprobs";
    case Capability::embed: return "embed";
  }
  return "generate";
}

bool Capabilities::has(Capability capability) const noexcept {
  switch (capability) {
    case Capability::generate: return generate;
    case Capability::logprobs: return logprobs;
    case Capability::embed: return embed;
  }
  return false;
}

Completion Backend::generate(std::string_view, const GenerationParams&) const {
  throw CapabilityError("generate");
}

TokenLogProbs Backend::score_logprobs(std::string_view) const { throw CapabilityError("logprobs"); }

EmbeddingVector Backend::embed(std::string_view) const { throw CapabilityError("embed"); }

void require(const Backend& backend, Capability capability) {
  if (!backend.capabilities().has(capability)) {
    throw CapabilityError(fmt::format("{} ({})", to_string(capability), backend.id()));
  }
}

// --- stub ------------------------------------------------------------------

namespace {

std::uint64_t hash_string(std::string_view s) { return mix64(fnv1a64(s.data(), s.size())); }

std::vector<std::string> build_vocabulary() {
  static constexpr std::string_view onsets[] = {"b", "d", "f", "g", "h", "k", "l", "m", "n", "p",
                                                "r", "s", "t", "v", "z", "sh", "ch", "br", "tr"};
  static constexpr std::string_view vowels[] = {"a", "e", "i", "o", "u", "ai", "ou"};
  std::vector<std::string> syllables;
  for (auto o : onsets) {
    for (auto v : vowels) syllables.push_back(std::string(o) + std::string(v));
  }
  std::vector<std::string> words;
  std::unordered_set<std::string> seen;
  for (const auto& a : syllables) {
    for (const auto& b : syllables) {
      std::string w = a + b;
      if (seen.insert(w).second) words.push_back(std::move(w));
    }
  }
  Rng rng(0x5eed'0000'0000'0001ULL);
  for (std::size_t i = words.size() - 1; i > 0; --i) std::swap(words[i], words[rng.below(i + 1)]);
  words.resize(5000);
  return words;
}

// Filler prose: sentences of 6-14 words, capitalized first word, final period.
std::vector<std::string> filler_words(Rng& rng, std::size_t count) {
  const auto& vocab = stub_vocabulary();
  std::vector<std::string> out;
  out.reserve(count);
  std::size_t left_in_sentence = 0;
  for (std::size_t i = 0; i < count; ++i) {
    std::string w = vocab[rng.below(vocab.size())];
    if (left_in_sentence == 0) {
      left_in_sentence = static_cast<std::size_t>(rng.between(6, 14));
      w[0] = static_cast<char>(w[0] - 'a' + 'A');
    }
    if (--left_in_sentence == 0) w += '.';
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace

const std::vector<std::string>& stub_vocabulary() {
  static const std::vector<std::string> vocab = build_vocabulary();
  return vocab;
}

std::vector<std::string> stub_tokenize(std::string_view s) {
  std::vector<std::string> tokens;
  const std::u32string cps = text::decode_utf8(s);
  // Walk bytes alongside code points to cut the original string.
  std::size_t byte = 0;
  std::size_t token_start = 0;
  bool in_word = false;
  for (char32_t cp : cps) {
    const std::size_t len = cp < 0x80 ? 1 : cp < 0x800 ? 2 : cp < 0x10000 ? 3 : 4;
    const bool space = text::is_unicode_space(cp);
    if (space && in_word) {
      tokens.emplace_back(s.substr(token_start, byte - token_start));
      token_start = byte;
      in_word = false;
    } else if (!space) {
      in_word = true;
    }
    byte += len;
  }
  if (token_start < s.size()) tokens.emplace_back(s.substr(token_start));
  return tokens;
}

StubBackend::StubBackend(StubOptions options) : options_(std::move(options)) {
  if (options_.embedding_dim == 0) throw InvalidArgument("embedding_dim must be >= 1");
  if (options_.constant_logprob && !(*options_.constant_logprob <= 0.0)) {
    throw InvalidArgument("constant_logprob must be <= 0");
  }
}

Completion StubBackend::generate(std::string_view prompt, const GenerationParams& params) const {
  params.validate();
  Rng rng(derive_seed(params.seed.value_or(0), {hash_string(prompt)}));
  const auto cap = static_cast<std::size_t>(params.max_new_tokens);
  Completion out;
  if (const auto span = prompt::extract_verbatim_span(prompt)) {
    const auto span_words = text::word_tokenize(*span);
    const auto filler_count = static_cast<std::size_t>(rng.between(40, 64));
    auto words = filler_words(rng, filler_count);
    const auto at = static_cast<std::ptrdiff_t>(rng.below(filler_count + 1));
    words.insert(words.begin() + at, span_words.begin(), span_words.end());
    if (words.size() > cap) {
      words.resize(cap);
      out.truncated = true;
    }
    out.text = text::join_words(words);
  } else {
    const auto count = static_cast<std::size_t>(rng.between(static_cast<std::int64_t>((cap + 1) / 2),
                                                            static_cast<std::int64_t>(cap)));
    out.text = text::join_words(filler_words(rng, count));
  }
  if (out.text.empty()) throw EmptyGenerationError();
  return out;
}

TokenLogProbs StubBackend::score_logprobs(std::string_view text) const {
  if (text.empty()) throw InvalidArgument("cannot score empty text");
  TokenLogProbs out;
  out.tokens = stub_tokenize(text);
  out.logprobs.reserve(out.tokens.size());
  for (const auto& tok : out.tokens) {
    if (options_.constant_logprob) {
      out.logprobs.push_back(*options_.constant_logprob);
    } else {
      const double u = static_cast<double>(hash_string(tok) >> 11) * 0x1.0p-53;
      out.logprobs.push_back(-(0.25 + 5.75 * u));
    }
  }
  return out;
}

EmbeddingVector StubBackend::embed(std::string_view text) const {
  if (text.empty()) throw InvalidArgument("cannot embed empty text");
  EmbeddingVector v;
  v.values.assign(options_.embedding_dim, 0.0);
  for (const auto& w : text::word_tokenize(text)) {
    const std::uint64_t h = hash_string(w);
    v.values[h % options_.embedding_dim] += (h >> 63) ? -1.0 : 1.0;
  }
  return v;
}

Completion FixedTextBackend::generate(std::string_view, const GenerationParams& params) const {
  params.validate();
  if (text_.empty()) throw EmptyGenerationError();
  return {text_, false};
}

std::unique_ptr<Backend> make_backend(const BackendSettings& settings) {
  if (settings.kind == "stub") return std::make_unique<StubBackend>(settings.stub);
  if (settings.kind == "http") return std::make_unique<HttpBackend>(settings.http);
  throw ConfigError(fmt::format("unknown backend '{}' (expected stub or http)", settings.kind));
}

}  // namespace parrot::textgen
