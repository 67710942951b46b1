#include "parrot/poisoncraft.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <unordered_map>

#include "json.hpp"
#include "parrot/parallel.hpp"
#include "parrot/prompt.hpp"
#include "parrot/rng.hpp"
#include "parrot/text.hpp"

namespace parrot::poisoncraft {

namespace {

// Start positions of every occurrence of `needle` in `haystack`.
std::vector<std::size_t> occurrences(const std::vector<std::string>& haystack, const std::vector<std::string>& needle) {
  std::vector<std::size_t> found;
  if (needle.empty() || needle.size() > haystack.size()) return found;
  for (std::size_t p = 0; p + needle.size() <= haystack.size(); ++p) {
    if (std::equal(needle.begin(), needle.end(), haystack.begin() + static_cast<std::ptrdiff_t>(p))) {
      found.push_back(p);
    }
  }
  return found;
}

}  // namespace

std::string CGram::text() const { return text::join_words(words); }

CraftError::CraftError(std::size_t window_index, int attempts)
    : Error(fmt::format("c-gram at window {} failed after {} generation attempts", window_index, attempts)),
      window_index_(window_index) {}

std::vector<CGram> extract_cgrams(const corpus::TargetSpec& target, std::size_t c) {
  const std::size_t n = target.words.size();
  if (c == 0) throw InvalidArgument("c must be >= 1");
  if (c > n) throw InvalidArgument(fmt::format("window exceeds target (c={}, n={})", c, n));
  std::vector<CGram> grams;
  grams.reserve(n - c + 1);
  for (std::size_t j = 0; j + c <= n; ++j) {
    grams.push_back({std::vector<std::string>(target.words.begin() + static_cast<std::ptrdiff_t>(j),
                                              target.words.begin() + static_cast<std::ptrdiff_t>(j + c)),
                     j + 1});
  }
  return grams;
}

std::string build_prompt(const CGram& cgram) { return prompt::verbatim_request(cgram.text()); }

bool contains_verbatim(std::string_view text, const CGram& cgram) {
  const auto words = text::word_tokenize(text);
  return !occurrences(words, cgram.words).empty();
}

std::string crop_preserving(std::string_view text, const CGram& cgram, std::size_t target_words, std::uint64_t seed) {
  if (target_words < cgram.c()) throw InvalidArgument("target_words must be >= c");
  const auto words = text::word_tokenize(text);
  const auto hits = occurrences(words, cgram.words);
  if (hits.empty()) throw InvalidArgument("text does not contain the c-gram");
  const std::size_t n = words.size();
  if (target_words >= n) return std::string(text);

  const std::size_t width = target_words;
  const std::size_t c = cgram.c();
  // Window [s, s + width) covers the occurrence at p iff s <= p and p + c <= s + width.
  std::vector<std::size_t> starts;
  for (std::size_t p : hits) {
    const std::size_t lo = p + c > width ? p + c - width : 0;
    const std::size_t hi = std::min(p, n - width);
    for (std::size_t s = lo; s <= hi; ++s) starts.push_back(s);
  }
  std::sort(starts.begin(), starts.end());
  starts.erase(std::unique(starts.begin(), starts.end()), starts.end());
  if (starts.empty()) throw Error("internal: no crop window covers the c-gram");

  Rng rng(derive_seed(seed, {0xc709}));
  const std::size_t s = starts[rng.below(starts.size())];
  return text::join_words(words, s, s + width);
}

std::size_t scheduled_window(std::size_t poison_index, std::size_t n, std::size_t c) {
  return poison_index % (n - c + 1) + 1;
}

std::vector<PoisonRecord> craft(const corpus::TargetSpec& target, const CraftOptions& options,
                                const textgen::Backend& backend, const textgen::GenerationParams& params) {
  if (options.K == 0) throw InvalidArgument("K must be >= 1");
  if (options.max_retries < 1) throw InvalidArgument("max_retries must be >= 1");
  if (options.crop_words < options.c) throw InvalidArgument("crop_words must be >= c");
  textgen::require(backend, textgen::Capability::generate);
  params.validate();

  const auto grams = extract_cgrams(target, options.c);
  const std::size_t n = target.words.size();
  std::vector<PoisonRecord> records(options.K);

  parallel_for(options.K, backend.max_in_flight(), [&](std::size_t i) {
    const CGram& gram = grams[scheduled_window(i, n, options.c) - 1];
    const std::string request = build_prompt(gram);
    for (int attempt = 1; attempt <= options.max_retries; ++attempt) {
      textgen::GenerationParams p = params;
      p.seed = derive_seed(options.seed, {i, static_cast<std::uint64_t>(attempt)});
      textgen::Completion out;
      try {
        out = backend.generate(request, p);
      } catch (const EmptyGenerationError&) {
        continue;
      }
      if (text::word_tokenize(out.text).size() < options.min_words) continue;
      if (!contains_verbatim(out.text, gram)) continue;
      std::string cropped = crop_preserving(out.text, gram, options.crop_words,
                                            derive_seed(options.seed, {i, static_cast<std::uint64_t>(attempt), 1}));
      auto sample = corpus::Sample::make(fmt::format("{}-{:04}", options.id_prefix, i + 1), std::move(cropped),
                                         std::nullopt, corpus::Role::poison);
      if (sample.words == target.words) continue;
      records[i] = PoisonRecord{std::move(sample), gram, attempt, backend.id()};
      return;
    }
    throw CraftError(gram.window_index, options.max_retries);
  });
  return records;
}

std::vector<corpus::Sample> samples_of(const std::vector<PoisonRecord>& records) {
  std::vector<corpus::Sample> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.sample);
  return out;
}

std::string craft_manifest_json(const corpus::TargetSpec& target, const CraftOptions& options,
                                const textgen::GenerationParams& params, const std::vector<PoisonRecord>& records) {
  nlohmann::ordered_json j;
  j["c"] = options.c;
  j["K"] = options.K;
  j["seed"] = options.seed;
  j["max_retries"] = options.max_retries;
  j["min_words"] = options.min_words;
  j["crop_words"] = options.crop_words;
  j["target"] = {{"book_id", target.book_id}, {"n_words", target.words.size()}};
  j["params"] = {{"temperature", params.temperature},
                 {"top_k", params.top_k},
                 {"max_new_tokens", params.max_new_tokens}};
  auto& recs = j["records"] = nlohmann::ordered_json::array();
  for (const auto& r : records) {
    recs.push_back({{"id", r.sample.id},
                    {"window_index", r.cgram.window_index},
                    {"cgram", r.cgram.text()},
                    {"attempts", r.attempts},
                    {"generator_id", r.generator_id}});
  }
  return j.dump(2) + "\n";
}

std::vector<PoisonRecord> records_from_manifest(std::string_view manifest_json,
                                                std::span<const corpus::Sample> poisons) {
  std::unordered_map<std::string, nlohmann::json> by_id;
  try {
    const auto j = nlohmann::json::parse(manifest_json);
    for (const auto& r : j.at("records")) by_id[r.at("id").get<std::string>()] = r;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("craft manifest: ") + e.what());
  }
  std::vector<PoisonRecord> out;
  out.reserve(poisons.size());
  for (const auto& s : poisons) {
    const auto it = by_id.find(s.id);
    if (it == by_id.end()) throw IoError("craft manifest has no record for " + s.id);
    PoisonRecord rec;
    rec.sample = s;
    rec.cgram.words = text::word_tokenize(it->second.at("cgram").get<std::string>());
    rec.cgram.window_index = it->second.at("window_index").get<std::size_t>();
    rec.attempts = it->second.at("attempts").get<int>();
    rec.generator_id = it->second.at("generator_id").get<std::string>();
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace parrot::poisoncraft
