#include "parrot/defense.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>
#include <unordered_set>

#include "parrot/error.hpp"
#include "parrot/io.hpp"
#include "parrot/parallel.hpp"
#include "parrot/rng.hpp"

namespace parrot::defense {

std::string RemovalCurve::to_csv() const {
  std::string out = "threshold,clean_removed_pct,poison_removed_pct\n";
  for (const auto& p : points) {
    out += fmt::format("{},{},{}\n", io::format_real(p.threshold), io::format_real(p.clean_removed_pct),
                       io::format_real(p.poison_removed_pct));
  }
  return out;
}

std::vector<double> sweep_thresholds(std::span<const double> scores) {
  std::vector<double> out(scores.begin(), scores.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  out.insert(out.begin(), -std::numeric_limits<double>::infinity());
  out.push_back(std::numeric_limits<double>::infinity());
  return out;
}

RemovalCurve removal_curve(std::span<const ScoredSample> samples, std::span<const double> thresholds) {
  if (samples.empty()) throw InvalidArgument("removal curve over an empty corpus");
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
    throw InvalidArgument("thresholds must be sorted ascending");
  }
  std::vector<double> clean, injected;
  for (const auto& s : samples) {
    if (std::isnan(s.score)) throw InvalidArgument("score is NaN for " + s.sample_id);
    (s.role == corpus::Role::clean ? clean : injected).push_back(s.score);
  }
  std::sort(clean.begin(), clean.end());
  std::sort(injected.begin(), injected.end());
  auto removed_pct = [](const std::vector<double>& sorted, double threshold) {
    if (sorted.empty()) return 0.0;
    const auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), threshold);
    return 100.0 * static_cast<double>(above) / static_cast<double>(sorted.size());
  };
  RemovalCurve curve;
  curve.points.reserve(thresholds.size());
  for (double t : thresholds) curve.points.push_back({t, removed_pct(clean, t), removed_pct(injected, t)});
  return curve;
}

RemovalCurve perplexity_filter_curve(std::span<const ScoredSample> samples, std::span<const double> thresholds) {
  return removal_curve(samples, thresholds);
}

std::uint64_t goldfish_hash(std::uint64_t salt, std::span<const std::int64_t> context) noexcept {
  std::uint64_t x = mix64(salt);
  for (std::int64_t id : context) x = mix64(x ^ static_cast<std::uint64_t>(id));
  return x;
}

std::vector<bool> goldfish_mask(std::span<const std::int64_t> token_ids, std::size_t h, std::uint64_t k,
                                std::uint64_t salt) {
  if (h < 1) throw InvalidArgument("goldfish h must be >= 1");
  if (k < 2) throw InvalidArgument("goldfish k must be >= 2");
  std::vector<bool> mask(token_ids.size(), false);
  for (std::size_t i = h; i < token_ids.size(); ++i) {
    mask[i] = goldfish_hash(salt, token_ids.subspan(i - h, h)) % k == 0;
  }
  return mask;
}

std::vector<std::string> sample_ngrams(const corpus::Sample& sample, std::size_t n) {
  if (n == 0) throw InvalidArgument("n-gram size must be >= 1");
  std::vector<std::string> out;
  if (sample.words.size() < n) return out;
  std::vector<std::string> lowered;
  lowered.reserve(sample.words.size());
  for (const auto& w : sample.words) lowered.push_back(text::ascii_lower(w));
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i + n <= lowered.size(); ++i) {
    std::string gram = text::join_words(lowered, i, i + n);
    if (seen.insert(gram).second) out.push_back(std::move(gram));
  }
  return out;
}

NGramIndex NGramIndex::build(const corpus::Corpus& corpus, std::size_t n) {
  if (n == 0) throw InvalidArgument("n-gram size must be >= 1");
  if (corpus.samples.size() > std::numeric_limits<std::uint32_t>::max()) throw InvalidArgument("corpus too large");
  NGramIndex index;
  index.n_ = n;
  const std::size_t count = corpus.samples.size();
  std::vector<std::vector<std::string>> grams(count);
  parallel_for(count, std::max(1u, std::thread::hardware_concurrency()),
               [&](std::size_t i) { grams[i] = sample_ngrams(corpus.samples[i], n); });
  index.ids_.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& id = corpus.samples[i].id;
    if (!index.id_position_.emplace(id, static_cast<std::uint32_t>(i)).second) {
      throw InvalidArgument(fmt::format("duplicate sample id '{}'", id));
    }
    index.ids_.push_back(id);
    for (auto& g : grams[i]) index.postings_[std::move(g)].push_back(static_cast<std::uint32_t>(i));
  }
  return index;
}

std::vector<std::string> NGramIndex::postings(std::string_view ngram) const {
  std::vector<std::string> out;
  if (const auto* list = posting_positions(ngram)) {
    for (auto p : *list) out.push_back(ids_[p]);
  }
  return out;
}

const std::vector<std::uint32_t>* NGramIndex::posting_positions(std::string_view ngram) const {
  const auto it = postings_.find(std::string(ngram));
  return it == postings_.end() ? nullptr : &it->second;
}

std::ptrdiff_t NGramIndex::position_of(std::string_view id) const {
  const auto it = id_position_.find(std::string(id));
  return it == id_position_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
}

std::size_t h_index(std::vector<std::size_t> counts) {
  std::sort(counts.begin(), counts.end(), std::greater<>());
  std::size_t h = 0;
  while (h < counts.size() && counts[h] >= h + 1) ++h;
  return h;
}

std::size_t trap_score(const corpus::Sample& sample, const NGramIndex& index) {
  const std::ptrdiff_t self = index.position_of(sample.id);
  if (self < 0) throw InvalidArgument(fmt::format("sample '{}' is not in the index", sample.id));
  std::vector<std::size_t> others;
  for (const auto& gram : sample_ngrams(sample, index.n())) {
    const auto* list = index.posting_positions(gram);
    if (!list || !std::binary_search(list->begin(), list->end(), static_cast<std::uint32_t>(self))) {
      throw InvalidArgument(fmt::format("sample '{}' does not match its indexed text", sample.id));
    }
    others.push_back(list->size() - 1);
  }
  return h_index(std::move(others));
}

std::vector<std::size_t> trap_scores(const corpus::Corpus& corpus, const NGramIndex& index) {
  std::vector<std::size_t> scores(corpus.samples.size());
  parallel_for(corpus.samples.size(), std::max(1u, std::thread::hardware_concurrency()),
               [&](std::size_t i) { scores[i] = trap_score(corpus.samples[i], index); });
  return scores;
}

RemovalCurve trap_filter_curve(const corpus::Corpus& corpus, std::size_t n, std::span<const double> thresholds) {
  const auto index = NGramIndex::build(corpus, n);
  const auto scores = trap_scores(corpus, index);
  std::vector<ScoredSample> scored;
  scored.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    scored.push_back({corpus.samples[i].id, static_cast<double>(scores[i]), corpus.samples[i].role});
  }
  return removal_curve(scored, thresholds);
}

}  // namespace parrot::defense
