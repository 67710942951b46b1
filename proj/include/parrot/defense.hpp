#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "parrot/corpus.hpp"

namespace parrot::defense {

// --- removal curves ---------------------------------------------------------

struct RemovalPoint {
  double threshold = 0.0;
  double clean_removed_pct = 0.0;
  /// Share of injected samples (poison or target_copy) removed.
  double poison_removed_pct = 0.0;

  bool operator==(const RemovalPoint&) const = default;
};

struct RemovalCurve {
  std::vector<RemovalPoint> points;

  /// "threshold,clean_removed_pct,poison_removed_pct" header plus one row per point.
  std::string to_csv() const;
};

struct ScoredSample {
  std::string sample_id;
  double score = 0.0;
  corpus::Role role = corpus::Role::clean;
};

/// -inf, every distinct score in ascending order, +inf.
std::vector<double> sweep_thresholds(std::span<const double> scores);

/// Removes a sample iff its score > threshold and reports removal
/// percentages per role at each threshold. A role with no samples reports 0.
/// Throws InvalidArgument for empty input or unsorted thresholds.
RemovalCurve removal_curve(std::span<const ScoredSample> samples, std::span<const double> thresholds);

/// Perplexity filtering: `samples` carry perplexities as scores.
RemovalCurve perplexity_filter_curve(std::span<const ScoredSample> samples, std::span<const double> thresholds);

// --- goldfish loss mask -----------------------------------------------------

/// Platform-independent 64-bit hash of a token context:
///   x = mix64(salt); for each id: x = mix64(x ^ uint64(id)).
std::uint64_t goldfish_hash(std::uint64_t salt, std::span<const std::int64_t> context) noexcept;

/// mask[i] is true (token dropped from the loss) iff
/// goldfish_hash(salt, ids[i-h .. i-1]) % k == 0. Positions i < h are kept.
/// Requires h >= 1 and k >= 2.
std::vector<bool> goldfish_mask(std::span<const std::int64_t> token_ids, std::size_t h, std::uint64_t k,
                                std::uint64_t salt);

// --- ParrotTrap ------------------------------------------------------------

/// Distinct canonical word n-grams of a sample (stride 1): lowercased words
/// joined by single spaces, in first-occurrence order.
std::vector<std::string> sample_ngrams(const corpus::Sample& sample, std::size_t n);

/// Inverted index from canonical n-gram to the samples containing it.
class NGramIndex {
 public:
  /// Extraction runs in parallel per sample; postings are merged in corpus
  /// order so every posting list is sorted by sample position.
  static NGramIndex build(const corpus::Corpus& corpus, std::size_t n);

  std::size_t n() const noexcept { return n_; }
  std::size_t ngram_count() const noexcept { return postings_.size(); }
  std::size_t sample_count() const noexcept { return ids_.size(); }

  /// Ids of samples containing `ngram` (canonical form); empty if unseen.
  std::vector<std::string> postings(std::string_view ngram) const;

  /// Positions (in corpus order) of samples containing `ngram`.
  const std::vector<std::uint32_t>* posting_positions(std::string_view ngram) const;

  /// Corpus position of a sample id, or -1.
  std::ptrdiff_t position_of(std::string_view id) const;

 private:
  std::size_t n_ = 0;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::uint32_t> id_position_;
  std::unordered_map<std::string, std::vector<std::uint32_t>> postings_;
};

/// Largest x such that at least x of `counts` are >= x.
std::size_t h_index(std::vector<std::size_t> counts);

/// h-index over the sample's distinct n-grams, each counted by the number of
/// *other* samples containing it. Throws InvalidArgument when the sample is
/// not in the index.
std::size_t trap_score(const corpus::Sample& sample, const NGramIndex& index);

/// trap_score for every sample, in corpus order.
std::vector<std::size_t> trap_scores(const corpus::Corpus& corpus, const NGramIndex& index);

/// Builds the index, scores every sample, and removes samples whose score
/// exceeds each threshold.
RemovalCurve trap_filter_curve(const corpus::Corpus& corpus, std::size_t n, std::span<const double> thresholds);

}  // namespace parrot::defense
