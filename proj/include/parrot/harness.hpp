#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "parrot/corpus.hpp"
#include "parrot/error.hpp"
#include "parrot/poisoncraft.hpp"
#include "parrot/simmetrics.hpp"
#include "parrot/textgen.hpp"

namespace parrot::harness {

struct PrefixSplit {
  std::string prefix;
  std::string suffix_ref;
  std::size_t prefix_words = 0;
};

/// First floor(prefix_fraction * n) target words as the prompt, the rest as
/// the reference. Throws InvalidArgument when n < 4 or either side is empty.
PrefixSplit build_prefix(const corpus::TargetSpec& target);

struct SeedRun {
  std::uint64_t seed = 0;
  std::vector<simmetrics::SimilarityScores> per_generation;
  simmetrics::SimilarityScores max;
  simmetrics::SimilarityScores avg;
};

/// Memorization scores of one evaluation. `max` and `avg` are means over
/// seeds of each seed's max and average.
struct MetricReport {
  static constexpr int kSchemaVersion = 1;

  std::string run_id;
  /// "complete", or "invalid" for a run that aborted part way.
  std::string status = "complete";
  std::optional<std::string> error;
  std::string backend_id;
  std::size_t n_generations = 0;
  textgen::GenerationParams params;
  std::vector<std::uint64_t> seeds;
  std::vector<SeedRun> runs;
  simmetrics::SimilarityScores max;
  simmetrics::SimilarityScores avg;

  std::string to_json() const;
  /// One row per seed plus a "mean" row.
  std::string summary_csv() const;
  static MetricReport from_json(std::string_view json);
};

/// Carries whatever finished before the backend failed; its status is "invalid".
class EvaluationAborted : public Error {
 public:
  EvaluationAborted(const std::string& what, MetricReport partial)
      : Error(what), partial_(std::move(partial)) {}

  const MetricReport& partial() const noexcept { return partial_; }

 private:
  MetricReport partial_;
};

struct EvalOptions {
  std::size_t n_generations = 10000;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  /// Score embedding cosine when the backend can embed.
  bool use_embeddings = true;
  std::string run_id = "eval";
};

/// Completion cap applied by evaluate_memorization: 3x the suffix word count.
int completion_cap(const PrefixSplit& split);

/// Samples n_generations completions of the target prefix per seed and scores
/// each against the suffix. Generation g of seed s uses
/// derive_seed(s, {g}). Requests fan out to backend.max_in_flight(); results
/// are ordered by (seed, generation index).
MetricReport evaluate_memorization(const textgen::Backend& backend, const corpus::TargetSpec& target,
                                   const EvalOptions& options, textgen::GenerationParams params = {});

struct MetricStats {
  double mean = 0.0;
  double std = 0.0;
};

struct GroupSummary {
  std::string group;
  std::size_t count = 0;
  MetricStats rouge_l;
  MetricStats edit_sim;
  std::optional<MetricStats> embed_cos;
};

struct StealthReport {
  std::vector<GroupSummary> groups;

  std::string to_csv() const;
  std::string to_table() const;
};

/// Similarity of each group to the full target text: "clean", one
/// "poison_c<c>" group per window size present, and "paraphrase" when any are
/// given. Standard deviations are population (ddof 0). Embedding cosine is
/// included when `embedder` is non-null.
StealthReport stealthiness_report(std::span<const poisoncraft::PoisonRecord> poisons,
                                  std::span<const corpus::Sample> clean, std::span<const std::string> paraphrases,
                                  const corpus::TargetSpec& target, const textgen::Backend* embedder = nullptr);

struct ComparisonRow {
  std::string label;
  std::size_t seed_count = 0;
  std::size_t n_generations = 0;
  simmetrics::SimilarityScores max;
  simmetrics::SimilarityScores avg;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;

  /// Missing embedding values are written as "NA".
  std::string to_csv() const;
  std::string to_text() const;
};

/// Side-by-side max/avg metrics. Throws InvalidArgument for fewer than two
/// reports, a label count mismatch, or duplicate labels.
ComparisonTable compare_runs(std::span<const MetricReport> reports, std::span<const std::string> labels);

}  // namespace parrot::harness
