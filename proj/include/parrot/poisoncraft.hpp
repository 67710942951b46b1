#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "parrot/corpus.hpp"
#include "parrot/error.hpp"
#include "parrot/textgen.hpp"

namespace parrot::poisoncraft {

/// c consecutive target words starting at 1-based position window_index.
struct CGram {
  std::vector<std::string> words;
  std::size_t window_index = 1;

  std::size_t c() const noexcept { return words.size(); }
  std::string text() const;

  bool operator==(const CGram&) const = default;
};

struct PoisonRecord {
  corpus::Sample sample;
  CGram cgram;
  int attempts = 1;
  std::string generator_id;
};

/// Raised when one c-gram exhausts its generation budget.
class CraftError : public Error {
 public:
  CraftError(std::size_t window_index, int attempts);

  std::size_t window_index() const noexcept { return window_index_; }

 private:
  std::size_t window_index_;
};

/// All n - c + 1 overlapping c-grams of the target, stride 1, in order.
/// Throws InvalidArgument("window exceeds target") when c > n, or when c == 0.
std::vector<CGram> extract_cgrams(const corpus::TargetSpec& target, std::size_t c);

/// The generation instruction with the c-gram inserted verbatim.
std::string build_prompt(const CGram& cgram);

/// True iff the c-gram's words occur as consecutive word tokens of `text`.
/// Case-sensitive; tokens must match exactly, punctuation included.
bool contains_verbatim(std::string_view text, const CGram& cgram);

/// A contiguous window of min(target_words, word count) words that contains
/// an occurrence of the c-gram. The start is drawn uniformly over all valid
/// starts. When the text already fits, it is returned unchanged; otherwise the
/// window's words are rejoined with single spaces.
std::string crop_preserving(std::string_view text, const CGram& cgram, std::size_t target_words, std::uint64_t seed);

/// 1-based target window used by poison `poison_index` (0-based): the sliding
/// window advances by one per poison and wraps after position n - c + 1.
std::size_t scheduled_window(std::size_t poison_index, std::size_t n, std::size_t c);

struct CraftOptions {
  std::size_t c = 5;
  std::size_t K = 1;
  int max_retries = 8;
  /// Generations shorter than this are rejected.
  std::size_t min_words = 32;
  /// Accepted generations are cropped to this many words.
  std::size_t crop_words = 32;
  std::uint64_t seed = 0;
  std::string id_prefix = "poison";
};

/// Crafts exactly K poisons following the cyclic window schedule.
///
/// Each poison is regenerated until the output is long enough, contains its
/// c-gram verbatim, and does not reproduce the whole target; attempt `a` of
/// poison `i` uses seed derive_seed(options.seed, {i, a}). Requests fan out
/// up to backend.max_in_flight(); the result order is fixed by poison index.
/// Throws CraftError naming the window whose retries ran out.
std::vector<PoisonRecord> craft(const corpus::TargetSpec& target, const CraftOptions& options,
                                const textgen::Backend& backend, const textgen::GenerationParams& params = {});

std::vector<corpus::Sample> samples_of(const std::vector<PoisonRecord>& records);

/// Craft manifest: options, params, and per-record window index and attempts.
std::string craft_manifest_json(const corpus::TargetSpec& target, const CraftOptions& options,
                                const textgen::GenerationParams& params, const std::vector<PoisonRecord>& records);

/// Rebuilds records from crafted samples and their manifest. Throws IoError
/// when a sample has no manifest record.
std::vector<PoisonRecord> records_from_manifest(std::string_view manifest_json, std::span<const corpus::Sample> poisons);

}  // namespace parrot::poisoncraft
