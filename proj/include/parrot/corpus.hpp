#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "parrot/text.hpp"

namespace parrot::corpus {

using text::word_tokenize;

enum class Role { clean, poison, target_copy };

std::string_view to_string(Role role) noexcept;

/// Parses "clean" / "poison" / "target_copy"; throws InvalidArgument otherwise.
Role parse_role(std::string_view name);

/// One corpus unit. `words` is always word_tokenize(text); build through make().
struct Sample {
  std::string id;
  std::string text;
  std::vector<std::string> words;
  std::optional<std::string> book_id;
  Role role = Role::clean;

  static Sample make(std::string id, std::string text, std::optional<std::string> book_id = std::nullopt,
                     Role role = Role::clean);

  bool operator==(const Sample&) const = default;
};

/// Injection metadata, written as a JSON sidecar next to the corpus file.
struct Manifest {
  std::uint64_t seed = 0;
  std::optional<double> rate;
  std::size_t count = 0;
  /// Ids of injected samples whose role is poison.
  std::vector<std::string> poison_ids;

  bool operator==(const Manifest&) const = default;
};

struct Corpus {
  std::vector<Sample> samples;
  std::optional<Manifest> manifest;

  std::size_t count(Role role) const noexcept;
  const Sample* find(std::string_view id) const noexcept;

  bool operator==(const Corpus&) const = default;
};

/// The text an attacker wants the model to regurgitate.
struct TargetSpec {
  std::string text;
  std::vector<std::string> words;
  std::string book_id;
  double prefix_fraction = 0.25;

  /// Throws InvalidArgument when the text has no words or the fraction is
  /// outside (0, 1).
  static TargetSpec make(std::string text, std::string book_id = {}, double prefix_fraction = 0.25);
};

struct Paragraph {
  std::string text;
  std::optional<std::string> book_id;
};

/// Chunks each paragraph into consecutive windows of exactly
/// `words_per_sample` words. The trailing remainder of a paragraph is dropped.
/// Sample ids are `<id_prefix>-NNNNNN`, numbered in output order.
std::vector<Sample> segment_paragraphs(std::span<const Paragraph> paragraphs, std::size_t words_per_sample = 32,
                                       std::string_view id_prefix = "clean");

/// Drops every sample from `book_id`. Manifest poison ids are filtered to match.
Corpus exclude_book(const Corpus& corpus, std::string_view book_id);

struct InjectRate {
  double value;
};
struct InjectCount {
  std::size_t value;
};
using InjectAmount = std::variant<InjectRate, InjectCount>;

/// round-half-up(rate * clean_count).
std::size_t count_for_rate(double rate, std::size_t clean_count);

/// Insertion slots used by inject(): element i is the index, in the growing
/// sequence, at which addition i is inserted. Pure in (seed, base_size, count).
std::vector<std::size_t> injection_positions(std::uint64_t seed, std::size_t base_size, std::size_t count);

/// Inserts the first `count` additions at seeded-uniform positions and records
/// the manifest. Throws InvalidArgument on a bad amount, on an id collision, or
/// "insufficient poisons" when count exceeds additions.size().
Corpus inject(const Corpus& corpus, std::span<const Sample> additions, InjectAmount amount, std::uint64_t seed);

/// t exact copies of the target text, role target_copy.
std::vector<Sample> make_t_copies(const TargetSpec& target, std::size_t t, std::string_view id_prefix = "target-copy");

// --- JSON Lines serialization -------------------------------------------

/// One {"id","text","book_id","role"} object per line.
std::string to_jsonl(std::span<const Sample> samples);
std::vector<Sample> parse_jsonl(std::string_view jsonl);

std::string manifest_to_json(const Manifest& manifest);
Manifest parse_manifest(std::string_view json);

std::vector<Sample> read_samples(const std::filesystem::path& path);
void write_samples(const std::filesystem::path& path, std::span<const Sample> samples);

/// Reads a corpus file plus, when given and present, its manifest sidecar.
Corpus load_corpus(const std::filesystem::path& jsonl, const std::optional<std::filesystem::path>& manifest = {});
void save_corpus(const Corpus& corpus, const std::filesystem::path& jsonl,
                 const std::optional<std::filesystem::path>& manifest = {});

/// Paragraph input: JSONL with {"text", "book_id"?} per line.
std::vector<Paragraph> read_paragraphs(const std::filesystem::path& path);

}  // namespace parrot::corpus
