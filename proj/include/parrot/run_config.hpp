#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "parrot/textgen.hpp"

namespace parrot::config {

struct BackendSection {
  std::string kind = "stub";
  std::string endpoint;
  std::string model;
  std::string embedding_model;
  std::string api_key_env = "OPENAI_API_KEY";
  double timeout = 60.0;
  std::size_t max_in_flight = 4;
  int max_attempts = 4;
};

struct AttackSection {
  std::size_t c = 5;
  std::size_t K = 10;
  std::uint64_t seed = 0;
  int max_retries = 8;
  std::size_t min_words = 32;
  std::size_t crop_words = 32;
  std::optional<double> rate;
  std::optional<std::size_t> count;
  std::size_t t_copies = 0;
};

struct DefenseSection {
  std::size_t ngram_n = 3;
  /// Empty means sweep every distinct score.
  std::vector<double> thresholds;
  std::size_t goldfish_h = 13;
  std::uint64_t goldfish_k = 4;
  std::uint64_t goldfish_salt = 0;
};

struct EvalSection {
  std::size_t n_generations = 10000;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  double temperature = 0.7;
  int top_k = 40;
  bool use_embeddings = true;
  double min_k_percent = 20.0;
  std::string run_id = "eval";
};

struct DataSection {
  std::size_t words_per_sample = 32;
  std::string exclude_book;
  std::string book_id;
  double prefix_fraction = 0.25;
};

struct PathsSection {
  std::string paragraphs;
  std::string target;
  std::string clean;
  std::string poisons;
  std::string craft_manifest;
  std::string corpus;
  std::string paraphrases;
  std::vector<std::string> reports;
  std::vector<std::string> labels;
  std::string out = "out";
};

/// Everything a subcommand reads. Serialized as JSON with one object per
/// section; unknown sections or keys are ConfigError.
struct RunConfig {
  BackendSection backend;
  AttackSection attack;
  DefenseSection defense;
  EvalSection eval;
  DataSection data;
  PathsSection paths;

  std::string to_json() const;
  /// Missing keys keep their defaults.
  static RunConfig from_json(std::string_view json);
  /// Range checks that do not depend on the subcommand.
  void validate() const;
};

textgen::BackendSettings backend_settings(const RunConfig& config);

}  // namespace parrot::config
