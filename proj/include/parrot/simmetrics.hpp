#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "parrot/textgen.hpp"

namespace parrot::simmetrics {

/// Similarity of one text to a reference. Every field is scaled to [0, 1]
/// except embed_cos, which is a raw cosine in [-1, 1].
struct SimilarityScores {
  double rouge_l = 0.0;
  double edit_sim = 0.0;
  std::optional<double> embed_cos;

  bool operator==(const SimilarityScores&) const = default;
};

/// Longest common subsequence of two word sequences. O(|a||b|) time,
/// O(min(|a|,|b|)) memory.
std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

/// Word-level Rouge-L F1. 0 for an empty candidate or no overlap.
/// Throws InvalidArgument for an empty reference.
double rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference);

/// Character-level Levenshtein distance over Unicode scalar values with unit
/// costs, computed with Myers' bit-parallel block algorithm.
std::size_t levenshtein(std::u32string_view a, std::u32string_view b);
std::size_t levenshtein(std::string_view a, std::string_view b);

/// 1 - levenshtein(a, b) / max(|a|, |b|), lengths in scalar values.
/// Two empty strings are identical: 1.0.
double edit_similarity(std::string_view a, std::string_view b);

/// dot(u, v) / (|u| |v|), clamped to [-1, 1]. Throws InvalidArgument on a
/// dimension mismatch or a zero-norm vector.
double cosine(const textgen::EmbeddingVector& u, const textgen::EmbeddingVector& v);

enum class Aggregate { max, avg };

/// Component-wise max or mean. embed_cos is aggregated over the entries that
/// carry it and stays empty if none do. Throws InvalidArgument when empty.
SimilarityScores aggregate(std::span<const SimilarityScores> scores, Aggregate mode);

}  // namespace parrot::simmetrics
