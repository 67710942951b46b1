#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "parrot/textgen.hpp"

namespace parrot::membership {

/// Membership-inference heuristics. Every score is oriented so that a lower
/// value looks more like a training member.
enum class Method { ppl, lowercase, zlib, min_k };

inline constexpr std::array<Method, 4> kAllMethods = {Method::ppl, Method::lowercase, Method::zlib, Method::min_k};

std::string_view to_string(Method method) noexcept;
Method parse_method(std::string_view name);

struct MiaScore {
  Method method = Method::ppl;
  double value = 0.0;
  std::string sample_id;
};

struct CalibrationResult {
  double threshold = 0.0;
  double recall = 0.0;
  double target_score = 0.0;
  std::size_t member_count = 0;
  std::size_t members_detected = 0;
};

/// exp(-mean(logprobs)). Throws InvalidArgument when empty.
double perplexity(const textgen::TokenLogProbs& lp);

/// ln(perplexity(orig)) / ln(perplexity(lower)), where `lower` scores the
/// lowercased text. Throws InvalidArgument("degenerate reference") when the
/// lowercase perplexity is exactly 1.
double lowercase_score(const textgen::TokenLogProbs& orig, const textgen::TokenLogProbs& lower);

/// Length in bytes of the zlib stream for `text` at the default level.
std::size_t zlib_size(std::string_view text);

/// ln(perplexity) / zlib_size(text).
double zlib_score(const textgen::TokenLogProbs& lp, std::string_view text);

/// Negated mean of the ceil(k% * T) smallest token logprobs.
/// Requires 0 < k_percent <= 100 and a nonempty sequence.
double min_k_prob(const textgen::TokenLogProbs& lp, double k_percent);

/// Members are classified as such iff score < threshold. The threshold is the
/// target's own score: the largest value that still leaves the target a
/// non-member. Throws InvalidArgument for an empty member list.
CalibrationResult calibrate(std::span<const double> member_scores, double target_score);

struct MiaOptions {
  double min_k_percent = 20.0;
};

/// All four scores of one text, indexed like kAllMethods. Needs a backend
/// with logprob support; the lowercase score issues a second request.
std::array<double, 4> score_text(const textgen::Backend& backend, std::string_view text,
                                 const MiaOptions& options = {});

}  // namespace parrot::membership
