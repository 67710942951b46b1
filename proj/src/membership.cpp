#include "parrot/membership.hpp"

#include <fmt/format.h>
#include <zlib.h>

#include <algorithm>
#include <cmath>

#include "parrot/error.hpp"
#include "parrot/text.hpp"

namespace parrot::membership {

namespace {

double mean_nll(const textgen::TokenLogProbs& lp) {
  if (lp.logprobs.empty()) throw InvalidArgument("no token logprobs");
  double sum = 0.0;
  for (double v : lp.logprobs) sum += v;
  return -sum / static_cast<double>(lp.logprobs.size());
}

}  // namespace

std::string_view to_string(Method method) noexcept {
  switch (method) {
    case Method::ppl: return "ppl";
    case Method::lowercase: return "lowercase";
    case Method::zlib: return "zlib";
    case Method::min_k: return "min_k";
  }
  return "ppl";
}

Method parse_method(std::string_view name) {
  for (Method m : kAllMethods) {
    if (to_string(m) == name) return m;
  }
  throw InvalidArgument(fmt::format("unknown MIA method '{}'", name));
}

double perplexity(const textgen::TokenLogProbs& lp) { return std::exp(mean_nll(lp)); }

double lowercase_score(const textgen::TokenLogProbs& orig, const textgen::TokenLogProbs& lower) {
  const double reference = mean_nll(lower);
  if (reference == 0.0) throw InvalidArgument("degenerate reference: lowercase perplexity is 1");
  return mean_nll(orig) / reference;
}

std::size_t zlib_size(std::string_view text) {
  if (text.empty()) throw InvalidArgument("zlib_size: empty text");
  uLongf size = compressBound(static_cast<uLong>(text.size()));
  std::vector<Bytef> buffer(size);
  const int rc = compress2(buffer.data(), &size, reinterpret_cast<const Bytef*>(text.data()),
                           static_cast<uLong>(text.size()), Z_DEFAULT_COMPRESSION);
  if (rc != Z_OK) throw Error(fmt::format("zlib compress2 failed ({})", rc));
  return static_cast<std::size_t>(size);
}

double zlib_score(const textgen::TokenLogProbs& lp, std::string_view text) {
  return mean_nll(lp) / static_cast<double>(zlib_size(text));
}

double min_k_prob(const textgen::TokenLogProbs& lp, double k_percent) {
  if (!(k_percent > 0.0 && k_percent <= 100.0)) throw InvalidArgument("k_percent must lie in (0, 100]");
  const std::size_t total = lp.logprobs.size();
  if (total == 0) throw InvalidArgument("no token logprobs");
  // k * T / 100 keeps integer-valued products exact before the ceiling.
  auto take = static_cast<std::size_t>(std::ceil(k_percent * static_cast<double>(total) / 100.0));
  take = std::clamp<std::size_t>(take, 1, total);
  std::vector<double> sorted = lp.logprobs;
  std::partial_sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(take), sorted.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < take; ++i) sum += sorted[i];
  return -sum / static_cast<double>(take);
}

CalibrationResult calibrate(std::span<const double> member_scores, double target_score) {
  if (member_scores.empty()) throw InvalidArgument("calibrate: no member scores");
  CalibrationResult out;
  out.threshold = target_score;
  out.target_score = target_score;
  out.member_count = member_scores.size();
  out.members_detected = static_cast<std::size_t>(
      std::count_if(member_scores.begin(), member_scores.end(), [&](double s) { return s < target_score; }));
  out.recall = static_cast<double>(out.members_detected) / static_cast<double>(out.member_count);
  return out;
}

std::array<double, 4> score_text(const textgen::Backend& backend, std::string_view text, const MiaOptions& options) {
  textgen::require(backend, textgen::Capability::logprobs);
  const auto lp = backend.score_logprobs(text);
  lp.validate();
  const std::string lowered = text::ascii_lower(text);
  const auto lp_lower = backend.score_logprobs(lowered);
  lp_lower.validate();
  return {perplexity(lp), lowercase_score(lp, lp_lower), zlib_score(lp, text),
          min_k_prob(lp, options.min_k_percent)};
}

}  // namespace parrot::membership
