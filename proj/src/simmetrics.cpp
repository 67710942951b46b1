#include "parrot/simmetrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <unordered_map>

#include "parrot/error.hpp"
#include "parrot/text.hpp"

namespace parrot::simmetrics {

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.size() < b.size()) std::swap(a, b);
  // Single row over the shorter sequence.
  std::vector<std::size_t> row(b.size() + 1, 0);
  for (const auto& x : a) {
    std::size_t diag = 0;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = x == b[j - 1] ? diag + 1 : std::max(row[j - 1], up);
      diag = up;
    }
  }
  return row[b.size()];
}

double rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference) {
  if (reference.empty()) throw InvalidArgument("rouge_l: empty reference");
  if (candidate.empty()) return 0.0;
  const auto lcs = static_cast<double>(lcs_length(candidate, reference));
  if (lcs == 0.0) return 0.0;
  const double precision = lcs / static_cast<double>(candidate.size());
  const double recall = lcs / static_cast<double>(reference.size());
  return 2.0 * precision * recall / (precision + recall);
}

namespace {

// Match masks of the pattern, one 64-bit word per block, per distinct symbol.
class PatternMasks {
 public:
  PatternMasks(std::u32string_view pattern, std::size_t blocks) : blocks_(blocks) {
    ascii_.fill(-1);
    for (std::size_t i = 0; i < pattern.size(); ++i) {
      masks_[index_for(pattern[i]) + i / 64] |= std::uint64_t{1} << (i % 64);
    }
  }

  // Nullptr when the symbol does not occur in the pattern.
  const std::uint64_t* get(char32_t ch) const {
    std::ptrdiff_t idx = -1;
    if (ch < 128) {
      idx = ascii_[ch];
    } else if (auto it = other_.find(ch); it != other_.end()) {
      idx = it->second;
    }
    return idx < 0 ? nullptr : masks_.data() + idx;
  }

 private:
  std::size_t index_for(char32_t ch) {
    if (ch < 128) {
      if (ascii_[ch] < 0) ascii_[ch] = allocate();
      return static_cast<std::size_t>(ascii_[ch]);
    }
    auto [it, inserted] = other_.try_emplace(ch, -1);
    if (inserted) it->second = allocate();
    return static_cast<std::size_t>(it->second);
  }

  std::ptrdiff_t allocate() {
    const auto at = static_cast<std::ptrdiff_t>(masks_.size());
    masks_.resize(masks_.size() + blocks_, 0);
    return at;
  }

  std::size_t blocks_;
  std::array<std::ptrdiff_t, 128> ascii_{};
  std::unordered_map<char32_t, std::ptrdiff_t> other_;
  std::vector<std::uint64_t> masks_;
};

}  // namespace

std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
  while (!a.empty() && !b.empty() && a.front() == b.front()) a.remove_prefix(1), b.remove_prefix(1);
  while (!a.empty() && !b.empty() && a.back() == b.back()) a.remove_suffix(1), b.remove_suffix(1);
  if (a.size() > b.size()) std::swap(a, b);
  if (a.empty()) return b.size();

  // `a` is the pattern (rows), `b` the text (columns).
  const std::size_t m = a.size();
  const std::size_t blocks = (m + 63) / 64;
  const PatternMasks peq(a, blocks);
  std::vector<std::uint64_t> pv(blocks, ~std::uint64_t{0});
  std::vector<std::uint64_t> mv(blocks, 0);
  const std::uint64_t last_bit = std::uint64_t{1} << ((m - 1) % 64);
  constexpr std::uint64_t high_bit = std::uint64_t{1} << 63;
  std::size_t score = m;

  for (char32_t ch : b) {
    const std::uint64_t* eq_col = peq.get(ch);
    int carry = 1;  // the top boundary row grows by one per column
    for (std::size_t k = 0; k < blocks; ++k) {
      std::uint64_t eq = eq_col ? eq_col[k] : 0;
      const std::uint64_t p = pv[k];
      const std::uint64_t mm = mv[k];
      const std::uint64_t xv = eq | mm;
      if (carry < 0) eq |= 1;
      const std::uint64_t xh = (((eq & p) + p) ^ p) | eq;
      std::uint64_t ph = mm | ~(xh | p);
      std::uint64_t mh = p & xh;
      const std::uint64_t out_bit = k + 1 == blocks ? last_bit : high_bit;
      const int out = (ph & out_bit) ? 1 : (mh & out_bit) ? -1 : 0;
      ph <<= 1;
      mh <<= 1;
      if (carry < 0) {
        mh |= 1;
      } else if (carry > 0) {
        ph |= 1;
      }
      pv[k] = mh | ~(xv | ph);
      mv[k] = ph & xv;
      carry = out;
    }
    score = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(score) + carry);
  }
  return score;
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  return levenshtein(text::decode_utf8(a), text::decode_utf8(b));
}

double edit_similarity(std::string_view a, std::string_view b) {
  const auto ua = text::decode_utf8(a);
  const auto ub = text::decode_utf8(b);
  const std::size_t longest = std::max(ua.size(), ub.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(levenshtein(ua, ub)) / static_cast<double>(longest);
}

double cosine(const textgen::EmbeddingVector& u, const textgen::EmbeddingVector& v) {
  if (u.dim() != v.dim()) throw InvalidArgument("cosine: dimension mismatch");
  // Scale by the largest magnitude so squares neither underflow nor overflow.
  auto largest = [](const std::vector<double>& x) {
    double m = 0.0;
    for (double e : x) m = std::max(m, std::abs(e));
    return m;
  };
  const double su = largest(u.values);
  const double sv = largest(v.values);
  if (su == 0.0 || sv == 0.0) throw InvalidArgument("cosine: zero-norm vector");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.dim(); ++i) {
    const double a = u.values[i] / su;
    const double b = v.values[i] / sv;
    dot += a * b;
    nu += a * a;
    nv += b * b;
  }
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

SimilarityScores aggregate(std::span<const SimilarityScores> scores, Aggregate mode) {
  if (scores.empty()) throw InvalidArgument("aggregate: no scores");
  SimilarityScores out = scores.front();
  if (mode == Aggregate::max) {
    for (const auto& s : scores.subspan(1)) {
      out.rouge_l = std::max(out.rouge_l, s.rouge_l);
      out.edit_sim = std::max(out.edit_sim, s.edit_sim);
      if (s.embed_cos) out.embed_cos = out.embed_cos ? std::max(*out.embed_cos, *s.embed_cos) : *s.embed_cos;
    }
    return out;
  }
  double rouge = 0.0, edit = 0.0, cos = 0.0;
  std::size_t cos_count = 0;
  for (const auto& s : scores) {
    rouge += s.rouge_l;
    edit += s.edit_sim;
    if (s.embed_cos) cos += *s.embed_cos, ++cos_count;
  }
  const auto count = static_cast<double>(scores.size());
  out.rouge_l = rouge / count;
  out.edit_sim = edit / count;
  out.embed_cos = cos_count ? std::optional<double>(cos / static_cast<double>(cos_count)) : std::nullopt;
  return out;
}

}  // namespace parrot::simmetrics
