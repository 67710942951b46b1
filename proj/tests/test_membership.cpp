#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "parrot/error.hpp"
#include "parrot/membership.hpp"
#include "parrot/rng.hpp"

using namespace parrot;
using namespace parrot::membership;
using textgen::TokenLogProbs;

namespace {

TokenLogProbs lps(std::vector<double> v) {
  TokenLogProbs t;
  t.tokens.assign(v.size(), "t");
  t.logprobs = std::move(v);
  return t;
}

// Logprobs whose perplexity is exp(x).
TokenLogProbs with_log_ppl(double x) { return lps({-x, -x}); }

}  // namespace

TEST_CASE("perplexity") {
  CHECK(perplexity(lps({-std::log(2.0), -std::log(2.0), -std::log(2.0)})) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(perplexity(lps({0.0, 0.0})) == 1.0);
  CHECK(perplexity(lps({-1.0, -3.0})) == doctest::Approx(std::exp(2.0)).epsilon(1e-14));
  CHECK_THROWS_AS(perplexity(lps({})), InvalidArgument);
}

TEST_CASE("lowercase_score is a log-perplexity ratio") {
  CHECK(lowercase_score(with_log_ppl(1.5), with_log_ppl(1.5)) == 1.0);
  CHECK(lowercase_score(with_log_ppl(1.0), with_log_ppl(2.0)) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(lowercase_score(with_log_ppl(4.0), with_log_ppl(2.0)) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK_THROWS_WITH_AS(lowercase_score(with_log_ppl(1.0), lps({0.0})), doctest::Contains("degenerate reference"),
                       InvalidArgument);
}

TEST_CASE("zlib_score") {
  const std::string text = "the quick brown fox jumps over the lazy dog";
  CHECK(zlib_size(text) == zlib_size(text));
  CHECK(zlib_size(text) > 8);
  // Highly repetitive text compresses better than its length.
  CHECK(zlib_size(std::string(1000, 'a')) < 30);
  CHECK(zlib_score(with_log_ppl(1.0), text) < zlib_score(with_log_ppl(2.0), text));
  CHECK(zlib_score(lps({0.0, 0.0}), text) == 0.0);
  CHECK(zlib_score(with_log_ppl(3.0), text) == zlib_score(with_log_ppl(3.0), text));
  CHECK_THROWS_AS(zlib_score(with_log_ppl(1.0), ""), InvalidArgument);
}

TEST_CASE("min_k_prob") {
  const auto lp = lps({-0.5, -1.0, -2.0, -4.0});
  CHECK(min_k_prob(lp, 50) == 3.0);
  CHECK(min_k_prob(lp, 100) == doctest::Approx(7.5 / 4.0).epsilon(1e-15));
  CHECK(min_k_prob(lps({-0.7}), 1) == 0.7);
  CHECK(min_k_prob(lps({-0.7}), 100) == 0.7);
  CHECK(min_k_prob(lp, 20) == 4.0);  // ceil(0.8) = 1 token
  CHECK_THROWS_AS(min_k_prob(lp, 0), InvalidArgument);
  CHECK_THROWS_AS(min_k_prob(lp, 101), InvalidArgument);
  CHECK_THROWS_AS(min_k_prob(lps({}), 20), InvalidArgument);
}

TEST_CASE("min_k_prob matches the sort-and-ceil oracle") {
  Rng rng(11);
  for (int trial = 0; trial < 5000; ++trial) {
    std::vector<double> v(1 + rng.below(40));
    for (auto& x : v) x = -8.0 * rng.unit();
    const int k = 1 + static_cast<int>(rng.below(100));
    CHECK(std::abs(min_k_prob(lps(v), k) - oracle::min_k(v, k)) <= 1e-12);
  }
}

TEST_CASE("calibrate") {
  const std::vector<double> members = {1, 2, 3, 8};
  auto r = calibrate(members, 5);
  CHECK(r.threshold == 5);
  CHECK(r.recall == 0.75);
  CHECK(r.member_count == 4);
  CHECK(r.members_detected == 3);
  CHECK(r.target_score >= r.threshold);
  CHECK(calibrate(members, 0.5).recall == 0.0);
  CHECK(calibrate(members, 100).recall == 1.0);
  // Strict inequality: a member tied with the target is not detected.
  CHECK(calibrate(members, 3).recall == 0.5);
  CHECK_THROWS_AS(calibrate(std::vector<double>{}, 1), InvalidArgument);
}

TEST_CASE("calibrate equals the threshold sweep and ignores order") {
  Rng rng(12);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> m(1 + rng.below(60));
    for (auto& x : m) x = static_cast<double>(rng.below(20));  // ties on purpose
    const double target = static_cast<double>(rng.below(22)) - 1.0;
    const auto got = calibrate(m, target);
    const auto want = oracle::calibrate(m, target);
    CHECK(got.recall == want.recall);
    CHECK(got.threshold == want.threshold);
    std::vector<double> shuffled = m;
    for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
    CHECK(calibrate(shuffled, target).recall == got.recall);
  }
}

TEST_CASE("pushing the target below the member bulk collapses recall") {
  // Members spread evenly; a clean-model target sits high, a poisoned one low.
  std::vector<double> members;
  for (int i = 0; i < 1000; ++i) members.push_back(i + 0.5);
  CHECK(calibrate(members, 841).recall == doctest::Approx(0.841));
  CHECK(calibrate(members, 41).recall == doctest::Approx(0.041));
}

TEST_CASE("better-predicted text lowers ppl and min_k scores") {
  Rng rng(13);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> v(1 + rng.below(30));
    for (auto& x : v) x = -0.1 - 6.0 * rng.unit();
    std::vector<double> better = v;
    for (auto& x : better) x = std::min(0.0, x + 0.05 + rng.unit() * 0.1);
    CHECK(perplexity(lps(better)) < perplexity(lps(v)));
    CHECK(min_k_prob(lps(better), 20) < min_k_prob(lps(v), 20));
  }
}

TEST_CASE("score_text with the stub backend") {
  textgen::StubBackend stub;
  const auto s = score_text(stub, "Some Words To Score here.");
  for (double v : s) CHECK(std::isfinite(v));
  CHECK(s[0] >= 1.0);
  CHECK(score_text(stub, "Some Words To Score here.") == s);
  CHECK_THROWS_AS(score_text(textgen::FixedTextBackend("x"), "abc"), CapabilityError);
  CHECK(parse_method("min_k") == Method::min_k);
  CHECK_THROWS_AS(parse_method("auc"), InvalidArgument);
}
