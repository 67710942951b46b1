#include <cmath>
#include <limits>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "parrot/defense.hpp"
#include "parrot/error.hpp"
#include "parrot/poisoncraft.hpp"
#include "parrot/rng.hpp"

using namespace parrot;
using namespace parrot::defense;
using corpus::Corpus;
using corpus::Role;
using corpus::Sample;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Corpus corpus_of(const std::vector<std::string>& texts) {
  Corpus c;
  for (std::size_t i = 0; i < texts.size(); ++i) c.samples.push_back(Sample::make("s" + std::to_string(i), texts[i]));
  return c;
}

std::string random_text(Rng& rng, std::size_t words, std::size_t vocab) {
  std::vector<std::string> w;
  for (std::size_t i = 0; i < words; ++i) w.push_back("v" + std::to_string(rng.below(vocab)));
  return text::join_words(w);
}

}  // namespace

TEST_CASE("build_index") {
  Rng rng(1);
  SUBCASE("single 32-word sample, n=3") {
    std::vector<std::string> w;
    for (int i = 0; i < 32; ++i) w.push_back("u" + std::to_string(i));
    const auto c = corpus_of({text::join_words(w)});
    const auto idx = NGramIndex::build(c, 3);
    CHECK(idx.ngram_count() == 30);
    CHECK(idx.postings("u0 u1 u2") == std::vector<std::string>{"s0"});
  }
  SUBCASE("identical samples share every posting") {
    const auto t = random_text(rng, 20, 1000);
    const auto idx = NGramIndex::build(corpus_of({t, t}), 3);
    for (const auto& g : sample_ngrams(Sample::make("x", t), 3)) CHECK(idx.postings(g).size() == 2);
  }
  SUBCASE("disjoint vocabularies share nothing") {
    const auto idx = NGramIndex::build(corpus_of({"a b c d e", "f g h i j"}), 2);
    CHECK(idx.ngram_count() == 8);
    for (const auto& g : sample_ngrams(Sample::make("x", "a b c d e"), 2)) CHECK(idx.postings(g).size() == 1);
  }
  SUBCASE("canonical form is lowercased") {
    const auto idx = NGramIndex::build(corpus_of({"The Cat sat", "the cat SAT"}), 3);
    CHECK(idx.postings("the cat sat").size() == 2);
    CHECK(idx.postings("The Cat sat").empty());
  }
  SUBCASE("duplicate ids are rejected") {
    Corpus c = corpus_of({"a b c", "d e f"});
    c.samples[1].id = "s0";
    CHECK_THROWS_AS(NGramIndex::build(c, 2), InvalidArgument);
  }
}

TEST_CASE("h_index") {
  CHECK(h_index({0, 1, 2, 5, 9}) == 2);
  CHECK(h_index({0, 0, 0}) == 0);
  CHECK(h_index({}) == 0);
  CHECK(h_index({4, 4, 4, 4}) == 4);
  CHECK(h_index({10, 10}) == 2);
  CHECK(oracle::h_index({0, 1, 2, 5, 9}) == 2);
}

TEST_CASE("trap_score counts other samples only") {
  // Trigrams of s0 appear in 0, 1, 2, 5 and 9 other samples.
  std::vector<std::string> texts = {"a b c d e f g", "b c d"};
  for (int i = 0; i < 2; ++i) texts.push_back("c d e");
  for (int i = 0; i < 5; ++i) texts.push_back("d e f");
  for (int i = 0; i < 9; ++i) texts.push_back("e f g");
  const auto c = corpus_of(texts);
  const auto idx = NGramIndex::build(c, 3);
  CHECK(trap_score(c.samples[0], idx) == 2);
  CHECK(oracle::trap_score([&] {
          std::vector<std::vector<std::string>> d;
          for (const auto& s : c.samples) d.push_back(s.words);
          return d;
        }(),
                           0, 3) == 2);

  const auto lonely = corpus_of({"x y z w", "p q r s"});
  CHECK(trap_score(lonely.samples[0], NGramIndex::build(lonely, 3)) == 0);

  // m n-grams each shared by >= m others saturates at m.
  std::vector<std::string> sat(6, "m1 m2 m3 m4");  // 2 trigrams, 5 other copies
  const auto sc = corpus_of(sat);
  CHECK(trap_score(sc.samples[0], NGramIndex::build(sc, 3)) == 2);

  CHECK_THROWS_AS(trap_score(Sample::make("ghost", "a b c"), idx), InvalidArgument);
  CHECK_THROWS_AS(trap_score(Sample::make("s0", "totally different text"), idx), InvalidArgument);
}

TEST_CASE("duplicate n-grams inside one sample count once") {
  const auto c = corpus_of({"a b a b a b", "a b x"});
  const auto idx = NGramIndex::build(c, 2);
  // s0 has distinct bigrams {a b, b a}; "a b" is in one other sample.
  CHECK(trap_score(c.samples[0], idx) == 1);
}

TEST_CASE("trap_score matches the scanning oracle on random corpora") {
  Rng rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::string> texts;
    const auto docs = 2 + rng.below(12);
    for (std::uint64_t d = 0; d < docs; ++d) texts.push_back(random_text(rng, 1 + rng.below(12), 3 + rng.below(5)));
    const std::size_t n = 1 + rng.below(3);
    const auto c = corpus_of(texts);
    const auto idx = NGramIndex::build(c, n);
    std::vector<std::vector<std::string>> words;
    for (const auto& s : c.samples) words.push_back(s.words);
    const auto scores = trap_scores(c, idx);
    for (std::size_t i = 0; i < c.samples.size(); ++i) REQUIRE(scores[i] == oracle::trap_score(words, i, n));
  }
}

TEST_CASE("removal curves") {
  std::vector<ScoredSample> s = {{"c1", 1.0, Role::clean},  {"c2", 2.0, Role::clean}, {"c3", 3.0, Role::clean},
                                 {"c4", 4.0, Role::clean},  {"p1", 2.5, Role::poison}, {"p2", 5.0, Role::poison},
                                 {"t1", 9.0, Role::target_copy}};
  std::vector<double> scores;
  for (const auto& x : s) scores.push_back(x.score);
  const auto thresholds = sweep_thresholds(scores);
  CHECK(thresholds.front() == -kInf);
  CHECK(thresholds.back() == kInf);
  CHECK(thresholds.size() == scores.size() + 2);

  const auto curve = perplexity_filter_curve(s, thresholds);
  CHECK(curve.points.front().clean_removed_pct == 100.0);
  CHECK(curve.points.front().poison_removed_pct == 100.0);
  CHECK(curve.points.back().clean_removed_pct == 0.0);
  CHECK(curve.points.back().poison_removed_pct == 0.0);
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    CHECK(curve.points[i].clean_removed_pct <= curve.points[i - 1].clean_removed_pct);
    CHECK(curve.points[i].poison_removed_pct <= curve.points[i - 1].poison_removed_pct);
  }
  // Direct count at threshold 2.5: clean {3, 4} and injected {5, 9} exceed it.
  const auto at = perplexity_filter_curve(s, std::vector<double>{2.5});
  CHECK(at.points[0].clean_removed_pct == 50.0);
  CHECK(at.points[0].poison_removed_pct == doctest::Approx(200.0 / 3.0));

  CHECK_THROWS_AS(perplexity_filter_curve({}, thresholds), InvalidArgument);
  CHECK_THROWS_AS(perplexity_filter_curve(s, std::vector<double>{2.0, 1.0}), InvalidArgument);
  CHECK(curve.to_csv().rfind("threshold,clean_removed_pct,poison_removed_pct\n-inf,100,100\n", 0) == 0);
}

TEST_CASE("trap_filter_curve extremes") {
  Rng rng(3);
  Corpus c;
  for (int i = 0; i < 30; ++i) c.samples.push_back(Sample::make("c" + std::to_string(i), random_text(rng, 32, 500)));
  for (int i = 0; i < 3; ++i) {
    c.samples.push_back(Sample::make("p" + std::to_string(i), "shared words appear in every poison " +
                                                                  random_text(rng, 10, 500),
                                     std::nullopt, Role::poison));
  }
  const auto curve = trap_filter_curve(c, 3, std::vector<double>{-1.0, kInf});
  CHECK(curve.points[0] == RemovalPoint{-1.0, 100.0, 100.0});
  CHECK(curve.points[1] == RemovalPoint{kInf, 0.0, 0.0});
}

TEST_CASE("goldfish mask") {
  Rng rng(4);
  SUBCASE("identical contexts give identical decisions") {
    const std::vector<std::int64_t> ctx = {5, 9, 11};
    for (std::int64_t next = 0; next < 50; ++next) {
      const std::vector<std::int64_t> a = {1, 2, 5, 9, 11, next};
      const std::vector<std::int64_t> b = {7, 5, 9, 11, next + 1000};
      CHECK(goldfish_mask(a, 3, 4, 0)[5] == goldfish_mask(b, 3, 4, 0)[4]);
    }
    CHECK(goldfish_hash(1, ctx) == goldfish_hash(1, ctx));
    CHECK(goldfish_hash(1, ctx) != goldfish_hash(2, ctx));
  }
  SUBCASE("k=2 drops about half") {
    std::vector<std::int64_t> ids(20000);
    for (auto& x : ids) x = static_cast<std::int64_t>(rng.below(50000));
    const auto mask = goldfish_mask(ids, 4, 2, 7);
    const double rate = static_cast<double>(std::count(mask.begin(), mask.end(), true)) / (ids.size() - 4);
    CHECK(std::abs(rate - 0.5) < 0.05);
  }
  SUBCASE("short sequences and leading positions are never dropped") {
    const std::vector<std::int64_t> ids = {1, 2, 3};
    const auto m = goldfish_mask(ids, 13, 2, 0);
    CHECK(std::none_of(m.begin(), m.end(), [](bool b) { return b; }));
    std::vector<std::int64_t> long_ids(500);
    for (auto& x : long_ids) x = static_cast<std::int64_t>(rng.below(100));
    const auto lm = goldfish_mask(long_ids, 13, 2, 0);
    for (int i = 0; i < 13; ++i) CHECK_FALSE(lm[i]);
  }
  SUBCASE("a repeated passage gets the same interior mask in two documents") {
    std::vector<std::int64_t> passage(100);
    for (auto& x : passage) x = static_cast<std::int64_t>(rng.below(32000));
    std::vector<std::int64_t> d1(300), d2(450);
    for (auto& x : d1) x = static_cast<std::int64_t>(rng.below(32000));
    for (auto& x : d2) x = static_cast<std::int64_t>(rng.below(32000));
    std::copy(passage.begin(), passage.end(), d1.begin() + 50);
    std::copy(passage.begin(), passage.end(), d2.begin() + 301);
    const auto m1 = goldfish_mask(d1, 13, 4, 99);
    const auto m2 = goldfish_mask(d2, 13, 4, 99);
    for (std::size_t off = 13; off < 100; ++off) CHECK(m1[50 + off] == m2[301 + off]);
  }
  CHECK_THROWS_AS(goldfish_mask(std::vector<std::int64_t>{1}, 0, 4, 0), InvalidArgument);
  CHECK_THROWS_AS(goldfish_mask(std::vector<std::int64_t>{1}, 3, 1, 0), InvalidArgument);
}

TEST_CASE("adjacent-window poisons share c - n target n-grams") {
  const auto& vocab = textgen::stub_vocabulary();
  Rng rng(5);
  std::vector<std::string> words;
  for (int i = 0; i < 32; ++i) words.push_back(vocab[rng.below(vocab.size())]);
  const auto target = corpus::TargetSpec::make(text::join_words(words));
  for (std::size_t c : {3u, 5u, 7u}) {
    const std::size_t n = 3;
    const auto records = poisoncraft::craft(target, {.c = c, .K = 10, .seed = c}, textgen::StubBackend{});
    const auto target_grams = sample_ngrams(Sample::make("t", target.text), n);
    const std::set<std::string> tg(target_grams.begin(), target_grams.end());
    for (std::size_t i = 0; i + 1 < records.size(); ++i) {
      const auto a = sample_ngrams(records[i].sample, n);
      const auto b = sample_ngrams(records[i + 1].sample, n);
      std::set<std::string> sa(a.begin(), a.end());
      std::size_t shared = 0;
      for (const auto& g : b) shared += (sa.count(g) && tg.count(g)) ? 1 : 0;
      CHECK(shared >= c - n);
    }
  }
}
