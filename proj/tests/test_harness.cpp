#include <atomic>

#include "doctest.h"
#include "parrot/harness.hpp"
#include "parrot/rng.hpp"
#include "parrot/text.hpp"

using namespace parrot;
using namespace parrot::harness;

namespace {

std::string numbered(std::size_t n, const std::string& stem = "w") {
  std::vector<std::string> w;
  for (std::size_t i = 0; i < n; ++i) w.push_back(stem + std::to_string(i));
  return text::join_words(w);
}

class FailingBackend final : public textgen::Backend {
 public:
  explicit FailingBackend(std::size_t ok_calls) : ok_(ok_calls) {}
  std::string id() const override { return "failing"; }
  textgen::Capabilities capabilities() const override { return {true, false, false}; }
  std::size_t max_in_flight() const override { return 1; }
  textgen::Completion generate(std::string_view, const textgen::GenerationParams&) const override {
    if (calls_++ >= ok_) throw TransportError("connection refused", 4);
    return {"some words here", false};
  }

 private:
  std::size_t ok_;
  mutable std::atomic<std::size_t> calls_{0};
};

}  // namespace

TEST_CASE("build_prefix") {
  const auto t32 = corpus::TargetSpec::make(numbered(32));
  const auto s = build_prefix(t32);
  CHECK(s.prefix_words == 8);
  CHECK(text::word_tokenize(s.prefix).size() == 8);
  CHECK(text::word_tokenize(s.suffix_ref).size() == 24);
  CHECK(completion_cap(s) == 72);

  const auto s4 = build_prefix(corpus::TargetSpec::make("a b c d"));
  CHECK(s4.prefix == "a");
  CHECK(s4.suffix_ref == "b c d");

  CHECK_THROWS_AS(build_prefix(corpus::TargetSpec::make("a b c")), InvalidArgument);
  CHECK_THROWS_AS(build_prefix(corpus::TargetSpec::make("a b c d e", {}, 0.1)), InvalidArgument);

  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = 4 + rng.below(60);
    const auto t = corpus::TargetSpec::make(numbered(n), {}, 0.25 + 0.5 * rng.unit());
    const auto sp = build_prefix(t);
    auto joined = text::word_tokenize(sp.prefix);
    const auto tail = text::word_tokenize(sp.suffix_ref);
    joined.insert(joined.end(), tail.begin(), tail.end());
    CHECK(joined == t.words);
  }
}

TEST_CASE("evaluate_memorization") {
  const auto target = corpus::TargetSpec::make(numbered(32), "book-1");
  const auto split = build_prefix(target);
  const EvalOptions opts{.n_generations = 20, .seeds = {0, 1}, .use_embeddings = true, .run_id = "t"};

  SUBCASE("echo oracle scores 1") {
    const auto r = evaluate_memorization(textgen::FixedTextBackend(split.suffix_ref), target, opts);
    CHECK(r.status == "complete");
    CHECK(r.max.rouge_l == 1.0);
    CHECK(r.max.edit_sim == 1.0);
    CHECK(r.avg.rouge_l == 1.0);
    CHECK(r.avg.edit_sim == 1.0);
    CHECK_FALSE(r.max.embed_cos.has_value());
    CHECK(r.runs.size() == 2);
    CHECK(r.runs[0].per_generation.size() == 20);
    CHECK(r.params.max_new_tokens == 72);
  }
  SUBCASE("disjoint vocabulary scores 0 rouge") {
    const auto r = evaluate_memorization(textgen::FixedTextBackend(numbered(24, "zz")), target, opts);
    CHECK(r.max.rouge_l == 0.0);
    CHECK(r.avg.rouge_l == 0.0);
    CHECK(r.max.edit_sim < 1.0);
  }
  SUBCASE("stub runs are deterministic and embed") {
    const textgen::StubBackend stub;
    const auto a = evaluate_memorization(stub, target, opts);
    const auto b = evaluate_memorization(stub, target, opts);
    CHECK(a.to_json() == b.to_json());
    CHECK(a.max.embed_cos.has_value());
    CHECK(a.max.rouge_l >= a.avg.rouge_l);
    CHECK(a.max.rouge_l < 0.5);
  }
  SUBCASE("backend failure gives an invalid partial report") {
    bool thrown = false;
    try {
      evaluate_memorization(FailingBackend(5), target, opts);
    } catch (const EvaluationAborted& e) {
      thrown = true;
      CHECK(e.partial().status == "invalid");
      CHECK(e.partial().error.has_value());
      const auto back = MetricReport::from_json(e.partial().to_json());
      CHECK(back.status == "invalid");
    }
    CHECK(thrown);
  }
  SUBCASE("empty seed list or zero generations is rejected") {
    const textgen::StubBackend stub;
    CHECK_THROWS_AS(evaluate_memorization(stub, target, {.n_generations = 0}), InvalidArgument);
    CHECK_THROWS_AS(evaluate_memorization(stub, target, {.n_generations = 2, .seeds = {}}), InvalidArgument);
  }
}

TEST_CASE("report serialization round trip") {
  const textgen::StubBackend stub;
  const auto target = corpus::TargetSpec::make(numbered(32));
  const auto r = evaluate_memorization(stub, target, {.n_generations = 5, .seeds = {3}, .run_id = "rt"});
  const auto back = MetricReport::from_json(r.to_json());
  CHECK(back.to_json() == r.to_json());
  CHECK(back.run_id == "rt");
  const auto csv = r.summary_csv();
  CHECK(csv.find("\nrt,complete,mean,5,") != std::string::npos);
  CHECK_THROWS(MetricReport::from_json("{\"schema_version\": 99}"));
}

TEST_CASE("stealthiness_report") {
  const textgen::StubBackend stub;
  const auto target = corpus::TargetSpec::make(numbered(32, "t"));
  const auto poisons = poisoncraft::craft(target, {.c = 8, .K = 6}, stub);
  std::vector<corpus::Sample> clean;
  for (int i = 0; i < 5; ++i) clean.push_back(corpus::Sample::make("c" + std::to_string(i), numbered(32, "q")));
  const std::vector<std::string> para = {target.text};
  const auto r = stealthiness_report(poisons, clean, para, target, &stub);
  REQUIRE(r.groups.size() == 3);
  CHECK(r.groups[0].group == "clean");
  CHECK(r.groups[1].group == "poison_c8");
  CHECK(r.groups[2].group == "paraphrase");
  CHECK(r.groups[1].rouge_l.mean > r.groups[0].rouge_l.mean);
  CHECK(r.groups[2].rouge_l.mean == 1.0);
  CHECK(r.groups[2].edit_sim.mean == 1.0);
  CHECK(r.groups[2].rouge_l.std == 0.0);
  CHECK(r.groups[2].embed_cos->mean == doctest::Approx(1.0));
  CHECK(r.to_csv().rfind("group,", 0) == 0);
  const auto no_embed = stealthiness_report(poisons, clean, {}, target);
  CHECK(no_embed.groups.size() == 2);
  CHECK_FALSE(no_embed.groups[0].embed_cos.has_value());
}

TEST_CASE("compare_runs") {
  const auto target = corpus::TargetSpec::make(numbered(32));
  const auto split = build_prefix(target);
  const auto echo = evaluate_memorization(textgen::FixedTextBackend(split.suffix_ref), target, {.n_generations = 3, .seeds = {0}});
  const auto stub = evaluate_memorization(textgen::StubBackend{}, target, {.n_generations = 3, .seeds = {0, 1}});
  const std::vector<MetricReport> reports = {echo, stub};
  const std::vector<std::string> labels = {"echo", "stub"};
  const auto table = compare_runs(reports, labels);
  REQUIRE(table.rows.size() == 2);
  CHECK(table.rows[0].max.rouge_l == 1.0);
  CHECK(table.rows[1].seed_count == 2);
  CHECK(table.to_csv().find("NA") != std::string::npos);
  CHECK(table.to_text().find("absent") != std::string::npos);

  const std::vector<MetricReport> one = {echo};
  const std::vector<std::string> one_label = {"x"};
  CHECK_THROWS_AS(compare_runs(one, one_label), InvalidArgument);
  CHECK_THROWS_AS(compare_runs(reports, one_label), InvalidArgument);
  const std::vector<std::string> dup = {"a", "a"};
  CHECK_THROWS_AS(compare_runs(reports, dup), InvalidArgument);
}
