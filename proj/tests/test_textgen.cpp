#include <cmath>
#include <set>

#include "doctest.h"
#include "parrot/error.hpp"
#include "parrot/prompt.hpp"
#include "parrot/text.hpp"
#include "parrot/textgen.hpp"

using namespace parrot;
using namespace parrot::textgen;

TEST_CASE("GenerationParams defaults") {
  GenerationParams p;
  CHECK(p.temperature == 0.7);
  CHECK(p.top_k == 40);
  p.top_k = 0;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
}

TEST_CASE("stub generate is a pure function of prompt and seed") {
  StubBackend stub;
  GenerationParams p;
  p.seed = 12;
  const auto a = stub.generate("Once upon a time", p);
  const auto b = stub.generate("Once upon a time", p);
  CHECK(a.text == b.text);
  p.seed = 13;
  CHECK(stub.generate("Once upon a time", p).text != a.text);
  CHECK(stub.generate("Once upon a different time", p).text != a.text);
}

TEST_CASE("stub embeds the requested span verbatim") {
  StubBackend stub;
  GenerationParams p;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    p.seed = seed;
    const auto out = stub.generate(prompt::verbatim_request("alpha beta gamma"), p);
    CHECK(out.text.find("alpha beta gamma") != std::string::npos);
    const auto words = text::word_tokenize(out.text);
    CHECK(words.size() >= 43);
    CHECK(words.size() <= 67);
    CHECK_FALSE(out.truncated);
  }
}

TEST_CASE("stub continuation respects max_new_tokens") {
  StubBackend stub;
  GenerationParams p;
  p.max_new_tokens = 20;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    p.seed = seed;
    const auto n = text::word_tokenize(stub.generate("prefix words", p).text).size();
    CHECK(n >= 10);
    CHECK(n <= 20);
  }
  p.max_new_tokens = 10;
  const auto capped = stub.generate(prompt::verbatim_request("alpha beta gamma"), p);
  CHECK(capped.truncated);
  CHECK(text::word_tokenize(capped.text).size() == 10);
}

TEST_CASE("stub tokenizer reconstructs text") {
  for (std::string s : {"hello world", "  leading and trailing  ", "one", "tabs\tand\nnewlines", "é  中 x"}) {
    const auto toks = stub_tokenize(s);
    std::string joined;
    for (const auto& t : toks) joined += t;
    CHECK(joined == s);
  }
}

TEST_CASE("stub logprobs") {
  SUBCASE("uniform -ln2 construction") {
    StubBackend stub({.constant_logprob = -std::log(2.0)});
    const auto lp = stub.score_logprobs("a b c d");
    double mean = 0;
    for (double v : lp.logprobs) mean += v;
    mean /= static_cast<double>(lp.size());
    CHECK(std::exp(-mean) == doctest::Approx(2.0).epsilon(1e-12));
  }
  SUBCASE("token count matches a recount of whitespace-led words") {
    StubBackend stub;
    const std::string s = "The quick  brown fox, jumps.";
    const auto lp = stub.score_logprobs(s);
    CHECK(lp.size() == text::word_tokenize(s).size());
    lp.validate();
    for (double v : lp.logprobs) {
      CHECK(v <= -0.25);
      CHECK(v >= -6.0);
    }
    CHECK(stub.score_logprobs(s).logprobs == lp.logprobs);
  }
  SUBCASE("empty text is a precondition violation") {
    StubBackend stub;
    CHECK_THROWS_AS(stub.score_logprobs(""), InvalidArgument);
  }
}

TEST_CASE("stub embeddings") {
  StubBackend stub;
  const auto a = stub.embed("some words here");
  CHECK(a.dim() == 256);
  CHECK(stub.embed("some words here").values == a.values);
  for (double v : a.values) CHECK(std::isfinite(v));
  CHECK_THROWS_AS(stub.embed(""), InvalidArgument);
}

TEST_CASE("stub vocabulary") {
  const auto& v = stub_vocabulary();
  CHECK(v.size() == 5000);
  std::set<std::string> unique(v.begin(), v.end());
  CHECK(unique.size() == 5000);
  for (const auto& w : v) CHECK(text::ascii_lower(w) == w);
}

TEST_CASE("capabilities fail fast") {
  FixedTextBackend fixed("the answer");
  CHECK(fixed.generate("anything", {}).text == "the answer");
  CHECK_THROWS_AS(require(fixed, Capability::logprobs), CapabilityError);
  CHECK_THROWS_AS(fixed.score_logprobs("x"), CapabilityError);
  CHECK_THROWS_AS(fixed.embed("x"), CapabilityError);
  FixedTextBackend empty("");
  CHECK_THROWS_AS(empty.generate("x", {}), EmptyGenerationError);
}

TEST_CASE("make_backend") {
  CHECK(make_backend({})->id() == "stub");
  BackendSettings http;
  http.kind = "http";
  CHECK_THROWS_AS(make_backend(http), ConfigError);
  http.http.endpoint = "http://127.0.0.1:1/v1";
  CHECK_THROWS_AS(make_backend(http), ConfigError);  // no model
  http.http.model = "m";
  CHECK(make_backend(http)->id() == "http:m");
  http.http.endpoint = "127.0.0.1:1";
  CHECK_THROWS_AS(make_backend(http), ConfigError);
  BackendSettings bad;
  bad.kind = "gpu";
  CHECK_THROWS_AS(make_backend(bad), ConfigError);
}
