#include "doctest.h"
#include "parrot/error.hpp"
#include "parrot/run_config.hpp"

using parrot::ConfigError;
using parrot::config::RunConfig;

TEST_CASE("run config round trip") {
  RunConfig c;
  c.attack.c = 7;
  c.attack.rate = 0.02;
  c.eval.seeds = {4, 5};
  c.defense.thresholds = {0.5, 1.5};
  c.paths.reports = {"a/report.json", "b/report.json"};
  const auto back = RunConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(back.attack.c == 7);
  CHECK(*back.attack.rate == 0.02);
  CHECK_FALSE(back.attack.count.has_value());
}

TEST_CASE("partial config keeps defaults") {
  const auto c = RunConfig::from_json(R"({"attack": {"K": 56}})");
  CHECK(c.attack.K == 56);
  CHECK(c.attack.c == 5);
  CHECK(c.eval.seeds == std::vector<std::uint64_t>{0, 1, 2});
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(RunConfig::from_json(R"({"attack": {"bogus": 1}})"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(R"({"nope": {}})"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(R"({"attack": {"c": "five"}})"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json("[1, 2]"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json("{"), ConfigError);

  RunConfig c;
  CHECK_NOTHROW(c.validate());
  c.backend.kind = "grpc";
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = RunConfig{};
  c.defense.goldfish_k = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = RunConfig{};
  c.eval.seeds.clear();
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = RunConfig{};
  c.eval.temperature = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("http backend settings") {
  RunConfig c;
  c.backend.kind = "http";
  CHECK_THROWS_AS(parrot::textgen::make_backend(parrot::config::backend_settings(c)), ConfigError);
  c.backend.endpoint = "http://127.0.0.1:9/v1";
  c.backend.model = "m";
  c.backend.max_in_flight = 3;
  const auto b = parrot::textgen::make_backend(parrot::config::backend_settings(c));
  CHECK(b->max_in_flight() == 3);
}
