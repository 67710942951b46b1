#include "parrot/run_config.hpp"

#include <fmt/format.h>

#include <set>

#include "json.hpp"
#include "parrot/error.hpp"

namespace parrot::config {

namespace {

using nlohmann::ordered_json;

template <class T>
void put(ordered_json& j, const char* key, const T& v) {
  j[key] = v;
}

template <class T>
void put(ordered_json& j, const char* key, const std::optional<T>& v) {
  j[key] = v ? ordered_json(*v) : ordered_json(nullptr);
}

template <class T>
void take(const nlohmann::json& j, T& v) {
  v = j.get<T>();
}

template <class T>
void take(const nlohmann::json& j, std::optional<T>& v) {
  if (j.is_null()) {
    v.reset();
  } else {
    v = j.get<T>();
  }
}

struct Writer {
  ordered_json& j;
  template <class T>
  void operator()(const char* key, T& v) {
    put(j, key, v);
  }
};

struct Reader {
  const nlohmann::json& j;
  std::string section;
  std::set<std::string> seen;
  template <class T>
  void operator()(const char* key, T& v) {
    seen.insert(key);
    if (!j.contains(key)) return;
    try {
      take(j.at(key), v);
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(fmt::format("config key {}.{} has the wrong type", section, key));
    }
  }
};

template <class V>
void fields(BackendSection& s, V&& v) {
  v("kind", s.kind);
  v("endpoint", s.endpoint);
  v("model", s.model);
  v("embedding_model", s.embedding_model);
  v("api_key_env", s.api_key_env);
  v("timeout", s.timeout);
  v("max_in_flight", s.max_in_flight);
  v("max_attempts", s.max_attempts);
}

template <class V>
void fields(AttackSection& s, V&& v) {
  v("c", s.c);
  v("K", s.K);
  v("seed", s.seed);
  v("max_retries", s.max_retries);
  v("min_words", s.min_words);
  v("crop_words", s.crop_words);
  v("rate", s.rate);
  v("count", s.count);
  v("t_copies", s.t_copies);
}

template <class V>
void fields(DefenseSection& s, V&& v) {
  v("ngram_n", s.ngram_n);
  v("thresholds", s.thresholds);
  v("goldfish_h", s.goldfish_h);
  v("goldfish_k", s.goldfish_k);
  v("goldfish_salt", s.goldfish_salt);
}

template <class V>
void fields(EvalSection& s, V&& v) {
  v("n_generations", s.n_generations);
  v("seeds", s.seeds);
  v("temperature", s.temperature);
  v("top_k", s.top_k);
  v("use_embeddings", s.use_embeddings);
  v("min_k_percent", s.min_k_percent);
  v("run_id", s.run_id);
}

template <class V>
void fields(DataSection& s, V&& v) {
  v("words_per_sample", s.words_per_sample);
  v("exclude_book", s.exclude_book);
  v("book_id", s.book_id);
  v("prefix_fraction", s.prefix_fraction);
}

template <class V>
void fields(PathsSection& s, V&& v) {
  v("paragraphs", s.paragraphs);
  v("target", s.target);
  v("clean", s.clean);
  v("poisons", s.poisons);
  v("craft_manifest", s.craft_manifest);
  v("corpus", s.corpus);
  v("paraphrases", s.paraphrases);
  v("reports", s.reports);
  v("labels", s.labels);
  v("out", s.out);
}

template <class V>
void sections(RunConfig& c, V&& v) {
  v("backend", c.backend);
  v("attack", c.attack);
  v("defense", c.defense);
  v("eval", c.eval);
  v("data", c.data);
  v("paths", c.paths);
}

}  // namespace

std::string RunConfig::to_json() const {
  ordered_json j = ordered_json::object();
  RunConfig copy = *this;
  sections(copy, [&](const char* name, auto& section) {
    ordered_json s = ordered_json::object();
    fields(section, Writer{s});
    j[name] = std::move(s);
  });
  return j.dump(2) + "\n";
}

RunConfig RunConfig::from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  std::set<std::string> known;
  sections(c, [&](const char* name, auto& section) {
    known.insert(name);
    if (!j.contains(name)) return;
    const auto& sj = j.at(name);
    if (!sj.is_object()) throw ConfigError(fmt::format("config section {} must be an object", name));
    Reader r{sj, name, {}};
    fields(section, r);
    for (const auto& [key, value] : sj.items()) {
      if (!r.seen.count(key)) throw ConfigError(fmt::format("unknown config key {}.{}", name, key));
    }
  });
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError(fmt::format("unknown config section {}", key));
  }
  return c;
}

void RunConfig::validate() const {
  if (backend.kind != "stub" && backend.kind != "http") {
    throw ConfigError(fmt::format("backend.kind must be stub or http, got {}", backend.kind));
  }
  if (backend.max_in_flight == 0) throw ConfigError("backend.max_in_flight must be positive");
  if (backend.max_attempts < 1) throw ConfigError("backend.max_attempts must be at least 1");
  if (!(backend.timeout > 0)) throw ConfigError("backend.timeout must be positive");
  if (attack.c == 0) throw ConfigError("attack.c must be positive");
  if (attack.K == 0) throw ConfigError("attack.K must be positive");
  if (attack.max_retries < 0) throw ConfigError("attack.max_retries must be non-negative");
  if (defense.ngram_n == 0) throw ConfigError("defense.ngram_n must be positive");
  if (defense.goldfish_h == 0) throw ConfigError("defense.goldfish_h must be positive");
  if (defense.goldfish_k < 2) throw ConfigError("defense.goldfish_k must be at least 2");
  if (eval.n_generations == 0) throw ConfigError("eval.n_generations must be positive");
  if (eval.seeds.empty()) throw ConfigError("eval.seeds must not be empty");
  if (!(eval.min_k_percent > 0 && eval.min_k_percent <= 100)) throw ConfigError("eval.min_k_percent must be in (0, 100]");
  if (!(data.prefix_fraction > 0 && data.prefix_fraction < 1)) throw ConfigError("data.prefix_fraction must be in (0, 1)");
  if (data.words_per_sample == 0) throw ConfigError("data.words_per_sample must be positive");
  try {
    textgen::GenerationParams p;
    p.temperature = eval.temperature;
    p.top_k = eval.top_k;
    p.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

textgen::BackendSettings backend_settings(const RunConfig& config) {
  textgen::BackendSettings s;
  s.kind = config.backend.kind;
  s.stub.max_in_flight = config.backend.max_in_flight;
  s.http.endpoint = config.backend.endpoint;
  s.http.model = config.backend.model;
  s.http.embedding_model = config.backend.embedding_model;
  s.http.api_key_env = config.backend.api_key_env;
  s.http.timeout_seconds = config.backend.timeout;
  s.http.max_in_flight = config.backend.max_in_flight;
  s.http.max_attempts = config.backend.max_attempts;
  return s;
}

}  // namespace parrot::config
