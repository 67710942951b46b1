#include <fmt/format.h>

#include <functional>
#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "json.hpp"
#include "parrot/corpus.hpp"
#include "parrot/defense.hpp"
#include "parrot/error.hpp"
#include "parrot/harness.hpp"
#include "parrot/io.hpp"
#include "parrot/membership.hpp"
#include "parrot/poisoncraft.hpp"
#include "parrot/rng.hpp"
#include "parrot/run_config.hpp"
#include "parrot/text.hpp"

namespace fs = std::filesystem;
using parrot::config::RunConfig;
using ojson = nlohmann::ordered_json;

namespace {

// Flags parse into a scratch RunConfig; only flags actually given are copied
// over the config file values.
class Binder {
 public:
  Binder(CLI::App* app, RunConfig& scratch) : app_(app), scratch_(scratch) {}

  template <class Get>
  CLI::Option* add(const std::string& name, Get get, const std::string& key, const std::string& desc) {
    auto* opt = app_->add_option(name, get(scratch_), fmt::format("{} [config: {}]", desc, key));
    overrides_.emplace_back(opt, [get, this](RunConfig& c) { get(c) = get(scratch_); });
    return opt;
  }

  template <class Get>
  CLI::Option* add_flag(const std::string& name, Get get, const std::string& key, const std::string& desc) {
    auto* opt = app_->add_flag(name, get(scratch_), fmt::format("{} [config: {}]", desc, key));
    overrides_.emplace_back(opt, [get, this](RunConfig& c) { get(c) = get(scratch_); });
    return opt;
  }

  void apply(RunConfig& c) const {
    for (const auto& [opt, fn] : overrides_) {
      if (opt->count() > 0) fn(c);
    }
  }

  bool given(const std::string& name) const { return app_->get_option(name)->count() > 0; }

 private:
  CLI::App* app_;
  RunConfig& scratch_;
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> overrides_;
};

struct Command {
  CLI::App* app = nullptr;
  std::unique_ptr<RunConfig> scratch;
  std::unique_ptr<Binder> binder;
  std::string config_path;
  std::function<void(RunConfig&, const Binder&)> run;
};

const std::string& need(const std::string& value, const char* key) {
  if (value.empty()) throw parrot::ConfigError(fmt::format("missing required setting {}", key));
  return value;
}

parrot::corpus::TargetSpec load_target(const RunConfig& c) {
  const auto raw = parrot::io::read_file(need(c.paths.target, "paths.target"));
  return parrot::corpus::TargetSpec::make(parrot::text::join_words(parrot::text::word_tokenize(raw)), c.data.book_id,
                                          c.data.prefix_fraction);
}

std::unique_ptr<parrot::textgen::Backend> load_backend(const RunConfig& c) {
  return parrot::textgen::make_backend(parrot::config::backend_settings(c));
}

parrot::textgen::GenerationParams params_of(const RunConfig& c) {
  parrot::textgen::GenerationParams p;
  p.temperature = c.eval.temperature;
  p.top_k = c.eval.top_k;
  return p;
}

ojson config_json(const RunConfig& c) { return ojson::parse(c.to_json()); }

// Adds the resolved config to a JSON document.
std::string with_config(const std::string& json, const RunConfig& c) {
  auto j = ojson::parse(json);
  j["config"] = config_json(c);
  return j.dump(2) + "\n";
}

fs::path out_dir(const RunConfig& c) { return fs::path(need(c.paths.out, "paths.out")); }

void write_out(const RunConfig& c, const std::string& name, const std::string& contents) {
  parrot::io::write_file(out_dir(c) / name, contents);
}

std::vector<double> thresholds_for(const RunConfig& c, const std::vector<double>& scores) {
  if (!c.defense.thresholds.empty()) return c.defense.thresholds;
  return parrot::defense::sweep_thresholds(scores);
}

std::string scores_csv(const std::vector<parrot::defense::ScoredSample>& scored) {
  std::string out = "sample_id,score,role\n";
  for (const auto& s : scored) {
    out += fmt::format("{},{},{}\n", parrot::io::csv_field(s.sample_id), parrot::io::format_real(s.score),
                       parrot::corpus::to_string(s.role));
  }
  return out;
}

// --- subcommands ----------------------------------------------------------

void run_prepare(const RunConfig& c) {
  const auto paragraphs = parrot::corpus::read_paragraphs(need(c.paths.paragraphs, "paths.paragraphs"));
  parrot::corpus::Corpus corpus;
  corpus.samples = parrot::corpus::segment_paragraphs(paragraphs, c.data.words_per_sample);
  if (!c.data.exclude_book.empty()) corpus = parrot::corpus::exclude_book(corpus, c.data.exclude_book);
  parrot::corpus::write_samples(out_dir(c) / "clean.jsonl", corpus.samples);
  std::cerr << fmt::format("prepare: {} samples\n", corpus.samples.size());
}

void run_craft(const RunConfig& c) {
  const auto target = load_target(c);
  const auto backend = load_backend(c);
  parrot::poisoncraft::CraftOptions opts;
  opts.c = c.attack.c;
  opts.K = c.attack.K;
  opts.seed = c.attack.seed;
  opts.max_retries = c.attack.max_retries;
  opts.min_words = c.attack.min_words;
  opts.crop_words = c.attack.crop_words;
  const auto params = params_of(c);
  const auto records = parrot::poisoncraft::craft(target, opts, *backend, params);
  parrot::corpus::write_samples(out_dir(c) / "poisons.jsonl", parrot::poisoncraft::samples_of(records));
  write_out(c, "craft_manifest.json",
            with_config(parrot::poisoncraft::craft_manifest_json(target, opts, params, records), c));
  std::cerr << fmt::format("craft: {} poisons\n", records.size());
}

void run_inject(RunConfig& c, const Binder& b) {
  // A rate or count given on the command line replaces the other from the file.
  if (b.given("--rate") && b.given("--count")) throw parrot::ConfigError("--rate and --count are mutually exclusive");
  if (b.given("--rate")) c.attack.count.reset();
  if (b.given("--count")) c.attack.rate.reset();
  if (c.attack.rate && c.attack.count) throw parrot::ConfigError("attack.rate and attack.count are mutually exclusive");

  parrot::corpus::Corpus base;
  base.samples = parrot::corpus::read_samples(need(c.paths.clean, "paths.clean"));
  std::vector<parrot::corpus::Sample> additions;
  parrot::corpus::InjectAmount amount;
  if (c.attack.t_copies > 0) {
    if (c.attack.rate || c.attack.count) throw parrot::ConfigError("attack.t_copies excludes attack.rate and attack.count");
    additions = parrot::corpus::make_t_copies(load_target(c), c.attack.t_copies);
    amount = parrot::corpus::InjectCount{c.attack.t_copies};
  } else {
    additions = parrot::corpus::read_samples(need(c.paths.poisons, "paths.poisons"));
    if (c.attack.count) {
      amount = parrot::corpus::InjectCount{*c.attack.count};
    } else if (c.attack.rate) {
      amount = parrot::corpus::InjectRate{*c.attack.rate};
    } else {
      throw parrot::ConfigError("inject needs attack.rate, attack.count, or attack.t_copies");
    }
  }
  const auto poisoned = parrot::corpus::inject(base, additions, amount, c.attack.seed);
  parrot::corpus::write_samples(out_dir(c) / "corpus.jsonl", poisoned.samples);
  write_out(c, "manifest.json", with_config(parrot::corpus::manifest_to_json(*poisoned.manifest), c));
  std::cerr << fmt::format("inject: {} samples, {} injected\n", poisoned.samples.size(), poisoned.manifest->count);
}

int run_eval(const RunConfig& c) {
  const auto target = load_target(c);
  const auto backend = load_backend(c);
  parrot::harness::EvalOptions opts;
  opts.n_generations = c.eval.n_generations;
  opts.seeds = c.eval.seeds;
  opts.use_embeddings = c.eval.use_embeddings;
  opts.run_id = c.eval.run_id;
  auto emit = [&](const parrot::harness::MetricReport& r) {
    write_out(c, "report.json", with_config(r.to_json(), c));
    write_out(c, "summary.csv", r.summary_csv());
  };
  try {
    const auto report = parrot::harness::evaluate_memorization(*backend, target, opts, params_of(c));
    emit(report);
    std::cerr << fmt::format("eval: max rouge_l {} edit_sim {}\n", parrot::io::format_real(report.max.rouge_l),
                             parrot::io::format_real(report.max.edit_sim));
    return 0;
  } catch (const parrot::harness::EvaluationAborted& e) {
    emit(e.partial());
    std::cerr << "eval aborted: " << e.what() << "\n";
    return 1;
  }
}

void run_compare(const RunConfig& c) {
  std::vector<parrot::harness::MetricReport> reports;
  for (const auto& p : c.paths.reports) reports.push_back(parrot::harness::MetricReport::from_json(parrot::io::read_file(p)));
  std::vector<std::string> labels = c.paths.labels;
  if (labels.empty()) {
    for (const auto& p : c.paths.reports) labels.push_back(fs::path(p).parent_path().filename().string());
  }
  const auto table = parrot::harness::compare_runs(reports, labels);
  write_out(c, "comparison.csv", table.to_csv());
  write_out(c, "comparison.txt", table.to_text());
  std::cout << table.to_text();
}

void run_mia(const RunConfig& c) {
  const auto corpus = parrot::corpus::read_samples(need(c.paths.corpus, "paths.corpus"));
  if (corpus.empty()) throw parrot::InvalidArgument("mia: corpus is empty");
  const auto target = load_target(c);
  const auto backend = load_backend(c);
  const parrot::membership::MiaOptions opts{c.eval.min_k_percent};

  std::string csv = "sample_id,method,value,role\n";
  std::array<std::vector<double>, 4> member_scores;
  for (const auto& s : corpus) {
    const auto scores = parrot::membership::score_text(*backend, s.text, opts);
    for (std::size_t m = 0; m < scores.size(); ++m) {
      member_scores[m].push_back(scores[m]);
      csv += fmt::format("{},{},{},{}\n", parrot::io::csv_field(s.id),
                         parrot::membership::to_string(parrot::membership::kAllMethods[m]),
                         parrot::io::format_real(scores[m]), parrot::corpus::to_string(s.role));
    }
  }
  const auto target_scores = parrot::membership::score_text(*backend, target.text, opts);
  ojson methods = ojson::object();
  for (std::size_t m = 0; m < target_scores.size(); ++m) {
    const auto name = std::string(parrot::membership::to_string(parrot::membership::kAllMethods[m]));
    csv += fmt::format("target,{},{},target\n", name, parrot::io::format_real(target_scores[m]));
    const auto cal = parrot::membership::calibrate(member_scores[m], target_scores[m]);
    methods[name] = {{"threshold", cal.threshold},
                     {"recall", cal.recall},
                     {"target_score", cal.target_score},
                     {"member_count", cal.member_count},
                     {"members_detected", cal.members_detected}};
  }
  write_out(c, "scores.csv", csv);
  ojson j;
  j["methods"] = methods;
  j["config"] = config_json(c);
  write_out(c, "calibration.json", j.dump(2) + "\n");
}

void run_defend_ppl(const RunConfig& c) {
  const auto corpus = parrot::corpus::read_samples(need(c.paths.corpus, "paths.corpus"));
  const auto backend = load_backend(c);
  parrot::textgen::require(*backend, parrot::textgen::Capability::logprobs);
  std::vector<parrot::defense::ScoredSample> scored;
  std::vector<double> values;
  for (const auto& s : corpus) {
    const double ppl = parrot::membership::perplexity(backend->score_logprobs(s.text));
    scored.push_back({s.id, ppl, s.role});
    values.push_back(ppl);
  }
  const auto curve = parrot::defense::perplexity_filter_curve(scored, thresholds_for(c, values));
  write_out(c, "ppl_scores.csv", scores_csv(scored));
  write_out(c, "ppl_curve.csv", curve.to_csv());
}

void run_defend_trap(const RunConfig& c) {
  parrot::corpus::Corpus corpus;
  corpus.samples = parrot::corpus::read_samples(need(c.paths.corpus, "paths.corpus"));
  const auto index = parrot::defense::NGramIndex::build(corpus, c.defense.ngram_n);
  const auto scores = parrot::defense::trap_scores(corpus, index);
  std::vector<parrot::defense::ScoredSample> scored;
  std::vector<double> values;
  for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
    const auto v = static_cast<double>(scores[i]);
    scored.push_back({corpus.samples[i].id, v, corpus.samples[i].role});
    values.push_back(v);
  }
  const auto curve = parrot::defense::removal_curve(scored, thresholds_for(c, values));
  write_out(c, "trap_scores.csv", scores_csv(scored));
  write_out(c, "trap_curve.csv", curve.to_csv());
}

void run_goldfish(const RunConfig& c) {
  const auto corpus = parrot::corpus::read_samples(need(c.paths.corpus, "paths.corpus"));
  std::string out;
  for (const auto& s : corpus) {
    std::vector<std::int64_t> ids;
    for (const auto& w : s.words) ids.push_back(static_cast<std::int64_t>(parrot::fnv1a64(w.data(), w.size()) >> 1));
    const auto mask =
        parrot::defense::goldfish_mask(ids, c.defense.goldfish_h, c.defense.goldfish_k, c.defense.goldfish_salt);
    std::vector<std::size_t> dropped;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask[i]) dropped.push_back(i);
    }
    ojson j;
    j["id"] = s.id;
    j["n_tokens"] = ids.size();
    j["dropped"] = dropped;
    out += j.dump() + "\n";
  }
  write_out(c, "goldfish_mask.jsonl", out);
}

void run_stealth(const RunConfig& c) {
  const auto target = load_target(c);
  const auto poison_path = fs::path(need(c.paths.poisons, "paths.poisons"));
  const auto manifest_path =
      c.paths.craft_manifest.empty() ? poison_path.parent_path() / "craft_manifest.json" : fs::path(c.paths.craft_manifest);
  const auto poisons = parrot::poisoncraft::records_from_manifest(parrot::io::read_file(manifest_path),
                                                                  parrot::corpus::read_samples(poison_path));
  const auto clean = parrot::corpus::read_samples(need(c.paths.clean, "paths.clean"));
  std::vector<std::string> paraphrases;
  if (!c.paths.paraphrases.empty()) {
    const auto raw = parrot::io::read_file(c.paths.paraphrases);
    std::size_t pos = 0;
    while (pos < raw.size()) {
      auto end = raw.find('\n', pos);
      if (end == std::string::npos) end = raw.size();
      auto line = raw.substr(pos, end - pos);
      if (!parrot::text::word_tokenize(line).empty()) paraphrases.push_back(std::move(line));
      pos = end + 1;
    }
  }
  std::unique_ptr<parrot::textgen::Backend> backend;
  if (c.eval.use_embeddings) {
    backend = load_backend(c);
    if (!backend->capabilities().has(parrot::textgen::Capability::embed)) backend.reset();
  }
  const auto report = parrot::harness::stealthiness_report(poisons, clean, paraphrases, target, backend.get());
  write_out(c, "stealth.csv", report.to_csv());
  write_out(c, "stealth.txt", report.to_table());
  std::cout << report.to_table();
}

// --- option groups --------------------------------------------------------

void backend_flags(Binder& b) {
  b.add("--backend", [](RunConfig& c) -> auto& { return c.backend.kind; }, "backend.kind", "stub or http")
      ->check(CLI::IsMember({"stub", "http"}));
  b.add("--endpoint", [](RunConfig& c) -> auto& { return c.backend.endpoint; }, "backend.endpoint",
        "OpenAI-compatible base URL, e.g. http://127.0.0.1:8000/v1");
  b.add("--model", [](RunConfig& c) -> auto& { return c.backend.model; }, "backend.model", "model name");
  b.add("--embedding-model", [](RunConfig& c) -> auto& { return c.backend.embedding_model; },
        "backend.embedding_model", "embedding model name (defaults to --model)");
  b.add("--api-key-env", [](RunConfig& c) -> auto& { return c.backend.api_key_env; }, "backend.api_key_env",
        "environment variable holding the API key");
  b.add("--timeout", [](RunConfig& c) -> auto& { return c.backend.timeout; }, "backend.timeout",
        "request timeout in seconds");
  b.add("--max-in-flight", [](RunConfig& c) -> auto& { return c.backend.max_in_flight; }, "backend.max_in_flight",
        "concurrent request limit");
  b.add("--max-attempts", [](RunConfig& c) -> auto& { return c.backend.max_attempts; }, "backend.max_attempts",
        "attempts per request before giving up");
}

void target_flags(Binder& b) {
  b.add("--target", [](RunConfig& c) -> auto& { return c.paths.target; }, "paths.target", "target text file");
  b.add("--book-id", [](RunConfig& c) -> auto& { return c.data.book_id; }, "data.book_id", "book id of the target");
}

void generation_flags(Binder& b) {
  b.add("--temperature", [](RunConfig& c) -> auto& { return c.eval.temperature; }, "eval.temperature",
        "sampling temperature");
  b.add("--top-k", [](RunConfig& c) -> auto& { return c.eval.top_k; }, "eval.top_k", "top-k sampling cutoff");
}

void seed_flag(Binder& b) {
  b.add("--seed", [](RunConfig& c) -> auto& { return c.attack.seed; }, "attack.seed", "random seed");
}

void threshold_flag(Binder& b) {
  b.add("--thresholds", [](RunConfig& c) -> auto& { return c.defense.thresholds; }, "defense.thresholds",
        "explicit ascending thresholds (default: sweep all distinct scores)");
}

void corpus_flag(Binder& b) {
  b.add("--corpus", [](RunConfig& c) -> auto& { return c.paths.corpus; }, "paths.corpus", "corpus JSONL");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Targeted data poisoning toolkit: craft, inject, evaluate, defend"};
  app.require_subcommand(1);
  std::vector<std::unique_ptr<Command>> commands;

  auto command = [&](const std::string& name, const std::string& desc) -> Command& {
    auto cmd = std::make_unique<Command>();
    cmd->app = app.add_subcommand(name, desc);
    cmd->scratch = std::make_unique<RunConfig>();
    cmd->binder = std::make_unique<Binder>(cmd->app, *cmd->scratch);
    cmd->app->add_option("--config", cmd->config_path, "JSON run config; flags override its values")
        ->check(CLI::ExistingFile);
    cmd->binder->add("--out", [](RunConfig& c) -> auto& { return c.paths.out; }, "paths.out", "output directory");
    commands.push_back(std::move(cmd));
    return *commands.back();
  };

  {
    auto& cmd = command("prepare", "Segment paragraphs into fixed-length clean samples");
    auto& b = *cmd.binder;
    b.add("--paragraphs", [](RunConfig& c) -> auto& { return c.paths.paragraphs; }, "paths.paragraphs",
          "paragraph JSONL with text and optional book_id");
    b.add("--words-per-sample", [](RunConfig& c) -> auto& { return c.data.words_per_sample; },
          "data.words_per_sample", "words per sample");
    b.add("--exclude-book", [](RunConfig& c) -> auto& { return c.data.exclude_book; }, "data.exclude_book",
          "drop samples from this book");
    cmd.run = [](RunConfig& c, const Binder&) { run_prepare(c); };
  }
  {
    auto& cmd = command("craft", "Generate poison samples from target c-grams");
    auto& b = *cmd.binder;
    target_flags(b);
    backend_flags(b);
    generation_flags(b);
    seed_flag(b);
    b.add("--c", [](RunConfig& c) -> auto& { return c.attack.c; }, "attack.c", "c-gram length");
    b.add("--K", [](RunConfig& c) -> auto& { return c.attack.K; }, "attack.K", "number of poisons");
    b.add("--max-retries", [](RunConfig& c) -> auto& { return c.attack.max_retries; }, "attack.max_retries",
          "retries per poison");
    b.add("--min-words", [](RunConfig& c) -> auto& { return c.attack.min_words; }, "attack.min_words",
          "minimum generated words");
    b.add("--crop-words", [](RunConfig& c) -> auto& { return c.attack.crop_words; }, "attack.crop_words",
          "crop length around the c-gram");
    cmd.run = [](RunConfig& c, const Binder&) { run_craft(c); };
  }
  {
    auto& cmd = command("inject", "Insert poisons or target copies into a clean corpus");
    auto& b = *cmd.binder;
    seed_flag(b);
    target_flags(b);
    b.add("--clean", [](RunConfig& c) -> auto& { return c.paths.clean; }, "paths.clean", "clean sample JSONL");
    b.add("--poisons", [](RunConfig& c) -> auto& { return c.paths.poisons; }, "paths.poisons", "poison JSONL");
    b.add("--rate", [](RunConfig& c) -> auto& { return c.attack.rate; }, "attack.rate",
          "poison rate relative to the clean count");
    b.add("--count", [](RunConfig& c) -> auto& { return c.attack.count; }, "attack.count", "exact poison count");
    b.add("--t-copies", [](RunConfig& c) -> auto& { return c.attack.t_copies; }, "attack.t_copies",
          "inject this many exact target copies instead of poisons");
    cmd.run = [](RunConfig& c, const Binder& binder) { run_inject(c, binder); };
  }
  int eval_status = 0;
  {
    auto& cmd = command("eval", "Measure memorization of the target from prefix completions");
    auto& b = *cmd.binder;
    target_flags(b);
    backend_flags(b);
    generation_flags(b);
    b.add("--n-generations", [](RunConfig& c) -> auto& { return c.eval.n_generations; }, "eval.n_generations",
          "completions per seed");
    b.add("--seeds", [](RunConfig& c) -> auto& { return c.eval.seeds; }, "eval.seeds", "generation seeds")
        ->delimiter(',');
    b.add("--prefix-fraction", [](RunConfig& c) -> auto& { return c.data.prefix_fraction; }, "data.prefix_fraction",
          "share of target words used as the prompt");
    b.add("--use-embeddings", [](RunConfig& c) -> auto& { return c.eval.use_embeddings; }, "eval.use_embeddings",
          "score embedding cosine when the backend supports it");
    b.add("--run-id", [](RunConfig& c) -> auto& { return c.eval.run_id; }, "eval.run_id", "report run id");
    cmd.run = [&eval_status](RunConfig& c, const Binder&) { eval_status = run_eval(c); };
  }
  {
    auto& cmd = command("compare", "Tabulate several eval reports side by side");
    auto& b = *cmd.binder;
    b.add("--report", [](RunConfig& c) -> auto& { return c.paths.reports; }, "paths.reports", "report.json files");
    b.add("--label", [](RunConfig& c) -> auto& { return c.paths.labels; }, "paths.labels",
          "one label per report (default: report directory names)");
    cmd.run = [](RunConfig& c, const Binder&) { run_compare(c); };
  }
  {
    auto& cmd = command("mia", "Score corpus samples and the target with membership-inference heuristics");
    auto& b = *cmd.binder;
    corpus_flag(b);
    target_flags(b);
    backend_flags(b);
    b.add("--min-k-percent", [](RunConfig& c) -> auto& { return c.eval.min_k_percent; }, "eval.min_k_percent",
          "k for Min-K% Prob");
    cmd.run = [](RunConfig& c, const Binder&) { run_mia(c); };
  }
  {
    auto& cmd = command("defend-ppl", "Perplexity-filter removal curve");
    auto& b = *cmd.binder;
    corpus_flag(b);
    backend_flags(b);
    threshold_flag(b);
    cmd.run = [](RunConfig& c, const Binder&) { run_defend_ppl(c); };
  }
  {
    auto& cmd = command("defend-trap", "N-gram sharing (h-index) removal curve");
    auto& b = *cmd.binder;
    corpus_flag(b);
    threshold_flag(b);
    b.add("--ngram-n", [](RunConfig& c) -> auto& { return c.defense.ngram_n; }, "defense.ngram_n", "n-gram length");
    cmd.run = [](RunConfig& c, const Binder&) { run_defend_trap(c); };
  }
  {
    auto& cmd = command("goldfish-mask", "Per-sample goldfish loss drop positions");
    auto& b = *cmd.binder;
    corpus_flag(b);
    b.add("--goldfish-h", [](RunConfig& c) -> auto& { return c.defense.goldfish_h; }, "defense.goldfish_h",
          "context width hashed per token");
    b.add("--goldfish-k", [](RunConfig& c) -> auto& { return c.defense.goldfish_k; }, "defense.goldfish_k",
          "drop one token in k");
    b.add("--goldfish-salt", [](RunConfig& c) -> auto& { return c.defense.goldfish_salt; }, "defense.goldfish_salt",
          "hash salt");
    cmd.run = [](RunConfig& c, const Binder&) { run_goldfish(c); };
  }
  {
    auto& cmd = command("stealth", "Similarity of clean, poison, and paraphrase groups to the target");
    auto& b = *cmd.binder;
    target_flags(b);
    backend_flags(b);
    b.add("--poisons", [](RunConfig& c) -> auto& { return c.paths.poisons; }, "paths.poisons", "poison JSONL");
    b.add("--craft-manifest", [](RunConfig& c) -> auto& { return c.paths.craft_manifest; }, "paths.craft_manifest",
          "craft manifest (default: next to the poisons)");
    b.add("--clean", [](RunConfig& c) -> auto& { return c.paths.clean; }, "paths.clean", "clean sample JSONL");
    b.add("--paraphrases", [](RunConfig& c) -> auto& { return c.paths.paraphrases; }, "paths.paraphrases",
          "text file, one paraphrase per line");
    b.add("--use-embeddings", [](RunConfig& c) -> auto& { return c.eval.use_embeddings; }, "eval.use_embeddings",
          "add embedding cosine when the backend supports it");
    cmd.run = [](RunConfig& c, const Binder&) { run_stealth(c); };
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  for (auto& cmd : commands) {
    if (!cmd->app->parsed()) continue;
    try {
      RunConfig config;
      if (!cmd->config_path.empty()) config = RunConfig::from_json(parrot::io::read_file(cmd->config_path));
      cmd->binder->apply(config);
      config.validate();
      cmd->run(config, *cmd->binder);
      parrot::io::write_file(out_dir(config) / "run_config.json", config.to_json());
      return eval_status;
    } catch (const parrot::ConfigError& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
  }
  return 1;
}
