#include "parrot/harness.hpp"

#include <fmt/format.h>

#include <cmath>
#include <map>
#include <set>

#include "json.hpp"
#include "parrot/io.hpp"
#include "parrot/parallel.hpp"
#include "parrot/rng.hpp"

namespace parrot::harness {

using ordered_json = nlohmann::ordered_json;
using simmetrics::SimilarityScores;

namespace {

ordered_json scores_to_json(const SimilarityScores& s) {
  return {{"rouge_l", s.rouge_l},
          {"edit_sim", s.edit_sim},
          {"embed_cos", s.embed_cos ? ordered_json(*s.embed_cos) : ordered_json(nullptr)}};
}

SimilarityScores scores_from_json(const nlohmann::json& j) {
  SimilarityScores s;
  s.rouge_l = j.at("rouge_l").get<double>();
  s.edit_sim = j.at("edit_sim").get<double>();
  if (j.contains("embed_cos") && !j.at("embed_cos").is_null()) s.embed_cos = j.at("embed_cos").get<double>();
  return s;
}

std::string optional_real(const std::optional<double>& v) { return v ? io::format_real(*v) : "NA"; }

// Component-wise mean of per-seed aggregates.
void finalize(MetricReport& report) {
  if (report.runs.empty()) return;
  std::vector<SimilarityScores> maxes, avgs;
  for (const auto& run : report.runs) {
    maxes.push_back(run.max);
    avgs.push_back(run.avg);
  }
  report.max = simmetrics::aggregate(maxes, simmetrics::Aggregate::avg);
  report.avg = simmetrics::aggregate(avgs, simmetrics::Aggregate::avg);
}

MetricStats stats_of(const std::vector<double>& values) {
  MetricStats s;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(var / static_cast<double>(values.size()));
  return s;
}

}  // namespace

PrefixSplit build_prefix(const corpus::TargetSpec& target) {
  const std::size_t n = target.words.size();
  if (n < 4) throw InvalidArgument("target must have at least 4 words");
  const auto k = static_cast<std::size_t>(std::floor(target.prefix_fraction * static_cast<double>(n)));
  if (k == 0 || k >= n) throw InvalidArgument("prefix fraction leaves an empty prefix or suffix");
  return {text::join_words(target.words, 0, k), text::join_words(target.words, k, n), k};
}

int completion_cap(const PrefixSplit& split) {
  return static_cast<int>(3 * text::word_tokenize(split.suffix_ref).size());
}

MetricReport evaluate_memorization(const textgen::Backend& backend, const corpus::TargetSpec& target,
                                   const EvalOptions& options, textgen::GenerationParams params) {
  if (options.n_generations == 0) throw InvalidArgument("n_generations must be >= 1");
  if (options.seeds.empty()) throw InvalidArgument("at least one seed is required");
  textgen::require(backend, textgen::Capability::generate);

  const PrefixSplit split = build_prefix(target);
  const auto reference = text::word_tokenize(split.suffix_ref);
  params.max_new_tokens = completion_cap(split);
  params.seed.reset();
  params.validate();

  MetricReport report;
  report.run_id = options.run_id;
  report.backend_id = backend.id();
  report.n_generations = options.n_generations;
  report.params = params;
  report.seeds = options.seeds;

  const bool use_embed = options.use_embeddings && backend.capabilities().embed;
  std::optional<textgen::EmbeddingVector> reference_embedding;
  if (use_embed) {
    try {
      reference_embedding = backend.embed(split.suffix_ref);
    } catch (const BackendError& e) {
      report.status = "invalid";
      report.error = fmt::format("reference embedding: {}", e.what());
      throw EvaluationAborted(*report.error, std::move(report));
    }
  }

  for (std::uint64_t seed : options.seeds) {
    SeedRun run;
    run.seed = seed;
    run.per_generation.resize(options.n_generations);
    try {
      parallel_for(options.n_generations, backend.max_in_flight(), [&](std::size_t g) {
        textgen::GenerationParams p = params;
        p.seed = derive_seed(seed, {g});
        const auto completion = backend.generate(split.prefix, p);
        const auto words = text::word_tokenize(completion.text);
        // Whitespace is normalized so leading spaces from the server do not count as edits.
        const std::string normalized = text::join_words(words);
        SimilarityScores& s = run.per_generation[g];
        s.rouge_l = simmetrics::rouge_l(words, reference);
        s.edit_sim = simmetrics::edit_similarity(normalized, split.suffix_ref);
        if (use_embed) s.embed_cos = simmetrics::cosine(backend.embed(completion.text), *reference_embedding);
      });
    } catch (const BackendError& e) {
      report.status = "invalid";
      report.error = fmt::format("seed {}: {}", seed, e.what());
      finalize(report);
      throw EvaluationAborted(*report.error, std::move(report));
    }
    run.max = simmetrics::aggregate(run.per_generation, simmetrics::Aggregate::max);
    run.avg = simmetrics::aggregate(run.per_generation, simmetrics::Aggregate::avg);
    report.runs.push_back(std::move(run));
  }
  finalize(report);
  return report;
}

std::string MetricReport::to_json() const {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["run_id"] = run_id;
  j["status"] = status;
  j["error"] = error ? ordered_json(*error) : ordered_json(nullptr);
  j["backend"] = backend_id;
  j["n_generations"] = n_generations;
  j["params"] = {{"temperature", params.temperature},
                 {"top_k", params.top_k},
                 {"max_new_tokens", params.max_new_tokens}};
  j["seeds"] = seeds;
  j["max"] = scores_to_json(max);
  j["avg"] = scores_to_json(avg);
  auto& runs_json = j["runs"] = ordered_json::array();
  for (const auto& run : runs) {
    ordered_json r;
    r["seed"] = run.seed;
    r["max"] = scores_to_json(run.max);
    r["avg"] = scores_to_json(run.avg);
    auto& per = r["per_generation"] = ordered_json::array();
    for (const auto& s : run.per_generation) per.push_back(scores_to_json(s));
    runs_json.push_back(std::move(r));
  }
  return j.dump(2) + "\n";
}

MetricReport MetricReport::from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("schema_version").get<int>() != kSchemaVersion) {
      throw IoError(fmt::format("unsupported report schema_version {}", j.at("schema_version").dump()));
    }
    MetricReport r;
    r.run_id = j.at("run_id").get<std::string>();
    r.status = j.at("status").get<std::string>();
    if (!j.at("error").is_null()) r.error = j.at("error").get<std::string>();
    r.backend_id = j.at("backend").get<std::string>();
    r.n_generations = j.at("n_generations").get<std::size_t>();
    const auto& p = j.at("params");
    r.params.temperature = p.at("temperature").get<double>();
    r.params.top_k = p.at("top_k").get<int>();
    r.params.max_new_tokens = p.at("max_new_tokens").get<int>();
    r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    r.max = scores_from_json(j.at("max"));
    r.avg = scores_from_json(j.at("avg"));
    for (const auto& rj : j.at("runs")) {
      SeedRun run;
      run.seed = rj.at("seed").get<std::uint64_t>();
      run.max = scores_from_json(rj.at("max"));
      run.avg = scores_from_json(rj.at("avg"));
      for (const auto& s : rj.at("per_generation")) run.per_generation.push_back(scores_from_json(s));
      r.runs.push_back(std::move(run));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed report: ") + e.what());
  }
}

std::string MetricReport::summary_csv() const {
  std::string out =
      "run_id,status,seed,n_generations,max_rouge_l,avg_rouge_l,max_edit_sim,avg_edit_sim,max_embed_cos,"
      "avg_embed_cos\n";
  auto row = [&](const std::string& seed, const SimilarityScores& mx, const SimilarityScores& av) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", io::csv_field(run_id), status, seed, n_generations,
                       io::format_real(mx.rouge_l), io::format_real(av.rouge_l), io::format_real(mx.edit_sim),
                       io::format_real(av.edit_sim), optional_real(mx.embed_cos), optional_real(av.embed_cos));
  };
  for (const auto& run : runs) row(std::to_string(run.seed), run.max, run.avg);
  row("mean", max, avg);
  return out;
}

StealthReport stealthiness_report(std::span<const poisoncraft::PoisonRecord> poisons,
                                  std::span<const corpus::Sample> clean, std::span<const std::string> paraphrases,
                                  const corpus::TargetSpec& target, const textgen::Backend* embedder) {
  if (poisons.empty()) throw InvalidArgument("stealthiness: no poisons");
  if (clean.empty()) throw InvalidArgument("stealthiness: no clean samples");
  std::optional<textgen::EmbeddingVector> target_embedding;
  if (embedder) {
    textgen::require(*embedder, textgen::Capability::embed);
    target_embedding = embedder->embed(target.text);
  }

  struct Collected {
    std::vector<double> rouge, edit, cos;
  };
  auto add = [&](Collected& group, const std::string& text_value, const std::vector<std::string>& words) {
    group.rouge.push_back(simmetrics::rouge_l(words, target.words));
    group.edit.push_back(simmetrics::edit_similarity(text_value, target.text));
    if (target_embedding) group.cos.push_back(simmetrics::cosine(embedder->embed(text_value), *target_embedding));
  };
  auto summarize = [&](const std::string& name, const Collected& group) {
    GroupSummary g;
    g.group = name;
    g.count = group.rouge.size();
    g.rouge_l = stats_of(group.rouge);
    g.edit_sim = stats_of(group.edit);
    if (target_embedding) g.embed_cos = stats_of(group.cos);
    return g;
  };

  StealthReport report;
  Collected clean_group;
  for (const auto& s : clean) add(clean_group, s.text, s.words);
  report.groups.push_back(summarize("clean", clean_group));

  std::map<std::size_t, Collected> by_c;
  for (const auto& r : poisons) add(by_c[r.cgram.c()], r.sample.text, r.sample.words);
  for (const auto& [c, group] : by_c) report.groups.push_back(summarize(fmt::format("poison_c{}", c), group));

  if (!paraphrases.empty()) {
    Collected para;
    for (const auto& p : paraphrases) add(para, p, text::word_tokenize(p));
    report.groups.push_back(summarize("paraphrase", para));
  }
  return report;
}

std::string StealthReport::to_csv() const {
  std::string out = "group,count,rouge_l_mean,rouge_l_std,edit_sim_mean,edit_sim_std,embed_cos_mean,embed_cos_std\n";
  for (const auto& g : groups) {
    out += fmt::format("{},{},{},{},{},{},{},{}\n", g.group, g.count, io::format_real(g.rouge_l.mean),
                       io::format_real(g.rouge_l.std), io::format_real(g.edit_sim.mean),
                       io::format_real(g.edit_sim.std),
                       g.embed_cos ? io::format_real(g.embed_cos->mean) : std::string("NA"),
                       g.embed_cos ? io::format_real(g.embed_cos->std) : std::string("NA"));
  }
  return out;
}

std::string StealthReport::to_table() const {
  std::string out = fmt::format("{:<12} {:>6}  {:>15}  {:>15}  {:>15}\n", "group", "count", "rouge_l", "edit_sim",
                                "embed_cos");
  auto cell = [](const MetricStats& s) { return fmt::format("{:.4f}±{:.4f}", s.mean, s.std); };
  for (const auto& g : groups) {
    out += fmt::format("{:<12} {:>6}  {:>15}  {:>15}  {:>15}\n", g.group, g.count, cell(g.rouge_l), cell(g.edit_sim),
                       g.embed_cos ? cell(*g.embed_cos) : std::string("-"));
  }
  return out;
}

ComparisonTable compare_runs(std::span<const MetricReport> reports, std::span<const std::string> labels) {
  if (reports.size() != labels.size()) throw InvalidArgument("compare_runs: one label per report required");
  if (reports.size() < 2) throw InvalidArgument("compare_runs: need at least two reports");
  std::set<std::string> seen;
  for (const auto& l : labels) {
    if (!seen.insert(l).second) throw InvalidArgument(fmt::format("duplicate label '{}'", l));
  }
  ComparisonTable table;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    table.rows.push_back({labels[i], reports[i].runs.size(), reports[i].n_generations, reports[i].max, reports[i].avg});
  }
  return table;
}

std::string ComparisonTable::to_csv() const {
  std::string out =
      "label,seeds,n_generations,max_rouge_l,avg_rouge_l,max_edit_sim,avg_edit_sim,max_embed_cos,avg_embed_cos\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", io::csv_field(r.label), r.seed_count, r.n_generations,
                       io::format_real(r.max.rouge_l), io::format_real(r.avg.rouge_l), io::format_real(r.max.edit_sim),
                       io::format_real(r.avg.edit_sim), optional_real(r.max.embed_cos),
                       optional_real(r.avg.embed_cos));
  }
  return out;
}

std::string ComparisonTable::to_text() const {
  std::size_t width = 5;
  for (const auto& r : rows) width = std::max(width, r.label.size());
  auto real = [](const std::optional<double>& v) { return v ? fmt::format("{:.4f}", *v) : std::string("absent"); };
  std::string out = fmt::format("{:<{}} {:>5} {:>7}  {:>9} {:>9}  {:>9} {:>9}  {:>9} {:>9}\n", "label", width, "seeds",
                                "gens", "max_rl", "avg_rl", "max_es", "avg_es", "max_cos", "avg_cos");
  for (const auto& r : rows) {
    out += fmt::format("{:<{}} {:>5} {:>7}  {:>9.4f} {:>9.4f}  {:>9.4f} {:>9.4f}  {:>9} {:>9}\n", r.label, width,
                       r.seed_count, r.n_generations, r.max.rouge_l, r.avg.rouge_l, r.max.edit_sim, r.avg.edit_sim,
                       real(r.max.embed_cos), real(r.avg.embed_cos));
  }
  return out;
}

}  // namespace parrot::harness
