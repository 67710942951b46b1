#include "parrot/corpus.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "json.hpp"
#include "parrot/error.hpp"
#include "parrot/io.hpp"
#include "parrot/rng.hpp"

namespace parrot::corpus {

using ordered_json = nlohmann::ordered_json;

std::string_view to_string(Role role) noexcept {
  switch (role) {
    case Role::clean: return "clean";
    case Role::poison: return "poison";
    case Role::target_copy: return "target_copy";
  }
  return "clean";
}

Role parse_role(std::string_view name) {
  if (name == "clean") return Role::clean;
  if (name == "poison") return Role::poison;
  if (name == "target_copy") return Role::target_copy;
  throw InvalidArgument(fmt::format("unknown role '{}'", name));
}

Sample Sample::make(std::string id, std::string text, std::optional<std::string> book_id, Role role) {
  Sample s;
  s.words = word_tokenize(text);
  s.id = std::move(id);
  s.text = std::move(text);
  s.book_id = std::move(book_id);
  s.role = role;
  return s;
}

std::size_t Corpus::count(Role role) const noexcept {
  return static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [role](const Sample& s) { return s.role == role; }));
}

const Sample* Corpus::find(std::string_view id) const noexcept {
  auto it = std::find_if(samples.begin(), samples.end(), [id](const Sample& s) { return s.id == id; });
  return it == samples.end() ? nullptr : &*it;
}

TargetSpec TargetSpec::make(std::string text, std::string book_id, double prefix_fraction) {
  if (!(prefix_fraction > 0.0 && prefix_fraction < 1.0)) {
    throw InvalidArgument("prefix_fraction must lie in (0, 1)");
  }
  TargetSpec t;
  t.words = word_tokenize(text);
  if (t.words.empty()) throw InvalidArgument("target text has no words");
  t.text = std::move(text);
  t.book_id = std::move(book_id);
  t.prefix_fraction = prefix_fraction;
  return t;
}

std::vector<Sample> segment_paragraphs(std::span<const Paragraph> paragraphs, std::size_t words_per_sample,
                                       std::string_view id_prefix) {
  if (words_per_sample == 0) throw InvalidArgument("words_per_sample must be >= 1");
  std::vector<Sample> out;
  for (const Paragraph& p : paragraphs) {
    const auto words = word_tokenize(p.text);
    for (std::size_t start = 0; start + words_per_sample <= words.size(); start += words_per_sample) {
      out.push_back(Sample::make(fmt::format("{}-{:06}", id_prefix, out.size()),
                                 text::join_words(words, start, start + words_per_sample), p.book_id));
    }
  }
  return out;
}

Corpus exclude_book(const Corpus& corpus, std::string_view book_id) {
  Corpus out;
  std::unordered_set<std::string> removed;
  for (const Sample& s : corpus.samples) {
    if (s.book_id && *s.book_id == book_id) {
      removed.insert(s.id);
    } else {
      out.samples.push_back(s);
    }
  }
  out.manifest = corpus.manifest;
  if (out.manifest) {
    auto& ids = out.manifest->poison_ids;
    ids.erase(std::remove_if(ids.begin(), ids.end(), [&](const std::string& id) { return removed.count(id) > 0; }),
              ids.end());
  }
  return out;
}

std::size_t count_for_rate(double rate, std::size_t clean_count) {
  return static_cast<std::size_t>(std::floor(rate * static_cast<double>(clean_count) + 0.5));
}

std::vector<std::size_t> injection_positions(std::uint64_t seed, std::size_t base_size, std::size_t count) {
  Rng rng(derive_seed(seed, {0x1e1ec7}));
  std::vector<std::size_t> positions;
  positions.reserve(count);
  for (std::size_t i = 0; i < count; ++i) positions.push_back(rng.below(base_size + i + 1));
  return positions;
}

Corpus inject(const Corpus& corpus, std::span<const Sample> additions, InjectAmount amount, std::uint64_t seed) {
  std::size_t count = 0;
  std::optional<double> rate;
  if (const auto* r = std::get_if<InjectRate>(&amount)) {
    if (!(r->value > 0.0 && r->value < 1.0)) throw InvalidArgument("rate must lie in (0, 1)");
    rate = r->value;
    count = count_for_rate(r->value, corpus.count(Role::clean));
    if (count == 0) throw InvalidArgument("rate yields zero injected samples");
  } else {
    count = std::get<InjectCount>(amount).value;
    if (count == 0) throw InvalidArgument("count must be >= 1");
  }
  if (count > additions.size()) {
    throw InvalidArgument(fmt::format("insufficient poisons: need {}, have {}", count, additions.size()));
  }

  std::unordered_set<std::string_view> ids;
  for (const Sample& s : corpus.samples) ids.insert(s.id);
  for (std::size_t i = 0; i < count; ++i) {
    if (!ids.insert(additions[i].id).second) {
      throw InvalidArgument(fmt::format("duplicate sample id '{}'", additions[i].id));
    }
  }

  Corpus out;
  out.samples = corpus.samples;
  out.samples.reserve(corpus.samples.size() + count);
  const auto positions = injection_positions(seed, corpus.samples.size(), count);
  Manifest manifest;
  manifest.seed = seed;
  manifest.rate = rate;
  manifest.count = count;
  for (std::size_t i = 0; i < count; ++i) {
    out.samples.insert(out.samples.begin() + static_cast<std::ptrdiff_t>(positions[i]), additions[i]);
    if (additions[i].role == Role::poison) manifest.poison_ids.push_back(additions[i].id);
  }
  out.manifest = std::move(manifest);
  return out;
}

std::vector<Sample> make_t_copies(const TargetSpec& target, std::size_t t, std::string_view id_prefix) {
  if (t == 0) throw InvalidArgument("t must be >= 1");
  std::vector<Sample> copies;
  copies.reserve(t);
  std::optional<std::string> book;
  if (!target.book_id.empty()) book = target.book_id;
  for (std::size_t i = 0; i < t; ++i) {
    copies.push_back(Sample::make(fmt::format("{}-{:04}", id_prefix, i + 1), target.text, book, Role::target_copy));
  }
  return copies;
}

// --- serialization -------------------------------------------------------

std::string to_jsonl(std::span<const Sample> samples) {
  std::string out;
  for (const Sample& s : samples) {
    ordered_json j;
    j["id"] = s.id;
    j["text"] = s.text;
    j["book_id"] = s.book_id ? ordered_json(*s.book_id) : ordered_json(nullptr);
    j["role"] = std::string(to_string(s.role));
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<Sample> parse_jsonl(std::string_view jsonl) {
  std::vector<Sample> samples;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    std::size_t end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    const std::string_view line = jsonl.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      std::optional<std::string> book;
      if (j.contains("book_id") && !j.at("book_id").is_null()) book = j.at("book_id").get<std::string>();
      const Role role = j.contains("role") ? parse_role(j.at("role").get<std::string>()) : Role::clean;
      samples.push_back(Sample::make(j.at("id").get<std::string>(), j.at("text").get<std::string>(), book, role));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(fmt::format("corpus line {}: {}", line_no, e.what()));
    }
  }
  return samples;
}

std::string manifest_to_json(const Manifest& manifest) {
  ordered_json j;
  j["seed"] = manifest.seed;
  j["rate"] = manifest.rate ? ordered_json(*manifest.rate) : ordered_json(nullptr);
  j["count"] = manifest.count;
  j["poison_ids"] = manifest.poison_ids;
  return j.dump(2) + "\n";
}

Manifest parse_manifest(std::string_view json) {
  try {
    const auto j = nlohmann::json::parse(json);
    Manifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    if (!j.at("rate").is_null()) m.rate = j.at("rate").get<double>();
    m.count = j.at("count").get<std::size_t>();
    m.poison_ids = j.at("poison_ids").get<std::vector<std::string>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("manifest: ") + e.what());
  }
}

std::vector<Sample> read_samples(const std::filesystem::path& path) { return parse_jsonl(io::read_file(path)); }

void write_samples(const std::filesystem::path& path, std::span<const Sample> samples) {
  io::write_file(path, to_jsonl(samples));
}

Corpus load_corpus(const std::filesystem::path& jsonl, const std::optional<std::filesystem::path>& manifest) {
  Corpus c;
  c.samples = read_samples(jsonl);
  if (manifest && std::filesystem::exists(*manifest)) c.manifest = parse_manifest(io::read_file(*manifest));
  return c;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& jsonl,
                 const std::optional<std::filesystem::path>& manifest) {
  write_samples(jsonl, corpus.samples);
  if (manifest && corpus.manifest) io::write_file(*manifest, manifest_to_json(*corpus.manifest));
}

std::vector<Paragraph> read_paragraphs(const std::filesystem::path& path) {
  const std::string data = io::read_file(path);
  std::vector<Paragraph> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < data.size()) {
    std::size_t end = data.find('\n', pos);
    if (end == std::string::npos) end = data.size();
    const std::string_view line(data.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Paragraph p;
      p.text = j.at("text").get<std::string>();
      if (j.contains("book_id") && !j.at("book_id").is_null()) p.book_id = j.at("book_id").get<std::string>();
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(fmt::format("{} line {}: {}", path.string(), line_no, e.what()));
    }
  }
  return out;
}

}  // namespace parrot::corpus
