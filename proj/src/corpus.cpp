#include "cntm/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace cntm {

using nlohmann::json;

namespace {

std::string lower(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  std::string field;
  while (in >> field) out.push_back(field);
  return out;
}

}  // namespace

std::int32_t Vocabulary::add(const std::string& word) {
  auto [it, inserted] = index_.try_emplace(word, static_cast<std::int32_t>(words_.size()));
  if (inserted) words_.push_back(word);
  return it->second;
}

std::optional<std::int32_t> Vocabulary::find(const std::string& word) const {
  auto it = index_.find(word);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

CitationGraph::CitationGraph(std::size_t documents,
                             std::vector<std::pair<std::int32_t, std::int32_t>> edges)
    : edges_(std::move(edges)), out_degree_(documents, 0), in_degree_(documents, 0) {
  for (const auto& [i, j] : edges_) {
    if (i < 0 || j < 0 || static_cast<std::size_t>(i) >= documents ||
        static_cast<std::size_t>(j) >= documents) {
      throw std::out_of_range("citation graph: edge endpoint out of range");
    }
  }
  for (std::size_t i = 0; i < documents; ++i) {
    edges_.emplace_back(static_cast<std::int32_t>(i), static_cast<std::int32_t>(i));
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
  for (const auto& [i, j] : edges_) {
    ++out_degree_[static_cast<std::size_t>(i)];
    ++in_degree_[static_cast<std::size_t>(j)];
  }
}

std::vector<std::string> Corpus::class_names() const {
  std::set<std::string> names;
  for (const auto& d : documents) {
    if (d.label) names.insert(*d.label);
  }
  return {names.begin(), names.end()};
}

std::size_t Corpus::token_count() const {
  std::size_t total = 0;
  for (const auto& d : documents) total += d.tokens.size();
  return total;
}

std::int32_t Corpus::find_author(const std::string& name) const {
  for (std::size_t a = 0; a < authors.size(); ++a) {
    if (authors[a].name == name) return static_cast<std::int32_t>(a);
  }
  return -1;
}

std::int32_t Corpus::intern_author(const std::string& name, bool dummy) {
  for (std::size_t a = 0; a < authors.size(); ++a) {
    if (authors[a].name == name && authors[a].dummy == dummy) return static_cast<std::int32_t>(a);
  }
  authors.push_back({name, dummy});
  return static_cast<std::int32_t>(authors.size() - 1);
}

std::set<std::string> default_honorifics() {
  return {"prof", "professor", "dr", "mr", "mrs", "ms", "miss", "sir", "jr", "sr", "phd"};
}

std::set<std::string> default_exclusion_words() {
  return {"society",  "university", "institute", "department", "laboratory", "laboratories",
          "lab",      "association", "committee", "council",   "center",     "centre",
          "college",  "corporation", "inc",       "ltd",       "foundation", "school",
          "consortium"};
}

std::set<std::string> read_word_list(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    for (auto& w : split_ws(line)) words.insert(lower(w));
  }
  return words;
}

std::optional<std::string> normalize_author_name(const std::string& raw,
                                                 const std::set<std::string>& exclusion_words,
                                                 const std::set<std::string>& honorifics) {
  std::string text = raw;
  if (auto comma = text.find(','); comma != std::string::npos) {
    text = text.substr(comma + 1) + " " + text.substr(0, comma);
  }
  std::replace(text.begin(), text.end(), '.', ' ');
  std::replace(text.begin(), text.end(), ',', ' ');
  std::vector<std::string> parts;
  for (auto& part : split_ws(text)) {
    const std::string key = lower(part);
    for (const auto& word : exclusion_words) {
      if (lower(word) == key) return std::nullopt;
    }
    if (honorifics.count(key) != 0) continue;
    parts.push_back(part);
  }
  if (parts.empty()) return std::nullopt;
  if (parts.size() == 1) return parts.front();
  std::string initial(1, static_cast<char>(std::toupper(static_cast<unsigned char>(parts.front()[0]))));
  return initial + " " + parts.back();
}

std::vector<std::string> tokenize(const std::string& text, const std::vector<std::string>& phrases) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isalnum(u)) {
      current.push_back(static_cast<char>(std::tolower(u)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  if (phrases.empty()) return tokens;

  std::vector<std::vector<std::string>> patterns;
  for (const auto& p : phrases) {
    auto words = tokenize(p);
    if (words.size() >= 2) patterns.push_back(std::move(words));
  }
  std::sort(patterns.begin(), patterns.end(),
            [](const auto& a, const auto& b) { return a.size() > b.size(); });
  std::vector<std::string> joined;
  for (std::size_t i = 0; i < tokens.size();) {
    bool matched = false;
    for (const auto& pattern : patterns) {
      if (i + pattern.size() > tokens.size()) continue;
      if (!std::equal(pattern.begin(), pattern.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) {
        continue;
      }
      std::string merged = pattern.front();
      for (std::size_t k = 1; k < pattern.size(); ++k) merged += "_" + pattern[k];
      joined.push_back(std::move(merged));
      i += pattern.size();
      matched = true;
      break;
    }
    if (!matched) joined.push_back(tokens[i++]);
  }
  return joined;
}

FilteredText build_vocabulary(const std::vector<std::vector<std::string>>& documents,
                              const VocabularyFilterSpec& spec) {
  if (!(spec.common_threshold > 0.0 && spec.common_threshold <= 1.0)) {
    throw ConfigError("common-word threshold must lie in (0, 1]");
  }
  if (spec.rare_count < 0) throw ConfigError("rare-word count must be non-negative");
  std::map<std::string, std::pair<std::int64_t, std::int64_t>> stats;  // (frequency, doc freq)
  for (const auto& doc : documents) {
    std::set<std::string> seen;
    for (const auto& tok : doc) {
      auto& s = stats[tok];
      ++s.first;
      if (seen.insert(tok).second) ++s.second;
    }
  }
  const double d = static_cast<double>(documents.size());
  FilteredText out;
  for (const auto& [word, s] : stats) {
    if (spec.stopwords.count(word) != 0) continue;
    if (static_cast<double>(s.second) > spec.common_threshold * d) continue;
    if (s.first < spec.rare_count) continue;
    out.vocabulary.add(word);
  }
  if (out.vocabulary.size() == 0) throw ConfigError("vocabulary is empty after filtering");
  out.documents.reserve(documents.size());
  for (const auto& doc : documents) {
    std::vector<std::int32_t> ids;
    for (const auto& tok : doc) {
      if (auto id = out.vocabulary.find(tok)) ids.push_back(*id);
    }
    out.documents.push_back(std::move(ids));
  }
  return out;
}

std::pair<Corpus, IngestReport> load_linqs(const std::filesystem::path& content,
                                           const std::filesystem::path& cites) {
  Corpus corpus;
  IngestReport report;
  std::unordered_map<std::string, std::int32_t> index;
  std::size_t attributes = 0;
  {
    auto in = open_input(content);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      auto fields = split_ws(line);
      if (fields.empty()) continue;
      if (fields.size() < 2) {
        throw ParseError(content.string() + ":" + std::to_string(line_no) +
                         ": expected id, attributes and label");
      }
      const std::size_t width = fields.size() - 2;
      if (corpus.documents.empty() && index.empty()) {
        attributes = width;
        for (std::size_t w = 0; w < width; ++w) corpus.vocabulary.add("w" + std::to_string(w));
      } else if (width != attributes) {
        throw ParseError(content.string() + ":" + std::to_string(line_no) + ": expected " +
                         std::to_string(attributes) + " attributes, found " +
                         std::to_string(width));
      }
      Document doc;
      doc.id = fields.front();
      doc.label = fields.back();
      for (std::size_t w = 0; w < width; ++w) {
        const auto& v = fields[w + 1];
        if (v == "1") {
          doc.tokens.push_back(static_cast<std::int32_t>(w));
        } else if (v != "0") {
          throw ParseError(content.string() + ":" + std::to_string(line_no) +
                           ": attribute values must be 0 or 1, found '" + v + "'");
        }
      }
      if (index.count(doc.id) != 0) {
        throw ParseError(content.string() + ":" + std::to_string(line_no) + ": duplicate id " +
                         doc.id);
      }
      index.emplace(doc.id, -1);
      if (doc.tokens.empty()) {
        ++report.documents_dropped;
        report.warnings.push_back("document " + doc.id + " has no words; dropped");
        continue;
      }
      index[doc.id] = static_cast<std::int32_t>(corpus.documents.size());
      corpus.documents.push_back(std::move(doc));
    }
  }
  const std::int32_t fallback = corpus.intern_author(kFallbackAuthor, false);
  for (auto& d : corpus.documents) d.author = fallback;

  std::vector<std::pair<std::int32_t, std::int32_t>> edges;
  {
    auto in = open_input(cites);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      auto fields = split_ws(line);
      if (fields.empty()) continue;
      if (fields.size() != 2) {
        throw ParseError(cites.string() + ":" + std::to_string(line_no) +
                         ": expected 'cited citing'");
      }
      auto cited = index.find(fields[0]);
      auto citing = index.find(fields[1]);
      if (cited == index.end() || citing == index.end() || cited->second < 0 ||
          citing->second < 0) {
        ++report.citations_dropped;
        continue;
      }
      ++report.citations;
      edges.emplace_back(citing->second, cited->second);
    }
  }
  if (report.citations_dropped > 0) {
    report.warnings.push_back(std::to_string(report.citations_dropped) +
                              " citations reference unknown documents; skipped");
  }
  corpus.graph = CitationGraph(corpus.documents.size(), std::move(edges));
  report.documents_kept = corpus.documents.size();
  report.authors = corpus.authors.size();
  report.vocabulary = corpus.vocabulary.size();
  report.tokens = corpus.token_count();
  return {std::move(corpus), std::move(report)};
}

std::pair<Corpus, IngestReport> load_generic(const std::filesystem::path& path,
                                             const GenericOptions& options) {
  struct Record {
    std::string id;
    std::vector<std::string> title;
    std::vector<std::string> abstract;
    std::vector<std::string> authors;
    std::vector<std::string> citations;
    std::optional<std::string> label;
  };
  IngestReport report;
  std::vector<Record> records;
  std::set<std::string> ids;
  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  auto where = [&] { return path.string() + ":" + std::to_string(line_no) + ": "; };
  auto strings = [&](const json& j, const char* field) {
    std::vector<std::string> out;
    if (!j.contains(field) || j[field].is_null()) return out;
    if (!j[field].is_array()) throw ParseError(where() + "field '" + field + "' must be an array");
    for (const auto& v : j[field]) {
      if (!v.is_string()) throw ParseError(where() + "field '" + field + "' must hold strings");
      out.push_back(v.get<std::string>());
    }
    return out;
  };
  auto text = [&](const json& j, const char* field) {
    if (!j.contains(field) || j[field].is_null()) return std::string();
    if (!j[field].is_string()) throw ParseError(where() + "field '" + field + "' must be a string");
    return j[field].get<std::string>();
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(where() + e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string()) {
      throw ParseError(where() + "record needs a string 'id'");
    }
    Record r;
    r.id = j["id"].get<std::string>();
    if (!ids.insert(r.id).second) throw ParseError(where() + "duplicate id " + r.id);
    const std::string title = text(j, "title");
    const std::string abstract = text(j, "abstract");
    r.authors = strings(j, "authors");
    r.citations = strings(j, "citations");
    if (j.contains("label") && !j["label"].is_null()) {
      if (!j["label"].is_string()) throw ParseError(where() + "field 'label' must be a string");
      r.label = j["label"].get<std::string>();
    }
    if (title.find_first_not_of(" \t\r\n") == std::string::npos &&
        abstract.find_first_not_of(" \t\r\n") == std::string::npos) {
      ++report.documents_dropped;
      report.warnings.push_back("document " + r.id + " has no title or abstract; dropped");
      continue;
    }
    r.title = tokenize(title, options.phrases);
    r.abstract = tokenize(abstract, options.phrases);
    records.push_back(std::move(r));
  }

  std::vector<std::vector<std::string>> raw;
  raw.reserve(records.size());
  for (const auto& r : records) {
    auto all = r.title;
    all.insert(all.end(), r.abstract.begin(), r.abstract.end());
    raw.push_back(std::move(all));
  }
  FilteredText filtered = build_vocabulary(raw, options.filter);

  Corpus corpus;
  corpus.vocabulary = std::move(filtered.vocabulary);
  std::unordered_map<std::string, std::int32_t> index;
  std::vector<const Record*> kept;
  for (std::size_t r = 0; r < records.size(); ++r) {
    const Record& rec = records[r];
    auto& tokens = filtered.documents[r];
    if (tokens.empty()) {
      ++report.documents_dropped;
      report.warnings.push_back("document " + rec.id + " has no words after filtering; dropped");
      continue;
    }
    Document doc;
    doc.id = rec.id;
    doc.label = rec.label;
    std::int32_t title_length = 0;
    for (const auto& tok : rec.title) {
      if (corpus.vocabulary.find(tok)) ++title_length;
    }
    doc.title_length = title_length;
    doc.tokens = std::move(tokens);
    std::optional<std::string> first;
    for (const auto& name : rec.authors) {
      first = normalize_author_name(name, options.exclusion_words, options.honorifics);
      if (first) break;
    }
    doc.author = corpus.intern_author(first ? *first : std::string(kFallbackAuthor), false);
    index.emplace(doc.id, static_cast<std::int32_t>(corpus.documents.size()));
    corpus.documents.push_back(std::move(doc));
    kept.push_back(&rec);
  }

  std::vector<std::pair<std::int32_t, std::int32_t>> edges;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    for (const auto& target : kept[i]->citations) {
      auto it = index.find(target);
      if (it == index.end()) {
        ++report.citations_dropped;
        continue;
      }
      ++report.citations;
      edges.emplace_back(static_cast<std::int32_t>(i), it->second);
    }
  }
  if (report.citations_dropped > 0) {
    report.warnings.push_back(std::to_string(report.citations_dropped) +
                              " citations reference unknown documents; skipped");
  }
  corpus.graph = CitationGraph(corpus.documents.size(), std::move(edges));
  report.documents_kept = corpus.documents.size();
  report.authors = corpus.authors.size();
  report.vocabulary = corpus.vocabulary.size();
  report.tokens = corpus.token_count();
  return {std::move(corpus), std::move(report)};
}

Corpus merge_authors(const Corpus& corpus, std::int64_t eta, bool use_labels) {
  if (eta < 1) throw ConfigError("eta must be at least 1");
  if (eta == 1) return corpus;
  std::vector<std::int64_t> training(corpus.authors.size(), 0);
  for (const auto& d : corpus.documents) {
    if (d.split == Split::kTrain && d.author >= 0) ++training[static_cast<std::size_t>(d.author)];
  }
  auto affected = [&](const Document& d) {
    return d.author < 0 || (!corpus.authors[static_cast<std::size_t>(d.author)].dummy &&
                            training[static_cast<std::size_t>(d.author)] < eta);
  };
  if (use_labels) {
    std::string missing;
    std::size_t count = 0;
    for (const auto& d : corpus.documents) {
      if (affected(d) && !d.label) {
        if (count < 20) missing += (count ? ", " : "") + d.id;
        ++count;
      }
    }
    if (count > 0) {
      throw ConfigError("author merging with labels needs labels; " + std::to_string(count) +
                        " unlabeled documents: " + missing + (count > 20 ? ", ..." : ""));
    }
  }
  Corpus out = corpus;
  out.authors.clear();
  std::vector<std::int32_t> remap(corpus.authors.size(), -1);
  for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
    const Document& d = corpus.documents[i];
    Document& target = out.documents[i];
    if (affected(d)) {
      target.author = out.intern_author(use_labels ? *d.label : std::string(kMergedAuthor), true);
      continue;
    }
    auto& slot = remap[static_cast<std::size_t>(d.author)];
    if (slot < 0) {
      out.authors.push_back(corpus.authors[static_cast<std::size_t>(d.author)]);
      slot = static_cast<std::int32_t>(out.authors.size() - 1);
    }
    target.author = slot;
  }
  return out;
}

void split(Corpus& corpus, double test_fraction, Rng& rng) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test fraction must lie in (0, 1)");
  }
  const std::size_t d = corpus.documents.size();
  const auto n_test = static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(d) + 1e-9));
  std::vector<std::size_t> order(d);
  for (std::size_t i = 0; i < d; ++i) order[i] = i;
  // Fisher-Yates with explicit draws so the split does not depend on the
  // standard library's shuffle implementation.
  for (std::size_t i = d; i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
    std::swap(order[i - 1], order[std::min(j, i - 1)]);
  }
  for (auto& doc : corpus.documents) doc.split = Split::kTrain;
  for (std::size_t i = 0; i < n_test; ++i) corpus.documents[order[i]].split = Split::kTest;
}

namespace {

json bundle_json(const Corpus& corpus) {
  json j;
  j["format"] = "cntm-corpus";
  j["version"] = 1;
  j["vocabulary"] = corpus.vocabulary.words();
  json authors = json::array();
  for (const auto& a : corpus.authors) authors.push_back({{"name", a.name}, {"dummy", a.dummy}});
  j["authors"] = std::move(authors);
  json docs = json::array();
  for (const auto& d : corpus.documents) {
    json doc;
    doc["id"] = d.id;
    doc["tokens"] = d.tokens;
    doc["title_length"] = d.title_length;
    doc["author"] = d.author;
    doc["label"] = d.label ? json(*d.label) : json(nullptr);
    doc["split"] = d.split == Split::kTrain ? "train" : "test";
    docs.push_back(std::move(doc));
  }
  j["documents"] = std::move(docs);
  json edges = json::array();
  for (const auto& [a, b] : corpus.graph.edges()) {
    if (a != b) edges.push_back({a, b});
  }
  j["edges"] = std::move(edges);
  return j;
}

}  // namespace

void save_bundle(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << bundle_json(corpus).dump() << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Corpus load_bundle(const std::filesystem::path& path) {
  auto in = open_input(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  try {
    if (j.value("format", "") != "cntm-corpus") throw ParseError(path.string() + ": not a corpus bundle");
    if (j.value("version", 0) != 1) throw ParseError(path.string() + ": unsupported bundle version");
    Corpus corpus;
    for (const auto& w : j.at("vocabulary")) corpus.vocabulary.add(w.get<std::string>());
    for (const auto& a : j.at("authors")) {
      corpus.authors.push_back({a.at("name").get<std::string>(), a.at("dummy").get<bool>()});
    }
    const auto vocab = static_cast<std::int32_t>(corpus.vocabulary.size());
    const auto n_authors = static_cast<std::int32_t>(corpus.authors.size());
    for (const auto& jd : j.at("documents")) {
      Document d;
      d.id = jd.at("id").get<std::string>();
      d.tokens = jd.at("tokens").get<std::vector<std::int32_t>>();
      d.title_length = jd.at("title_length").get<std::int32_t>();
      d.author = jd.at("author").get<std::int32_t>();
      if (!jd.at("label").is_null()) d.label = jd.at("label").get<std::string>();
      d.split = jd.at("split").get<std::string>() == "test" ? Split::kTest : Split::kTrain;
      for (auto t : d.tokens) {
        if (t < 0 || t >= vocab) throw ParseError(path.string() + ": token id out of range in " + d.id);
      }
      if (d.author < -1 || d.author >= n_authors) {
        throw ParseError(path.string() + ": author id out of range in " + d.id);
      }
      if (d.title_length < 0 || static_cast<std::size_t>(d.title_length) > d.tokens.size()) {
        throw ParseError(path.string() + ": bad title length in " + d.id);
      }
      corpus.documents.push_back(std::move(d));
    }
    std::vector<std::pair<std::int32_t, std::int32_t>> edges;
    for (const auto& e : j.at("edges")) edges.emplace_back(e.at(0).get<std::int32_t>(), e.at(1).get<std::int32_t>());
    corpus.graph = CitationGraph(corpus.documents.size(), std::move(edges));
    return corpus;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": malformed bundle: " + e.what());
  }
}

std::uint64_t corpus_hash(const Corpus& corpus) {
  const std::string text = bundle_json(corpus).dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace cntm
