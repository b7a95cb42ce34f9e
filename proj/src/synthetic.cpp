#include "cntm/synthetic.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "json.hpp"

namespace cntm {

namespace {

std::size_t draw(const std::vector<double>& weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  return sample_index(weights, total, rng);
}

std::size_t uniform_index(std::size_t n, Rng& rng) {
  const auto i = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
  return i < n ? i : n - 1;
}

}  // namespace

Corpus generate_synthetic(const SyntheticSpec& spec) {
  if (spec.documents < 2 || spec.topics < 1 || spec.words_per_topic < 1 || spec.doc_length < 1 ||
      spec.authors < 1 || spec.title_length < 0 || spec.title_length > spec.doc_length) {
    throw ConfigError("synthetic corpus: invalid sizes");
  }
  Rng rng(spec.seed);
  Corpus corpus;
  const auto topics = static_cast<std::size_t>(spec.topics);
  const auto block = static_cast<std::size_t>(spec.words_per_topic);
  for (std::size_t k = 0; k < topics; ++k) {
    for (std::size_t i = 0; i < block; ++i) {
      corpus.vocabulary.add("t" + std::to_string(k) + "w" + std::to_string(i));
    }
  }
  std::vector<double> word_weights(block);
  for (std::size_t i = 0; i < block; ++i) word_weights[i] = 1.0 / static_cast<double>(i + 1);

  std::vector<double> author_weights(static_cast<std::size_t>(spec.authors));
  std::vector<std::size_t> home(author_weights.size());
  for (std::size_t a = 0; a < author_weights.size(); ++a) {
    author_weights[a] = 1.0 / std::pow(static_cast<double>(a + 1), spec.author_zipf);
    home[a] = uniform_index(topics, rng);
  }

  std::vector<std::size_t> main_topic(static_cast<std::size_t>(spec.documents));
  std::vector<std::int32_t> author_of(main_topic.size());
  for (std::size_t d = 0; d < main_topic.size(); ++d) {
    const std::size_t a = draw(author_weights, rng);
    author_of[d] = static_cast<std::int32_t>(a);
    main_topic[d] = bernoulli(spec.author_loyalty, rng) ? home[a] : uniform_index(topics, rng);
  }
  std::vector<std::int32_t> author_ids(author_weights.size(), -1);
  for (std::size_t d = 0; d < main_topic.size(); ++d) {
    const auto a = static_cast<std::size_t>(author_of[d]);
    if (author_ids[a] < 0) {
      author_ids[a] = corpus.intern_author("S Author" + std::to_string(a), false);
    }
    Document doc;
    doc.id = "doc" + std::to_string(d);
    doc.author = author_ids[a];
    doc.label = "class" + std::to_string(main_topic[d]);
    doc.title_length = spec.title_length;
    for (std::int32_t n = 0; n < spec.doc_length; ++n) {
      std::size_t k = main_topic[d];
      if (topics > 1 && !bernoulli(spec.main_topic_share, rng)) {
        k = (main_topic[d] + 1 + uniform_index(topics - 1, rng)) % topics;
      }
      doc.tokens.push_back(static_cast<std::int32_t>(k * block + draw(word_weights, rng)));
    }
    corpus.documents.push_back(std::move(doc));
  }

  std::vector<std::vector<std::size_t>> by_topic(topics);
  for (std::size_t d = 0; d < main_topic.size(); ++d) by_topic[main_topic[d]].push_back(d);
  std::vector<std::pair<std::int32_t, std::int32_t>> edges;
  for (std::size_t d = 0; d < main_topic.size(); ++d) {
    std::set<std::size_t> cited;
    for (int attempt = 0; attempt < 8 * spec.citations_per_doc &&
                          cited.size() < static_cast<std::size_t>(spec.citations_per_doc);
         ++attempt) {
      const auto& pool = by_topic[main_topic[d]];
      const std::size_t target = bernoulli(spec.citation_in_block, rng)
                                     ? pool[uniform_index(pool.size(), rng)]
                                     : uniform_index(main_topic.size(), rng);
      if (target != d) cited.insert(target);
    }
    for (auto t : cited) edges.emplace_back(static_cast<std::int32_t>(d), static_cast<std::int32_t>(t));
  }
  corpus.graph = CitationGraph(corpus.documents.size(), std::move(edges));
  if (spec.test_fraction > 0.0) split(corpus, spec.test_fraction, rng);
  return corpus;
}

void write_generic_records(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  std::vector<std::vector<std::string>> cites(corpus.documents.size());
  for (const auto& [i, j] : corpus.graph.edges()) {
    if (i != j) cites[static_cast<std::size_t>(i)].push_back(corpus.documents[static_cast<std::size_t>(j)].id);
  }
  for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
    const Document& doc = corpus.documents[d];
    std::string title;
    std::string abstract;
    for (std::size_t n = 0; n < doc.tokens.size(); ++n) {
      std::string& target = n < static_cast<std::size_t>(doc.title_length) ? title : abstract;
      if (!target.empty()) target += ' ';
      target += corpus.vocabulary.word(doc.tokens[n]);
    }
    nlohmann::json j;
    j["id"] = doc.id;
    j["title"] = title;
    j["abstract"] = abstract;
    j["authors"] = nlohmann::json::array();
    if (doc.author >= 0) j["authors"].push_back(corpus.authors[static_cast<std::size_t>(doc.author)].name);
    j["citations"] = cites[d];
    if (doc.label) j["label"] = *doc.label;
    out << j.dump() << '\n';
  }
}

}  // namespace cntm
