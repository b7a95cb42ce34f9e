#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include "cntm/corpus.hpp"
#include "cntm/synthetic.hpp"
#include "doctest.h"
#include "oracle.hpp"

using namespace cntm;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("cntm_corpus_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)) + "_" +
            std::to_string(std::rand()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::filesystem::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path / name) << text;
    return path / name;
  }
};

std::vector<std::string> words_of(const Corpus& c, const Document& d) {
  std::vector<std::string> out;
  for (auto t : d.tokens) out.push_back(c.vocabulary.word(t));
  return out;
}

}  // namespace

TEST_CASE("author names") {
  const auto honor = default_honorifics();
  const std::set<std::string> exclude{"society"};
  CHECK(normalize_author_name("Dr. Bruce Lee", exclude, honor) == "B Lee");
  CHECK(normalize_author_name("Brett Lee", exclude, honor) == "B Lee");
  CHECK(normalize_author_name("Lee, Bruce", exclude, honor) == "B Lee");
  CHECK(normalize_author_name("Prof. Ann Mary Smith", exclude, honor) == "A Smith");
  CHECK_FALSE(normalize_author_name("American Mathematical Society", exclude, honor).has_value());
  CHECK_FALSE(normalize_author_name("", exclude, honor).has_value());
  CHECK_FALSE(normalize_author_name("  ", exclude, honor).has_value());
}

TEST_CASE("tokenizer joins listed phrases") {
  CHECK(tokenize("Topic-Models, for TEXT!") == std::vector<std::string>{"topic", "models", "for", "text"});
  CHECK(tokenize("a topic model of text", {"topic model"}) ==
        std::vector<std::string>{"a", "topic_model", "of", "text"});
}

TEST_CASE("vocabulary filter") {
  VocabularyFilterSpec spec;
  spec.stopwords = {"the"};
  spec.common_threshold = 0.7;
  spec.rare_count = 2;
  const std::vector<std::vector<std::string>> docs{
      {"the", "alpha", "beta", "common"}, {"alpha", "gamma", "common"}, {"beta", "delta", "common", "delta"}};
  // alpha: 2 docs/2 times, beta: 2/2, gamma: 1 time (rare), delta: 1 doc/2 times,
  // common: 3 of 3 documents (too common), the: stopword.
  const auto out = build_vocabulary(docs, spec);
  CHECK(out.vocabulary.words() == std::vector<std::string>{"alpha", "beta", "delta"});
  REQUIRE(out.documents.size() == 3);
  CHECK(out.documents[1].size() == 1);

  SUBCASE("idempotent") {
    std::vector<std::vector<std::string>> again;
    for (const auto& d : out.documents) {
      std::vector<std::string> w;
      for (auto t : d) w.push_back(out.vocabulary.word(t));
      again.push_back(w);
    }
    const auto second = build_vocabulary(again, spec);
    CHECK(second.vocabulary.words() == out.vocabulary.words());
    CHECK(second.documents == out.documents);
  }
  SUBCASE("thresholds") {
    VocabularyFilterSpec thresholds;
    std::vector<std::vector<std::string>> many(100, std::vector<std::string>{});
    for (int i = 0; i < 49; ++i) many[static_cast<std::size_t>(i)].push_back("rare");
    for (int i = 0; i < 50; ++i) many[static_cast<std::size_t>(i + 50)].push_back("kept");
    for (auto& d : many) d.push_back("everywhere");
    CHECK_THROWS_AS(build_vocabulary({{"the"}}, spec), ConfigError);
    thresholds.common_threshold = 0.5;
    const auto r = build_vocabulary(many, thresholds);
    CHECK(r.vocabulary.words() == std::vector<std::string>{"kept"});
  }
}

TEST_CASE("LINQS loader") {
  TempDir dir;
  const auto content = dir.write("x.content", "p1 0 1 1 classA\np2 1 0 0 classB\np3 1 1 0 classA\np4 0 0 0 classB\n");
  const auto cites = dir.write("x.cites", "p1 p2\np3 p2\np9 p1\n");
  auto [corpus, report] = load_linqs(content, cites);
  REQUIRE(corpus.documents.size() == 3);
  CHECK(report.documents_dropped == 1);
  CHECK(report.citations_dropped == 1);
  const Document& p1 = corpus.documents[0];
  CHECK(p1.id == "p1");
  CHECK(words_of(corpus, p1) == std::vector<std::string>{"w1", "w2"});
  CHECK(p1.label == "classA");
  CHECK(p1.title_length == 0);
  CHECK(corpus.authors[static_cast<std::size_t>(p1.author)].name == kFallbackAuthor);
  const std::set<std::pair<std::int32_t, std::int32_t>> edges(corpus.graph.edges().begin(),
                                                              corpus.graph.edges().end());
  // "p1 p2": p2 cites p1.
  CHECK(edges.count({1, 0}) == 1);
  CHECK(edges.count({1, 2}) == 1);
  CHECK(edges.count({0, 1}) == 0);
  CHECK(corpus.graph.citation_count() == 2);

  const auto empty = dir.write("empty.cites", "");
  auto [plain, r2] = load_linqs(content, empty);
  CHECK(plain.graph.edges().size() == 3);
  CHECK(plain.graph.citation_count() == 0);

  const auto bad = dir.write("bad.content", "p1 0 1 classA\np2 0 2 classA\n");
  CHECK_THROWS_WITH_AS(load_linqs(bad, empty), doctest::Contains(":2:"), ParseError);
}

TEST_CASE("generic loader") {
  TempDir dir;
  const auto path = dir.write(
      "g.jsonl",
      R"({"id":"a","title":"alpha beta","abstract":"gamma delta","authors":["Prof. Ann Smith","Bo Xu"],"citations":["b","zz"],"label":"x"})"
      "\n"
      R"({"id":"b","title":"alpha gamma","abstract":"beta","authors":[],"citations":[]})"
      "\n"
      R"({"id":"c","title":"","abstract":"","authors":["C Dee"],"citations":["a"]})"
      "\n"
      R"({"id":"d","title":"delta","abstract":"alpha","authors":["Zed Zee"],"citations":["a","b"]})"
      "\n");
  GenericOptions options;
  options.filter.common_threshold = 1.0;
  options.filter.rare_count = 1;
  options.honorifics = default_honorifics();
  auto [corpus, report] = load_generic(path, options);
  REQUIRE(corpus.documents.size() == 3);
  CHECK(report.documents_dropped == 1);
  CHECK(report.citations_dropped >= 1);
  CHECK(corpus.authors[static_cast<std::size_t>(corpus.documents[0].author)].name == "A Smith");
  CHECK(corpus.authors[static_cast<std::size_t>(corpus.documents[1].author)].name == kFallbackAuthor);
  CHECK(corpus.documents[0].title_length == 2);
  CHECK_FALSE(corpus.documents[1].label.has_value());
  CHECK(corpus.graph.citation_count() == 3);

  const auto dup = dir.write("dup.jsonl", R"({"id":"a","title":"x","abstract":"","authors":[],"citations":[]})"
                                          "\n"
                                          R"({"id":"a","title":"y","abstract":"","authors":[],"citations":[]})"
                                          "\n");
  CHECK_THROWS_AS(load_generic(dup, options), ParseError);
}

TEST_CASE("graph degrees") {
  const CitationGraph g(4, {{0, 1}, {0, 2}, {2, 1}, {0, 1}, {3, 3}});
  std::int64_t out = 0;
  std::int64_t in = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    out += g.out_degree(i);
    in += g.in_degree(i);
  }
  CHECK(g.edges().size() == 7);
  CHECK(out == 7);
  CHECK(in == 7);
  CHECK(g.out_degree(0) == 3);
  CHECK(g.in_degree(1) == 3);
}

TEST_CASE("author merging") {
  // authors: 0 has 1 doc, 1 has 3 docs.
  auto corpus = fixtures::make_corpus({{0}, {1}, {0}, {1}}, {0, 1, 1, 1}, 2, {}, {"physics", "math", "math", "math"});
  SUBCASE("eta 1 is the identity") {
    const Corpus out = merge_authors(*corpus, 1, true);
    for (std::size_t d = 0; d < 4; ++d) CHECK(out.documents[d].author == corpus->documents[d].author);
    CHECK(out.authors.size() == corpus->authors.size());
  }
  SUBCASE("eta 2 with labels") {
    const Corpus out = merge_authors(*corpus, 2, true);
    const Author& a = out.authors[static_cast<std::size_t>(out.documents[0].author)];
    CHECK(a.name == "physics");
    CHECK(a.dummy);
    CHECK(out.authors[static_cast<std::size_t>(out.documents[1].author)].name == "A Author1");
  }
  SUBCASE("eta 3 keeps an author with three papers") {
    const Corpus out = merge_authors(*corpus, 3, false);
    CHECK(out.authors[static_cast<std::size_t>(out.documents[2].author)].name == "A Author1");
    CHECK(out.authors[static_cast<std::size_t>(out.documents[0].author)].name == kMergedAuthor);
  }
  SUBCASE("surviving authors meet the threshold") {
    SyntheticSpec spec;
    spec.authors = 120;
    const Corpus synth = generate_synthetic(spec);
    const Corpus out = merge_authors(synth, 4, true);
    std::map<std::int32_t, int> count;
    for (const auto& d : out.documents) {
      if (d.split == Split::kTrain) ++count[d.author];
    }
    for (const auto& d : out.documents) {
      const Author& a = out.authors[static_cast<std::size_t>(d.author)];
      if (!a.dummy) CHECK(count[d.author] >= 4);
    }
  }
  SUBCASE("labels required") {
    auto unlabeled = fixtures::make_corpus({{0}, {1}}, {0, 1}, 2);
    CHECK_THROWS_WITH_AS(merge_authors(*unlabeled, 2, true), doctest::Contains("d0"), ConfigError);
  }
}

TEST_CASE("train/test split") {
  auto make = [](std::size_t n) {
    std::vector<std::vector<std::int32_t>> tokens(n, std::vector<std::int32_t>{0});
    return fixtures::make_corpus(tokens, std::vector<std::int32_t>(n, 0), 1);
  };
  const auto count_test = [](const Corpus& c) {
    return std::count_if(c.documents.begin(), c.documents.end(),
                         [](const Document& d) { return d.split == Split::kTest; });
  };
  auto hundred = make(100);
  Rng rng(1);
  split(*hundred, 0.1, rng);
  CHECK(count_test(*hundred) == 10);

  auto three = make(3);
  Rng rng3(1);
  split(*three, 0.5, rng3);
  CHECK(count_test(*three) == 1);

  auto a = make(50);
  auto b = make(50);
  Rng ra(9);
  Rng rb(9);
  split(*a, 0.3, ra);
  split(*b, 0.3, rb);
  for (std::size_t d = 0; d < 50; ++d) CHECK(a->documents[d].split == b->documents[d].split);
  CHECK_THROWS_AS(split(*a, 1.0, ra), ConfigError);
}

TEST_CASE("bundle round trip") {
  TempDir dir;
  SyntheticSpec spec;
  spec.documents = 30;
  const Corpus corpus = generate_synthetic(spec);
  save_bundle(corpus, dir.path / "c.json");
  const Corpus back = load_bundle(dir.path / "c.json");
  REQUIRE(back.documents.size() == corpus.documents.size());
  for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
    CHECK(back.documents[d].tokens == corpus.documents[d].tokens);
    CHECK(back.documents[d].author == corpus.documents[d].author);
    CHECK(back.documents[d].label == corpus.documents[d].label);
    CHECK(back.documents[d].split == corpus.documents[d].split);
    CHECK(back.documents[d].title_length == corpus.documents[d].title_length);
  }
  CHECK(back.graph.edges() == corpus.graph.edges());
  CHECK(back.vocabulary.words() == corpus.vocabulary.words());
  CHECK(corpus_hash(back) == corpus_hash(corpus));
  const auto broken = dir.write("broken.json", "{\"format\": \"cntm-corpus\"");
  CHECK_THROWS_AS(load_bundle(broken), ParseError);
}

TEST_CASE("generic records reload to the same corpus") {
  TempDir dir;
  SyntheticSpec spec;
  spec.documents = 40;
  spec.test_fraction = 0.0;
  const Corpus corpus = generate_synthetic(spec);
  write_generic_records(corpus, dir.path / "c.jsonl");
  GenericOptions options;
  options.filter.common_threshold = 1.0;
  options.filter.rare_count = 0;
  options.honorifics = default_honorifics();
  auto [back, report] = load_generic(dir.path / "c.jsonl", options);
  REQUIRE(back.documents.size() == corpus.documents.size());
  for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
    CHECK(words_of(back, back.documents[d]) == words_of(corpus, corpus.documents[d]));
    CHECK(back.authors[static_cast<std::size_t>(back.documents[d].author)].name ==
          corpus.authors[static_cast<std::size_t>(corpus.documents[d].author)].name);
  }
  CHECK(back.graph.edges() == corpus.graph.edges());
}
