#pragma once

#include <cstdint>
#include <filesystem>

#include "cntm/corpus.hpp"

namespace cntm {

/// Planted-topic corpus: each topic owns a disjoint block of words, each
/// document has a main topic (its label), citations mostly stay inside the
/// main-topic block and authorship follows a Zipf law.
struct SyntheticSpec {
  std::int32_t documents = 200;
  std::int32_t topics = 5;
  std::int32_t words_per_topic = 20;
  std::int32_t doc_length = 40;
  std::int32_t title_length = 6;
  /// Probability that a token comes from the document's main topic.
  double main_topic_share = 0.9;
  std::int32_t authors = 60;
  double author_zipf = 1.1;
  /// Probability that a document's main topic is its author's home topic.
  double author_loyalty = 0.7;
  std::int32_t citations_per_doc = 4;
  double citation_in_block = 0.9;
  double test_fraction = 0.1;
  std::uint64_t seed = 1;
};

/// Vocabulary "t<k>w<i>", labels "class<k>", author names "S Author<i>".
Corpus generate_synthetic(const SyntheticSpec& spec);

/// The same corpus as line-delimited generic records (title and abstract text).
void write_generic_records(const Corpus& corpus, const std::filesystem::path& path);

}  // namespace cntm
