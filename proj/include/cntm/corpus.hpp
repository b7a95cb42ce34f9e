#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cntm/random.hpp"

namespace cntm {

/// Bad input data (malformed line, duplicate id, ...).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user configuration (empty vocabulary, bad thresholds, ...).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Split : std::uint8_t { kTrain, kTest };

struct Document {
  std::string id;
  /// Title tokens first, then abstract tokens.
  std::vector<std::int32_t> tokens;
  std::int32_t title_length = 0;
  std::int32_t author = -1;
  std::optional<std::string> label;
  Split split = Split::kTrain;

  std::size_t size() const { return tokens.size(); }
};

struct Author {
  std::string name;
  bool dummy = false;
};

class Vocabulary {
 public:
  std::int32_t add(const std::string& word);
  std::optional<std::int32_t> find(const std::string& word) const;
  const std::string& word(std::int32_t id) const { return words_[static_cast<std::size_t>(id)]; }
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::int32_t> index_;
};

/// Directed citation edges (citing, cited), including (i, i) for every document.
class CitationGraph {
 public:
  CitationGraph() = default;
  /// Sorts, deduplicates and adds the diagonal.
  CitationGraph(std::size_t documents, std::vector<std::pair<std::int32_t, std::int32_t>> edges);

  const std::vector<std::pair<std::int32_t, std::int32_t>>& edges() const { return edges_; }
  std::size_t documents() const { return out_degree_.size(); }
  std::int64_t out_degree(std::size_t i) const { return out_degree_[i]; }
  std::int64_t in_degree(std::size_t i) const { return in_degree_[i]; }
  /// Number of edges excluding the diagonal.
  std::size_t citation_count() const { return edges_.size() - out_degree_.size(); }

 private:
  std::vector<std::pair<std::int32_t, std::int32_t>> edges_;
  std::vector<std::int64_t> out_degree_;
  std::vector<std::int64_t> in_degree_;
};

struct Corpus {
  std::vector<Document> documents;
  Vocabulary vocabulary;
  std::vector<Author> authors;
  CitationGraph graph;

  std::vector<std::string> class_names() const;
  std::size_t token_count() const;
  std::int32_t find_author(const std::string& name) const;
  std::int32_t intern_author(const std::string& name, bool dummy);
};

struct VocabularyFilterSpec {
  std::set<std::string> stopwords;
  double common_threshold = 0.18;
  std::int64_t rare_count = 50;
};

struct IngestReport {
  std::size_t documents_kept = 0;
  std::size_t documents_dropped = 0;
  std::size_t citations = 0;
  std::size_t citations_dropped = 0;
  std::size_t authors = 0;
  std::size_t vocabulary = 0;
  std::size_t tokens = 0;
  std::vector<std::string> warnings;
};

struct GenericOptions {
  VocabularyFilterSpec filter;
  std::set<std::string> exclusion_words;
  std::set<std::string> honorifics;
  std::vector<std::string> phrases;
};

inline constexpr const char* kFallbackAuthor = "__unknown__";
inline constexpr const char* kMergedAuthor = "__merged__";

std::set<std::string> default_honorifics();
std::set<std::string> default_exclusion_words();
std::set<std::string> read_word_list(const std::filesystem::path& path);

/// "Dr. Bruce Lee" -> "B Lee"; nullopt for empty or institutional names.
std::optional<std::string> normalize_author_name(const std::string& raw,
                                                 const std::set<std::string>& exclusion_words,
                                                 const std::set<std::string>& honorifics);

/// Lower-cases, splits on non-alphanumerics and joins listed multi-word phrases
/// (greedy longest match) into single tokens with '_'.
std::vector<std::string> tokenize(const std::string& text, const std::vector<std::string>& phrases = {});

struct FilteredText {
  Vocabulary vocabulary;
  std::vector<std::vector<std::int32_t>> documents;
};

/// Keeps tokens that are not stopwords, occur in at most `common_threshold`
/// of the documents and at least `rare_count` times overall. The vocabulary
/// is sorted; documents are never dropped here, so the filter is idempotent.
FilteredText build_vocabulary(const std::vector<std::vector<std::string>>& documents,
                              const VocabularyFilterSpec& spec);

std::pair<Corpus, IngestReport> load_linqs(const std::filesystem::path& content,
                                           const std::filesystem::path& cites);
std::pair<Corpus, IngestReport> load_generic(const std::filesystem::path& path,
                                             const GenericOptions& options);

/// Replaces authors with fewer than `eta` training documents by a dummy author
/// named after the document label (use_labels) or by a single merged author.
/// Returns the merged corpus; throws ConfigError listing unlabeled documents.
Corpus merge_authors(const Corpus& corpus, std::int64_t eta, bool use_labels);

/// floor(test_fraction * D) documents chosen uniformly go to the test split.
void split(Corpus& corpus, double test_fraction, Rng& rng);

void save_bundle(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_bundle(const std::filesystem::path& path);
/// FNV-1a over the canonical bundle encoding.
std::uint64_t corpus_hash(const Corpus& corpus);

}  // namespace cntm
