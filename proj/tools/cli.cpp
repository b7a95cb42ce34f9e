#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <memory>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "cntm/corpus.hpp"
#include "cntm/eval.hpp"
#include "cntm/model.hpp"
#include "cntm/sampler.hpp"
#include "cntm/synthetic.hpp"

namespace cntm::cli {

namespace fs = std::filesystem;

namespace {

/// A usage problem detected after flag parsing (missing path, bad combination).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void require_exists(const fs::path& p) {
  if (!fs::exists(p)) throw UsageError("no such file or directory: " + p.string());
}

fs::path bundle_path(const fs::path& data) {
  require_exists(data);
  if (fs::is_directory(data)) {
    const auto p = data / "corpus.json";
    require_exists(p);
    return p;
  }
  return data;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::shared_ptr<const Corpus> corpus_for(const Corpus& base, const ModelConfig& config) {
  return std::make_shared<const Corpus>(merge_authors(base, config.eta, config.use_labels));
}

// ---------------------------------------------------------------- ingest

struct IngestArgs {
  std::string data;
  std::string format = "generic";
  std::string out;
  std::string stopwords;
  std::string exclusion_words;
  std::string honorifics;
  std::string phrases;
  double common_threshold = 0.18;
  std::int64_t rare_count = 50;
  double test_fraction = 0.1;
  std::uint64_t seed = 1;
};

int cmd_ingest(const IngestArgs& a, std::ostream& out) {
  require_exists(a.data);
  std::pair<Corpus, IngestReport> loaded;
  if (a.format == "linqs") {
    fs::path content;
    fs::path cites;
    if (fs::is_directory(a.data)) {
      for (const auto& entry : fs::directory_iterator(a.data)) {
        if (entry.path().extension() == ".content") content = entry.path();
        if (entry.path().extension() == ".cites") cites = entry.path();
      }
      if (content.empty() || cites.empty()) {
        throw UsageError("LINQS directory " + a.data + " needs a .content and a .cites file");
      }
    } else {
      content = a.data;
      cites = fs::path(a.data).replace_extension(".cites");
      require_exists(cites);
    }
    loaded = load_linqs(content, cites);
  } else {
    GenericOptions options;
    options.filter.common_threshold = a.common_threshold;
    options.filter.rare_count = a.rare_count;
    if (!a.stopwords.empty()) {
      require_exists(a.stopwords);
      options.filter.stopwords = read_word_list(a.stopwords);
    }
    options.exclusion_words = default_exclusion_words();
    if (!a.exclusion_words.empty()) {
      require_exists(a.exclusion_words);
      options.exclusion_words = read_word_list(a.exclusion_words);
    }
    options.honorifics = default_honorifics();
    if (!a.honorifics.empty()) {
      require_exists(a.honorifics);
      options.honorifics = read_word_list(a.honorifics);
    }
    if (!a.phrases.empty()) {
      require_exists(a.phrases);
      std::ifstream in(a.phrases);
      std::string line;
      while (std::getline(in, line)) {
        if (!trim(line).empty()) options.phrases.push_back(trim(line));
      }
    }
    loaded = load_generic(a.data, options);
  }
  auto& [corpus, report] = loaded;
  Rng rng(a.seed);
  split(corpus, a.test_fraction, rng);

  fs::create_directories(a.out);
  save_bundle(corpus, fs::path(a.out) / "corpus.json");
  std::size_t test = 0;
  for (const auto& d : corpus.documents) test += d.split == Split::kTest ? 1 : 0;
  std::ostringstream text;
  text << "publications=" << report.documents_kept << "\n"
       << "citations=" << report.citations << "\n"
       << "unique_citation_edges=" << corpus.graph.citation_count() << "\n"
       << "authors=" << report.authors << "\n"
       << "vocabulary=" << report.vocabulary << "\n"
       << "tokens=" << report.tokens << "\n"
       << "documents_dropped=" << report.documents_dropped << "\n"
       << "citations_dropped=" << report.citations_dropped << "\n"
       << "train_documents=" << corpus.documents.size() - test << "\n"
       << "test_documents=" << test << "\n";
  for (const auto& w : report.warnings) text << "# warning: " << w << "\n";
  write_text(fs::path(a.out) / "ingest_report.txt", text.str());
  out << text.str();
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string data;
  std::string out;
  std::string variant = "full";
  std::optional<std::int32_t> topic_cap;
  std::optional<std::int32_t> fixed_k;
  std::int32_t initial_topics = 0;
  std::int64_t iterations = 2000;
  std::int64_t network_start = 1000;
  std::int64_t eta = 1;
  bool use_labels = false;
  std::uint64_t seed = 1;
  int chains = 1;
  double alpha_word = 0.7;
  double alpha_other = 0.01;
  double beta0 = 0.1;
  bool fix_concentration = false;
  bool fix_lambda = false;
  std::string resume;
  std::int64_t checkpoint_every = 0;
  bool timing = false;
  bool verbose = false;
};

ModelConfig config_from(const TrainArgs& a) {
  ModelConfig c;
  auto v = parse_variant(a.variant);
  if (!v) throw UsageError("unknown variant '" + a.variant + "' (full, no-network, atm, hdp-lda)");
  c.variant = *v;
  if (a.topic_cap && a.fixed_k) throw UsageError("--topic-cap and --fixed-k are exclusive");
  if (a.fixed_k) {
    c.topic_cap = *a.fixed_k;
    c.initial_topics = *a.fixed_k;
  } else {
    c.topic_cap = a.topic_cap.value_or(20);
    c.initial_topics = a.initial_topics;
  }
  c.iterations = a.iterations;
  c.network_start = a.network_start;
  c.eta = a.eta;
  c.use_labels = a.use_labels;
  c.seed = a.seed;
  c.beta0 = a.beta0;
  for (int l = 0; l < kLevelCount; ++l) {
    const bool word = l == kGamma || l == kPhi || l == kPhiPrime;
    c.discount[static_cast<std::size_t>(l)] = word ? a.alpha_word : a.alpha_other;
  }
  c.sample_concentration = !a.fix_concentration;
  c.sample_lambda = !a.fix_lambda;
  c.validate();
  return c;
}

void write_authors(const Corpus& corpus, const fs::path& path) {
  std::vector<std::int64_t> training(corpus.authors.size(), 0);
  for (const auto& d : corpus.documents) {
    if (d.split == Split::kTrain && d.author >= 0) ++training[static_cast<std::size_t>(d.author)];
  }
  std::ostringstream text;
  text << "id\tname\tdummy\ttraining_documents\n";
  for (std::size_t a = 0; a < corpus.authors.size(); ++a) {
    text << a << '\t' << corpus.authors[a].name << '\t' << (corpus.authors[a].dummy ? 1 : 0) << '\t'
         << training[a] << '\n';
  }
  write_text(path, text.str());
}

void run_chain(ModelState& state, const fs::path& dir, const TrainArgs& a, bool append,
               std::ostream* progress) {
  fs::create_directories(dir);
  std::ofstream log(dir / "stats.log", append ? std::ios::app : std::ios::trunc);
  if (!log) throw std::runtime_error("cannot write " + (dir / "stats.log").string());
  const auto checkpoint = dir / "checkpoint.json";
  train(state, [&](const SweepStats& stats, const ModelState& s) {
    log << format_stats(stats, a.timing) << '\n';
    if (a.checkpoint_every > 0 && stats.iteration % a.checkpoint_every == 0) {
      log.flush();
      s.save_checkpoint(checkpoint);
    }
    if (progress && stats.iteration % 100 == 0) {
      *progress << "iteration " << stats.iteration << " log_joint " << fmt(stats.log_joint)
                << " k_active " << stats.k_active << "\n";
    }
    return true;
  });
  log.flush();
  state.save_checkpoint(checkpoint);
}

int cmd_train(const TrainArgs& a, const CLI::App& sub, std::ostream& out, std::ostream& err) {
  const Corpus base = load_bundle(bundle_path(a.data));
  if (a.chains < 1) throw UsageError("--chains must be at least 1");
  fs::create_directories(a.out);

  if (!a.resume.empty()) {
    require_exists(a.resume);
    // The checkpoint fixes the model; only the iteration budget may change.
    std::ifstream probe(a.resume);
    auto j = nlohmann::json::parse(probe, nullptr, false);
    if (j.is_discarded() || !j.contains("config")) throw CheckpointError(a.resume + ": not a checkpoint");
    ModelConfig cfg;
    cfg.eta = j["config"].value("eta", std::int64_t{1});
    cfg.use_labels = j["config"].value("use_labels", false);
    auto corpus = corpus_for(base, cfg);
    ModelState state = ModelState::load_checkpoint(a.resume, corpus);
    if (sub.count("--iterations") > 0) state.config.iterations = a.iterations;
    const fs::path dir = a.out;
    const bool same_dir = fs::exists(dir / "checkpoint.json") &&
                          fs::equivalent(dir / "checkpoint.json", a.resume);
    run_chain(state, dir, a, same_dir, a.verbose ? &err : nullptr);
    out << "resumed to iteration " << state.iteration << " log_joint=" << fmt(state.log_joint())
        << " k_active=" << state.active_topics() << "\n";
    return kExitOk;
  }

  const ModelConfig config = config_from(a);
  auto corpus = corpus_for(base, config);
  write_authors(*corpus, fs::path(a.out) / "authors.tsv");

  std::vector<std::unique_ptr<ModelState>> states(static_cast<std::size_t>(a.chains));
  std::vector<std::exception_ptr> errors(states.size());
  auto chain_dir = [&](std::size_t c) {
    return a.chains == 1 ? fs::path(a.out) : fs::path(a.out) / ("chain" + std::to_string(c));
  };
  auto work = [&](std::size_t c) {
    try {
      ModelConfig cfg = config;
      cfg.seed = config.seed + c;
      states[c] = std::make_unique<ModelState>(ModelState::init_random(corpus, cfg));
      run_chain(*states[c], chain_dir(c), a, false, a.verbose && a.chains == 1 ? &err : nullptr);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  if (a.chains == 1) {
    work(0);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t c = 0; c < states.size(); ++c) threads.emplace_back(work, c);
    for (auto& t : threads) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (std::size_t c = 0; c < states.size(); ++c) {
    out << "chain=" << c << " seed=" << config.seed + c << " iterations=" << states[c]->iteration
        << " log_joint=" << fmt(states[c]->log_joint()) << " k_active=" << states[c]->active_topics()
        << " checkpoint=" << (chain_dir(c) / "checkpoint.json").string() << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- eval, report, dot

ModelState load_model(const std::string& data, const std::string& checkpoint) {
  require_exists(checkpoint);
  const Corpus base = load_bundle(bundle_path(data));
  std::ifstream probe(checkpoint);
  auto j = nlohmann::json::parse(probe, nullptr, false);
  if (j.is_discarded() || !j.contains("config")) throw CheckpointError(checkpoint + ": not a checkpoint");
  ModelConfig cfg;
  cfg.eta = j["config"].value("eta", std::int64_t{1});
  cfg.use_labels = j["config"].value("use_labels", false);
  return ModelState::load_checkpoint(checkpoint, corpus_for(base, cfg));
}

struct EvalArgs {
  std::string data;
  std::vector<std::string> checkpoints;
  std::string out;
  std::uint64_t seed = 1;
  int sweeps = 50;
  int burn_in = 10;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  FoldInOptions options;
  options.seed = a.seed;
  options.sweeps = a.sweeps;
  options.burn_in = a.burn_in;
  if (options.sweeps < 1 || options.burn_in < 0 || options.burn_in >= options.sweeps) {
    throw UsageError("fold-in needs 0 <= burn-in < sweeps");
  }
  std::ostringstream text;
  std::map<std::string, std::vector<double>> collected;
  std::set<std::string> notes;
  for (std::size_t r = 0; r < a.checkpoints.size(); ++r) {
    const ModelState state = load_model(a.data, a.checkpoints[r]);
    const Metrics m = evaluate(state, options);
    if (a.checkpoints.size() > 1) text << "# run=" << r << " checkpoint=" << a.checkpoints[r] << "\n";
    if (a.checkpoints.size() == 1) text << format_metrics(m);
    for (const auto& [k, v] : m.values) collected[k].push_back(v);
    for (const auto& n : m.notes) notes.insert(n);
    if (a.checkpoints.size() > 1) {
      for (const auto& [k, v] : m.values) text << "run" << r << "." << k << "=" << fmt(v) << "\n";
    }
  }
  if (a.checkpoints.size() > 1) {
    for (const auto& [k, values] : collected) {
      const auto n = static_cast<double>(values.size());
      double mean = 0.0;
      for (double v : values) mean += v;
      mean /= n;
      double var = 0.0;
      for (double v : values) var += (v - mean) * (v - mean);
      const double se = values.size() > 1 ? std::sqrt(var / (n - 1.0) / n) : 0.0;
      text << k << "_mean=" << fmt(mean) << "\n" << k << "_se=" << fmt(se) << "\n";
    }
    for (const auto& n : notes) text << "# " << n << "\n";
  }
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    write_text(fs::path(a.out) / "metrics.txt", text.str());
  }
  out << text.str();
  return kExitOk;
}

struct ReportArgs {
  std::string data;
  std::string checkpoint;
  std::string out;
  int top_n = 5;
};

std::vector<std::size_t> top_words(const std::vector<double>& dist, int n) {
  std::vector<std::size_t> order(dist.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto count = std::min<std::size_t>(static_cast<std::size_t>(n), order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end(),
                    [&](std::size_t x, std::size_t y) { return dist[x] > dist[y] || (dist[x] == dist[y] && x < y); });
  order.resize(count);
  return order;
}

std::string words_of(const ModelState& s, const std::vector<double>& dist, int n) {
  std::string text;
  for (auto w : top_words(dist, n)) {
    if (!text.empty()) text += ' ';
    text += s.corpus->vocabulary.word(static_cast<std::int32_t>(w));
  }
  return text;
}

int cmd_report(const ReportArgs& a, std::ostream& out) {
  if (a.top_n < 1) throw UsageError("--top-n must be at least 1");
  const ModelState s = load_model(a.data, a.checkpoint);
  const auto phi = s.phi_estimate();
  std::ostringstream text;
  text << "# topics (top " << a.top_n << " words by phi)\n";
  for (const auto& [k, tc] : s.tree.node(s.mu).counts) {
    text << "topic " << k << ": " << words_of(s, phi[static_cast<std::size_t>(k)], a.top_n) << "\n";
  }
  if (!s.config.has_level(kNu)) {
    text << "# this variant has no author level; author report omitted\n";
  } else {
    text << "# authors (dominant topic of nu)\n";
    const auto m = s.mu_estimate();
    for (std::size_t au = 0; au < s.nu.size(); ++au) {
      const auto& author = s.corpus->authors[au];
      text << "author \"" << author.name << "\"" << (author.dummy ? " (dummy)" : "") << ": ";
      if (s.tree.node(s.nu[au]).customers == 0) {
        text << "no preference\n";
        continue;
      }
      const auto k = dominant_topic(s.tree.estimate(s.nu[au], m));
      text << "topic " << k << " (" << words_of(s, phi[k], a.top_n) << ")\n";
    }
  }
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    write_text(fs::path(a.out) / "report.txt", text.str());
  }
  out << text.str();
  return kExitOk;
}

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += ch;
  }
  return out;
}

struct DotArgs {
  std::string data;
  std::string checkpoint;
  std::string out;
  double threshold = 0.1;
  int top_n = 3;
};

int cmd_export_dot(const DotArgs& a, std::ostream& out) {
  const ModelState s = load_model(a.data, a.checkpoint);
  if (!s.config.has_level(kNu)) throw UsageError("this variant has no author level to export");
  const auto phi = s.phi_estimate();
  const auto m = s.mu_estimate();
  std::ostringstream text;
  text << "digraph author_topics {\n  rankdir=LR;\n";
  for (const auto& [k, tc] : s.tree.node(s.mu).counts) {
    text << "  \"topic" << k << "\" [shape=ellipse, label=\"topic " << k << ": "
         << dot_escape(words_of(s, phi[static_cast<std::size_t>(k)], a.top_n)) << "\"];\n";
  }
  for (std::size_t au = 0; au < s.nu.size(); ++au) {
    if (s.tree.node(s.nu[au]).customers == 0) continue;
    text << "  \"author" << au << "\" [shape=box, label=\"" << dot_escape(s.corpus->authors[au].name)
         << "\"];\n";
    const auto nu_hat = s.tree.estimate(s.nu[au], m);
    for (std::size_t k = 0; k < nu_hat.size(); ++k) {
      if (nu_hat[k] <= a.threshold) continue;
      char w[32];
      std::snprintf(w, sizeof w, "%.4f", nu_hat[k]);
      text << "  \"author" << au << "\" -> \"topic" << k << "\" [weight=" << w << ", label=\"" << w
           << "\"];\n";
    }
  }
  text << "}\n";
  fs::create_directories(a.out);
  write_text(fs::path(a.out) / "authors_topics.dot", text.str());
  out << "wrote " << (fs::path(a.out) / "authors_topics.dot").string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- synth

int cmd_synth(const SyntheticSpec& spec, const std::string& dir, std::ostream& out) {
  const Corpus corpus = generate_synthetic(spec);
  fs::create_directories(dir);
  save_bundle(corpus, fs::path(dir) / "corpus.json");
  write_generic_records(corpus, fs::path(dir) / "corpus.jsonl");
  out << "documents=" << corpus.documents.size() << "\nvocabulary=" << corpus.vocabulary.size()
      << "\nauthors=" << corpus.authors.size() << "\ncitations=" << corpus.graph.citation_count()
      << "\n";
  return kExitOk;
}

}  // namespace

std::vector<std::string> config_flags(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  std::vector<std::string> flags;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path + ":" + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    std::replace(key.begin(), key.end(), '_', '-');
    if (key.empty()) throw UsageError(path + ":" + std::to_string(line_no) + ": empty key");
    flags.push_back("--" + key + "=" + value);
  }
  return flags;
}

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Citation-network topic model: ingest, train, evaluate and report"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string config_path;
  app.add_option("--config", config_path, "key = value file; flags given on the command line win");

  IngestArgs ingest;
  auto* s_ingest = app.add_subcommand("ingest", "Build a corpus bundle from LINQS or generic input");
  s_ingest->add_option("--data", ingest.data, "Input file or LINQS directory")->required();
  s_ingest->add_option("--format", ingest.format)->check(CLI::IsMember({"linqs", "generic"}));
  s_ingest->add_option("--out", ingest.out, "Output directory")->required();
  s_ingest->add_option("--stopwords", ingest.stopwords, "Stopword file, one per line");
  s_ingest->add_option("--exclusion-words", ingest.exclusion_words, "Institution words for author filtering");
  s_ingest->add_option("--honorifics", ingest.honorifics, "Honorifics stripped from author names");
  s_ingest->add_option("--phrases", ingest.phrases, "Multi-word phrases, one per line");
  s_ingest->add_option("--common-threshold", ingest.common_threshold, "Max document fraction of a word");
  s_ingest->add_option("--rare-count", ingest.rare_count, "Min corpus frequency of a word");
  s_ingest->add_option("--test-fraction", ingest.test_fraction);
  s_ingest->add_option("--seed", ingest.seed);

  TrainArgs train_args;
  auto* s_train = app.add_subcommand("train", "Run the sampler and write checkpoint and stats");
  s_train->add_option("--data", train_args.data, "Corpus bundle or its directory")->required();
  s_train->add_option("--out", train_args.out, "Output directory")->required();
  s_train->add_option("--variant", train_args.variant)
      ->check(CLI::IsMember({"full", "no-network", "no_network", "atm", "hdp-lda", "hdp_lda_bursty"}));
  s_train->add_option("--topic-cap", train_args.topic_cap);
  s_train->add_option("--fixed-k", train_args.fixed_k);
  s_train->add_option("--initial-topics", train_args.initial_topics);
  s_train->add_option("--iterations", train_args.iterations);
  s_train->add_option("--network-start", train_args.network_start);
  s_train->add_option("--eta", train_args.eta);
  s_train->add_flag("--use-labels", train_args.use_labels);
  s_train->add_option("--seed", train_args.seed);
  s_train->add_option("--chains", train_args.chains);
  s_train->add_option("--alpha-word", train_args.alpha_word);
  s_train->add_option("--alpha-other", train_args.alpha_other);
  s_train->add_option("--beta0", train_args.beta0);
  s_train->add_flag("--fix-concentration", train_args.fix_concentration);
  s_train->add_flag("--fix-lambda", train_args.fix_lambda);
  s_train->add_option("--resume", train_args.resume, "Continue from this checkpoint");
  s_train->add_option("--checkpoint-every", train_args.checkpoint_every);
  s_train->add_flag("--timing", train_args.timing, "Add wall-clock seconds to stats lines");
  s_train->add_flag("--verbose", train_args.verbose);

  EvalArgs eval_args;
  auto* s_eval = app.add_subcommand("eval", "Perplexity, purity and NMI of trained checkpoints");
  s_eval->add_option("--data", eval_args.data)->required();
  s_eval->add_option("--checkpoint", eval_args.checkpoints, "Repeat to summarise several runs")
      ->required()
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  s_eval->add_option("--out", eval_args.out);
  s_eval->add_option("--seed", eval_args.seed);
  s_eval->add_option("--fold-sweeps", eval_args.sweeps);
  s_eval->add_option("--fold-burn-in", eval_args.burn_in);

  ReportArgs report_args;
  auto* s_report = app.add_subcommand("report", "Top words per topic and dominant topic per author");
  s_report->add_option("--data", report_args.data)->required();
  s_report->add_option("--checkpoint", report_args.checkpoint)->required();
  s_report->add_option("--out", report_args.out);
  s_report->add_option("--top-n", report_args.top_n);

  DotArgs dot_args;
  auto* s_dot = app.add_subcommand("export-dot", "Author-topic graph in DOT format");
  s_dot->add_option("--data", dot_args.data)->required();
  s_dot->add_option("--checkpoint", dot_args.checkpoint)->required();
  s_dot->add_option("--out", dot_args.out)->required();
  s_dot->add_option("--threshold", dot_args.threshold);
  s_dot->add_option("--top-n", dot_args.top_n);

  SyntheticSpec synth;
  std::string synth_out;
  auto* s_synth = app.add_subcommand("synth", "Write a planted-topic synthetic corpus");
  s_synth->add_option("--out", synth_out)->required();
  s_synth->add_option("--documents", synth.documents);
  s_synth->add_option("--topics", synth.topics);
  s_synth->add_option("--words-per-topic", synth.words_per_topic);
  s_synth->add_option("--doc-length", synth.doc_length);
  s_synth->add_option("--title-length", synth.title_length);
  s_synth->add_option("--authors", synth.authors);
  s_synth->add_option("--citations-per-doc", synth.citations_per_doc);
  s_synth->add_option("--test-fraction", synth.test_fraction);
  s_synth->add_option("--seed", synth.seed);

  try {
    // Config values are spliced in right after the subcommand so that
    // explicit flags, which come later, take precedence.
    std::vector<std::string> args;
    std::string config_file;
    for (std::size_t i = 0; i < raw_args.size(); ++i) {
      const auto& arg = raw_args[i];
      if (arg == "--config" && i + 1 < raw_args.size()) {
        config_file = raw_args[++i];
      } else if (arg.rfind("--config=", 0) == 0) {
        config_file = arg.substr(9);
      } else {
        args.push_back(arg);
      }
    }
    if (!config_file.empty()) {
      const auto extra = config_flags(config_file);
      auto sub = std::find_if(args.begin(), args.end(), [](const std::string& s) { return !s.empty() && s[0] != '-'; });
      if (sub != args.end()) args.insert(sub + 1, extra.begin(), extra.end());
    }
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (s_ingest->parsed()) return cmd_ingest(ingest, out);
    if (s_train->parsed()) return cmd_train(train_args, *s_train, out, err);
    if (s_eval->parsed()) return cmd_eval(eval_args, out);
    if (s_report->parsed()) return cmd_report(report_args, out);
    if (s_dot->parsed()) return cmd_export_dot(dot_args, out);
    if (s_synth->parsed()) return cmd_synth(synth, synth_out, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace cntm::cli
