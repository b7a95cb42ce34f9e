#include "cntm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <cstdio>
#include <stdexcept>

namespace cntm {

namespace {

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<double> author_base(const ModelState& s, std::int32_t author) {
  const auto m = s.mu_estimate();
  if (!s.config.has_level(kNu)) return m;
  if (author < 0 || static_cast<std::size_t>(author) >= s.nu.size()) return m;
  return s.tree.estimate(s.nu[static_cast<std::size_t>(author)], m);
}

}  // namespace

std::vector<double> estimate_test_theta(const ModelState& s, const Document& doc,
                                        const std::vector<std::vector<double>>& phi_hat,
                                        const FoldInOptions& options) {
  const auto k_cap = static_cast<std::size_t>(s.cap());
  const auto base = author_base(s, doc.author);

  PypTree tree;
  NodeId theta = kNoNode;
  NodeId root = kNoNode;
  const auto theta_params = s.tree.params(s.group[kTheta]);
  if (s.config.has_level(kThetaPrime)) {
    const auto g = tree.add_group(s.tree.params(s.group[kThetaPrime]));
    root = tree.add_node(NodeKind::kPyp, g, kNoNode);
    theta = tree.add_node(NodeKind::kPyp, tree.add_group(theta_params), root);
  } else {
    root = tree.add_node(NodeKind::kPyp, tree.add_group(theta_params), kNoNode);
    theta = root;
  }
  tree.set_base(root, BaseMeasure{0.0, base});

  auto current_estimate = [&] {
    if (root == theta) return tree.estimate(theta, base);
    return tree.estimate(theta, tree.estimate(root, base));
  };

  std::vector<Key> words(doc.tokens.begin(), doc.tokens.begin() + doc.title_length);
  if (words.empty() || options.sweeps <= options.burn_in) return current_estimate();

  std::seed_seq seq{static_cast<std::uint32_t>(options.seed), static_cast<std::uint32_t>(options.seed >> 32),
                    static_cast<std::uint32_t>(fnv1a(doc.id)),
                    static_cast<std::uint32_t>(fnv1a(doc.id) >> 32)};
  Rng rng(seq);
  std::vector<double> weight(k_cap);
  std::vector<Key> z(words.size());
  for (std::size_t n = 0; n < words.size(); ++n) {
    double total = 0.0;
    for (std::size_t k = 0; k < k_cap; ++k) {
      weight[k] = base[k] * phi_hat[k][static_cast<std::size_t>(words[n])];
      total += weight[k];
    }
    z[n] = static_cast<Key>(sample_index(weight, total, rng));
    tree.seat_customer(theta, z[n], rng);
  }

  const ChainPath path = tree.path(theta);
  std::vector<ChainWeights> chains(k_cap);
  std::vector<double> average(k_cap, 0.0);
  int kept = 0;
  for (int sweep = 0; sweep < options.sweeps; ++sweep) {
    for (std::size_t n = 0; n < words.size(); ++n) {
      const Key old = z[n];
      tree.remove_customer(theta, old, rng);
      if (tree.highest_open_deficit(path, old) >= 0) {
        tree.add_customer(theta, old, rng);
        continue;
      }
      double total = 0.0;
      for (std::size_t k = 0; k < k_cap; ++k) {
        chains[k] = tree.chain_weights(path, static_cast<Key>(k));
        weight[k] = chains[k].total * phi_hat[k][static_cast<std::size_t>(words[n])];
        total += weight[k];
      }
      const auto k = sample_index(weight, total, rng);
      const auto& w = chains[k];
      const auto o = sample_index(std::span<const double>(w.outcome.data(), static_cast<std::size_t>(w.depth + 1)),
                                  w.total, rng);
      tree.apply_chain(path, static_cast<Key>(k), static_cast<int>(o));
      z[n] = static_cast<Key>(k);
    }
    if (sweep >= options.burn_in) {
      const auto est = current_estimate();
      for (std::size_t k = 0; k < k_cap; ++k) average[k] += est[k];
      ++kept;
    }
  }
  for (double& v : average) v /= static_cast<double>(kept);
  return average;
}

PerplexityResult perplexity(const std::vector<std::vector<double>>& phi,
                            const std::vector<std::vector<double>>& theta,
                            const std::vector<std::vector<std::int32_t>>& scored,
                            const std::vector<bool>& known) {
  if (theta.size() != scored.size()) throw std::invalid_argument("perplexity: shape mismatch");
  PerplexityResult r;
  double log_sum = 0.0;
  for (std::size_t d = 0; d < scored.size(); ++d) {
    for (auto w : scored[d]) {
      const auto wi = static_cast<std::size_t>(w);
      if (wi >= known.size() || !known[wi]) {
        ++r.oov_skipped;
        continue;
      }
      double p = 0.0;
      for (std::size_t k = 0; k < phi.size(); ++k) p += phi[k][wi] * theta[d][k];
      log_sum += std::log(p);
      ++r.tokens;
    }
  }
  r.perplexity = r.tokens > 0 ? std::exp(-log_sum / static_cast<double>(r.tokens))
                              : std::numeric_limits<double>::quiet_NaN();
  return r;
}

PerplexityResult train_perplexity(const ModelState& s) {
  const auto phi = s.phi_estimate();
  std::vector<std::vector<double>> theta;
  std::vector<std::vector<std::int32_t>> scored;
  for (std::size_t d = 0; d < s.num_docs(); ++d) {
    theta.push_back(s.topic_estimate(s.theta[d]));
    scored.push_back(s.document(d).tokens);
  }
  return perplexity(phi, theta, scored, std::vector<bool>(s.corpus->vocabulary.size(), true));
}

PerplexityResult test_perplexity(const ModelState& s, const FoldInOptions& options) {
  const auto phi = s.phi_estimate();
  std::vector<bool> known(s.corpus->vocabulary.size(), false);
  for (std::size_t d = 0; d < s.num_docs(); ++d) {
    for (auto w : s.document(d).tokens) known[static_cast<std::size_t>(w)] = true;
  }
  std::vector<std::vector<double>> theta;
  std::vector<std::vector<std::int32_t>> scored;
  for (const auto& doc : s.corpus->documents) {
    if (doc.split != Split::kTest) continue;
    theta.push_back(estimate_test_theta(s, doc, phi, options));
    scored.emplace_back(doc.tokens.begin() + doc.title_length, doc.tokens.end());
  }
  return perplexity(phi, theta, scored, known);
}

std::size_t dominant_topic(std::span<const double> distribution) {
  if (distribution.empty()) throw std::invalid_argument("dominant topic of an empty distribution");
  std::size_t best = 0;
  for (std::size_t k = 1; k < distribution.size(); ++k) {
    if (distribution[k] > distribution[best]) best = k;
  }
  return best;
}

namespace {

struct Contingency {
  std::map<std::pair<std::int32_t, std::int32_t>, double> joint;
  std::map<std::int32_t, double> rows;
  std::map<std::int32_t, double> cols;
  double n = 0.0;
};

Contingency contingency(std::span<const std::int32_t> clusters, std::span<const std::int32_t> classes) {
  if (clusters.empty()) throw std::invalid_argument("clustering metrics need at least one document");
  if (clusters.size() != classes.size()) throw std::invalid_argument("clusters and classes differ in size");
  Contingency c;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    c.joint[{clusters[i], classes[i]}] += 1.0;
    c.rows[clusters[i]] += 1.0;
    c.cols[classes[i]] += 1.0;
  }
  c.n = static_cast<double>(clusters.size());
  return c;
}

double entropy(const std::map<std::int32_t, double>& counts, double n) {
  double h = 0.0;
  for (const auto& [key, count] : counts) h -= count / n * std::log2(count / n);
  return h;
}

}  // namespace

double purity(std::span<const std::int32_t> clusters, std::span<const std::int32_t> classes) {
  const Contingency c = contingency(clusters, classes);
  std::map<std::int32_t, double> best;
  for (const auto& [kj, count] : c.joint) best[kj.first] = std::max(best[kj.first], count);
  double total = 0.0;
  for (const auto& [k, count] : best) total += count;
  return total / c.n;
}

double nmi(std::span<const std::int32_t> clusters, std::span<const std::int32_t> classes) {
  const Contingency c = contingency(clusters, classes);
  double mutual = 0.0;
  for (const auto& [kj, count] : c.joint) {
    mutual += count / c.n * std::log2(c.n * count / (c.rows.at(kj.first) * c.cols.at(kj.second)));
  }
  const double denom = entropy(c.rows, c.n) + entropy(c.cols, c.n);
  if (denom <= 0.0) return 0.0;
  return std::clamp(2.0 * mutual / denom, 0.0, 1.0);
}

ClusteringResult cluster_training_documents(const ModelState& s) {
  const auto names = s.corpus->class_names();
  ClusteringResult r;
  for (std::size_t d = 0; d < s.num_docs(); ++d) {
    const auto& label = s.document(d).label;
    if (!label) continue;
    const auto it = std::lower_bound(names.begin(), names.end(), *label);
    r.classes.push_back(static_cast<std::int32_t>(it - names.begin()));
    r.clusters.push_back(static_cast<std::int32_t>(dominant_topic(s.topic_estimate(s.theta[d]))));
  }
  return r;
}

Metrics evaluate(const ModelState& s, const FoldInOptions& options) {
  Metrics m;
  m.values["k_active"] = s.active_topics();
  const auto train = train_perplexity(s);
  m.values["perplexity_train"] = train.perplexity;
  const auto test = test_perplexity(s, options);
  if (test.tokens > 0) {
    m.values["perplexity_test"] = test.perplexity;
  } else {
    m.notes.push_back("no scorable test tokens; perplexity_test omitted");
  }
  m.values["oov_skipped"] = static_cast<double>(test.oov_skipped);
  const auto clusters = cluster_training_documents(s);
  if (clusters.clusters.empty()) {
    m.notes.push_back("corpus has no labels; purity and nmi omitted");
  } else {
    m.values["purity"] = purity(clusters.clusters, clusters.classes);
    m.values["nmi"] = nmi(clusters.clusters, clusters.classes);
  }
  return m;
}

std::string format_metrics(const Metrics& metrics) {
  std::string out;
  char buf[64];
  for (const auto& [key, value] : metrics.values) {
    std::snprintf(buf, sizeof buf, "%.17g", value);
    out += key + "=" + buf + "\n";
  }
  for (const auto& note : metrics.notes) out += "# " + note + "\n";
  return out;
}

}  // namespace cntm
