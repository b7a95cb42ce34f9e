#include "cntm/sampler.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

namespace cntm {

namespace {

ChainWeights weights_for(const PypTree& tree, const ChainPath& path, Key key, double gem_weight) {
  ChainOptions options;
  options.gem_new_key_weight = gem_weight;
  options.must_open_through = tree.highest_open_deficit(path, key);
  return tree.chain_weights(path, key, options);
}

int sample_outcome(const ChainWeights& w, Rng& rng) {
  return static_cast<int>(sample_index(
      std::span<const double>(w.outcome.data(), static_cast<std::size_t>(w.depth + 1)), w.total, rng));
}

}  // namespace

void sample_word_topic(ModelState& s, std::size_t d, std::size_t n) {
  const Key word = s.document(d).tokens[n];
  const std::int32_t old = s.z[d][n];
  s.tree.remove_customer(s.theta[d], old, s.rng);
  s.tree.remove_customer(s.word_start(d, old), word, s.rng);

  const ChainPath topic_path = s.tree.path(s.theta[d]);
  const ChainPath old_word_path = s.tree.path(s.word_start(d, old));
  if (s.tree.highest_open_deficit(topic_path, old) >= 0 ||
      s.tree.highest_open_deficit(old_word_path, word) >= 0) {
    // The removal left an entry with customers but no table; only the old
    // topic can restore it.
    s.tree.add_customer(s.theta[d], old, s.rng, 1.0);
    s.tree.add_customer(s.word_start(d, old), word, s.rng);
    return;
  }

  const double gem_weight = s.new_topic_weight();
  const auto k_cap = static_cast<std::size_t>(s.cap());
  std::vector<ChainWeights> topic_w(k_cap);
  std::vector<ChainWeights> word_w(k_cap);
  std::vector<double> joint(k_cap, 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < k_cap; ++k) {
    const auto key = static_cast<Key>(k);
    topic_w[k] = s.tree.chain_weights(topic_path, key, {-1, gem_weight});
    if (topic_w[k].total <= 0.0) continue;
    word_w[k] = s.tree.chain_weights(s.tree.path(s.word_start(d, key)), word);
    joint[k] = topic_w[k].total * word_w[k].total;
    total += joint[k];
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw std::logic_error("internal consistency error: no admissible topic for token " +
                           std::to_string(n) + " of document " + std::to_string(d));
  }
  const auto k = static_cast<std::int32_t>(sample_index(joint, total, s.rng));
  const auto ki = static_cast<std::size_t>(k);
  s.tree.apply_chain(topic_path, k, sample_outcome(topic_w[ki], s.rng));
  s.tree.apply_chain(s.tree.path(s.word_start(d, k)), word, sample_outcome(word_w[ki], s.rng));
  s.z[d][n] = k;
}

void gibbs_sweep_words(ModelState& s) {
  for (std::size_t d = 0; d < s.num_docs(); ++d) {
    for (std::size_t n = 0; n < s.z[d].size(); ++n) sample_word_topic(s, d, n);
  }
}

double poisson_rate(const ModelState& s, const std::vector<std::vector<double>>& th,
                    std::size_t i, std::size_t j) {
  double sum = 0.0;
  for (std::size_t k = 0; k < static_cast<std::size_t>(s.cap()); ++k) {
    sum += s.lambda_topic[k] * th[i][k] * th[j][k];
  }
  return s.lambda_plus[i] * s.lambda_minus[j] * sum;
}

CitingProposal propose_citing_topic(const ModelState& s, std::span<const double> theta_i,
                                    std::span<const double> theta_j) {
  const auto k_cap = static_cast<std::size_t>(s.cap());
  CitingProposal p;
  p.q.assign(k_cap, 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < k_cap; ++k) {
    p.q[k] = s.lambda_topic[k] * theta_i[k] * theta_j[k];
    total += p.q[k];
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    p.fallback = true;
    std::fill(p.q.begin(), p.q.end(), 0.0);
    const auto& root = s.tree.node(s.mu).counts;
    if (root.empty()) {
      std::fill(p.q.begin(), p.q.end(), 1.0);
    } else {
      for (const auto& [k, tc] : root) p.q[static_cast<std::size_t>(k)] = 1.0;
    }
    total = 0.0;
    for (double v : p.q) total += v;
  }
  for (double& v : p.q) v /= total;
  return p;
}

double citing_topic_target(ModelState& s, std::size_t i, std::size_t j, std::int32_t k) {
  const ChainPath pi = s.tree.path(s.network_node(i));
  const ChainPath pj = s.tree.path(s.network_node(j));
  const ChainWeights first = weights_for(s.tree, pi, k, s.new_topic_weight());
  double marginal = 0.0;
  for (int o = 0; o <= first.depth; ++o) {
    const double w = first.outcome[static_cast<std::size_t>(o)];
    if (w <= 0.0) continue;
    s.tree.apply_chain(pi, k, o);
    const ChainWeights second = weights_for(s.tree, pj, k, s.new_topic_weight());
    s.tree.revert_chain(pi, k, o);
    marginal += w * second.total;
  }
  return marginal * s.lambda_topic[static_cast<std::size_t>(k)];
}

bool mh_step_edge(ModelState& s, std::size_t e, NetworkSweepStats& stats) {
  Edge& edge = s.edges[e];
  const auto i = static_cast<std::size_t>(edge.citing);
  const auto j = static_cast<std::size_t>(edge.cited);
  const std::int32_t old = edge.topic;
  s.tree.remove_customer(s.network_node(i), old, s.rng);
  s.tree.remove_customer(s.network_node(j), old, s.rng);
  --s.h_at(i, old);
  --s.h_at(j, old);

  const bool forced =
      s.tree.highest_open_deficit(s.tree.path(s.network_node(i)), old) >= 0 ||
      s.tree.highest_open_deficit(s.tree.path(s.network_node(j)), old) >= 0;
  const auto theta_i = s.topic_estimate(s.network_node(i));
  const auto theta_j = s.topic_estimate(s.network_node(j));
  const CitingProposal proposal = propose_citing_topic(s, theta_i, theta_j);
  if (proposal.fallback) ++stats.fallbacks;
  const auto proposed = static_cast<std::int32_t>(sample_index(proposal.q, 1.0, s.rng));
  ++stats.proposals;

  bool accept = true;
  if (proposed != old) {
    if (forced) {
      accept = false;
    } else {
      const double q_new = proposal.q[static_cast<std::size_t>(proposed)];
      const double q_old = proposal.q[static_cast<std::size_t>(old)];
      const double pi_new = citing_topic_target(s, i, j, proposed);
      const double pi_old = citing_topic_target(s, i, j, old);
      const double ratio = (pi_new * q_old) / (pi_old * q_new);
      accept = ratio >= 1.0 || uniform01(s.rng) < ratio;
    }
  }
  if (accept) ++stats.accepted;
  const std::int32_t k = accept ? proposed : old;
  s.tree.add_customer(s.network_node(i), k, s.rng, 1.0);
  s.tree.add_customer(s.network_node(j), k, s.rng, 1.0);
  ++s.h_at(i, k);
  ++s.h_at(j, k);
  edge.topic = k;
  return accept;
}

void initialize_network(ModelState& s) {
  if (!s.config.uses_network() || s.theta_prime.empty()) {
    throw std::logic_error("network is not part of this model variant");
  }
  for (auto& edge : s.edges) {
    const auto i = static_cast<std::size_t>(edge.citing);
    const auto j = static_cast<std::size_t>(edge.cited);
    const auto theta_i = s.topic_estimate(s.network_node(i));
    const auto theta_j = s.topic_estimate(s.network_node(j));
    const CitingProposal proposal = propose_citing_topic(s, theta_i, theta_j);
    const auto k = static_cast<std::int32_t>(sample_index(proposal.q, 1.0, s.rng));
    s.tree.add_customer(s.network_node(i), k, s.rng, 1.0);
    s.tree.add_customer(s.network_node(j), k, s.rng, 1.0);
    ++s.h_at(i, k);
    ++s.h_at(j, k);
    edge.topic = k;
  }
  s.network_ready = true;
}

NetworkSweepStats network_sweep(ModelState& s) {
  NetworkSweepStats stats;
  if (!s.config.uses_network() || !s.network_ready) return stats;
  for (std::size_t e = 0; e < s.edges.size(); ++e) mh_step_edge(s, e, stats);
  return stats;
}

double sample_concentration(ModelState& s, int level) {
  const std::int32_t g = s.group[static_cast<std::size_t>(level)];
  if (g < 0) throw std::invalid_argument(std::string("level ") + level_name(level) + " is absent");
  const PypParams p = s.tree.params(g);
  double shape = s.config.tau0;
  double rate = s.config.tau1;
  for (std::size_t id = 0; id < s.tree.size(); ++id) {
    const PypNode& n = s.tree.node(static_cast<NodeId>(id));
    if (n.group != g || n.customers < 1) continue;
    const BetaDraw xi = sample_beta(static_cast<double>(n.customers), p.concentration, s.rng);
    const double complement = std::max(xi.complement, std::numeric_limits<double>::min());
    rate += -std::log(complement);
    for (std::int64_t t = 0; t < n.tables; ++t) {
      const double prob = p.concentration / (p.concentration + static_cast<double>(t) * p.discount);
      if (bernoulli(prob, s.rng)) shape += 1.0;
    }
  }
  double beta = sample_gamma(shape, rate, s.rng);
  beta = std::max(beta, std::numeric_limits<double>::min());
  s.tree.set_concentration(g, beta);
  return beta;
}

void draw_lambda_plus(ModelState& s, const std::vector<std::vector<double>>& th) {
  const auto k_cap = static_cast<std::size_t>(s.cap());
  std::vector<double> minus(k_cap, 0.0);
  for (std::size_t j = 0; j < s.num_docs(); ++j) {
    for (std::size_t k = 0; k < k_cap; ++k) minus[k] += s.lambda_minus[j] * th[j][k];
  }
  for (std::size_t i = 0; i < s.num_docs(); ++i) {
    double rate = s.config.eps1;
    for (std::size_t k = 0; k < k_cap; ++k) rate += s.lambda_topic[k] * th[i][k] * minus[k];
    s.lambda_plus[i] = sample_gamma(s.config.eps0 + static_cast<double>(s.out_degree[i]), rate, s.rng);
  }
}

void draw_lambda_minus(ModelState& s, const std::vector<std::vector<double>>& th) {
  const auto k_cap = static_cast<std::size_t>(s.cap());
  std::vector<double> plus(k_cap, 0.0);
  for (std::size_t j = 0; j < s.num_docs(); ++j) {
    for (std::size_t k = 0; k < k_cap; ++k) plus[k] += s.lambda_plus[j] * th[j][k];
  }
  for (std::size_t i = 0; i < s.num_docs(); ++i) {
    double rate = s.config.eps1;
    for (std::size_t k = 0; k < k_cap; ++k) rate += s.lambda_topic[k] * th[i][k] * plus[k];
    s.lambda_minus[i] = sample_gamma(s.config.eps0 + static_cast<double>(s.in_degree[i]), rate, s.rng);
  }
}

void draw_lambda_topic(ModelState& s, const std::vector<std::vector<double>>& th) {
  const auto k_cap = static_cast<std::size_t>(s.cap());
  std::vector<double> plus(k_cap, 0.0);
  std::vector<double> minus(k_cap, 0.0);
  std::vector<double> half_h(k_cap, 0.0);
  for (std::size_t d = 0; d < s.num_docs(); ++d) {
    for (std::size_t k = 0; k < k_cap; ++k) {
      plus[k] += s.lambda_plus[d] * th[d][k];
      minus[k] += s.lambda_minus[d] * th[d][k];
      half_h[k] += 0.5 * s.h_at(d, static_cast<std::int32_t>(k));
    }
  }
  for (std::size_t k = 0; k < k_cap; ++k) {
    const double rate = s.config.eps1 + s.lambda_topic[k] * plus[k] * minus[k];
    s.lambda_topic[k] = sample_gamma(s.config.eps0 + half_h[k], rate, s.rng);
  }
}

void sample_lambda(ModelState& s) {
  const auto th = s.theta_prime_estimates();
  draw_lambda_plus(s, th);
  draw_lambda_minus(s, th);
  draw_lambda_topic(s, th);
  for (auto* values : {&s.lambda_plus, &s.lambda_minus, &s.lambda_topic}) {
    for (double& v : *values) v = std::max(v, std::numeric_limits<double>::min());
  }
}

SweepStats run_iteration(ModelState& s) {
  const auto start = std::chrono::steady_clock::now();
  const std::int64_t it = s.iteration;
  gibbs_sweep_words(s);
  SweepStats stats;
  if (s.config.uses_network() && it >= s.config.network_start) {
    if (!s.network_ready) initialize_network(s);
    const NetworkSweepStats net = network_sweep(s);
    stats.acceptance_rate =
        net.proposals > 0 ? static_cast<double>(net.accepted) / static_cast<double>(net.proposals) : 1.0;
    stats.proposal_fallbacks = net.fallbacks;
  }
  if (s.config.sample_concentration) {
    for (int l = 0; l < kLevelCount; ++l) {
      if (s.config.has_level(l)) sample_concentration(s, l);
    }
  }
  if (s.network_ready && s.config.sample_lambda) sample_lambda(s);
  ++s.iteration;
  stats.iteration = s.iteration;
  stats.log_joint = s.log_joint();
  stats.k_active = s.active_topics();
  for (int l = 0; l < kLevelCount; ++l) {
    const auto g = s.group[static_cast<std::size_t>(l)];
    stats.beta[static_cast<std::size_t>(l)] =
        g < 0 ? std::numeric_limits<double>::quiet_NaN() : s.tree.params(g).concentration;
  }
  stats.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return stats;
}

std::vector<SweepStats> train(ModelState& s, const IterationCallback& callback) {
  std::vector<SweepStats> out;
  while (s.iteration < s.config.iterations) {
    out.push_back(run_iteration(s));
    if (callback && !callback(out.back(), s)) break;
  }
  return out;
}

std::string format_stats(const SweepStats& stats, bool timing) {
  std::string line;
  char buf[64];
  auto add = [&](const char* key, double value) {
    std::snprintf(buf, sizeof buf, "%.17g", value);
    line += ' ';
    line += key;
    line += '=';
    line += buf;
  };
  line = "iteration=" + std::to_string(stats.iteration);
  add("log_joint", stats.log_joint);
  line += " k_active=" + std::to_string(stats.k_active);
  if (stats.acceptance_rate) {
    add("acceptance_rate", *stats.acceptance_rate);
    line += " proposal_fallbacks=" + std::to_string(stats.proposal_fallbacks);
  }
  for (int l = 0; l < kLevelCount; ++l) {
    const double b = stats.beta[static_cast<std::size_t>(l)];
    if (std::isnan(b)) continue;
    add((std::string("beta_") + level_name(l)).c_str(), b);
  }
  if (timing) add("seconds", stats.seconds);
  return line;
}

}  // namespace cntm
