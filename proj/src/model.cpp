#include "cntm/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <unordered_map>

#include "json.hpp"

namespace cntm {

using nlohmann::json;

namespace {

constexpr const char* kCheckpointFormat = "cntm-checkpoint";
constexpr int kCheckpointVersion = 1;

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kNoNetwork: return "no-network";
    case Variant::kAtm: return "atm";
    case Variant::kHdpLdaBursty: return "hdp-lda";
  }
  return "full";
}

std::optional<Variant> parse_variant(const std::string& text) {
  if (text == "full") return Variant::kFull;
  if (text == "no-network" || text == "no_network") return Variant::kNoNetwork;
  if (text == "atm") return Variant::kAtm;
  if (text == "hdp-lda" || text == "hdp_lda_bursty" || text == "hdp-lda-bursty") {
    return Variant::kHdpLdaBursty;
  }
  return std::nullopt;
}

const char* level_name(int level) {
  static constexpr const char* names[kLevelCount] = {"mu",  "nu",  "theta_prime", "theta",
                                                     "gamma", "phi", "phi_prime"};
  return names[level];
}

void ModelConfig::validate() const {
  if (topic_cap < 1) throw ConfigError("topic cap must be at least 1");
  if (initial_topics < 0 || initial_topics > topic_cap) {
    throw ConfigError("initial topics must lie in [0, topic cap]");
  }
  for (int l = 0; l < kLevelCount; ++l) {
    if (!(discount[static_cast<std::size_t>(l)] >= 0.0 && discount[static_cast<std::size_t>(l)] < 1.0)) {
      throw ConfigError(std::string("discount for ") + level_name(l) + " must lie in [0, 1)");
    }
  }
  if (!(beta0 > 0.0)) throw ConfigError("initial concentration must be positive");
  if (!(tau0 > 0.0 && tau1 > 0.0 && eps0 > 0.0 && eps1 > 0.0)) {
    throw ConfigError("hyperprior shapes and rates must be positive");
  }
  if (iterations < 0) throw ConfigError("iterations must be non-negative");
  if (network_start < 0) throw ConfigError("network start must be non-negative");
  if (eta < 1) throw ConfigError("eta must be at least 1");
}

bool ModelConfig::has_level(int level) const {
  if (level == kNu) return variant != Variant::kHdpLdaBursty;
  if (level == kThetaPrime) return variant != Variant::kAtm;
  return true;
}

std::vector<std::int32_t> training_documents(const Corpus& corpus) {
  std::vector<std::int32_t> out;
  for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
    if (corpus.documents[i].split == Split::kTrain) out.push_back(static_cast<std::int32_t>(i));
  }
  return out;
}

ModelState::ModelState(std::shared_ptr<const Corpus> corpus_in, ModelConfig config_in)
    : corpus(std::move(corpus_in)), config(config_in), rng(config_in.seed) {
  if (!corpus) throw std::invalid_argument("model: corpus is required");
  config.validate();
  build();
}

void ModelState::build() {
  const auto k_cap = static_cast<std::size_t>(cap());
  docs = training_documents(*corpus);
  for (int l = 0; l < kLevelCount; ++l) {
    group[static_cast<std::size_t>(l)] =
        config.has_level(l)
            ? tree.add_group({config.discount[static_cast<std::size_t>(l)], config.beta0})
            : -1;
  }
  mu = tree.add_node(NodeKind::kGem, group[kMu], kNoNode);
  if (config.has_level(kNu)) {
    for (std::size_t a = 0; a < corpus->authors.size(); ++a) {
      nu.push_back(tree.add_node(NodeKind::kPyp, group[kNu], mu));
    }
  }
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const std::int32_t author = document(d).author;
    if (config.has_level(kNu) && (author < 0 || static_cast<std::size_t>(author) >= nu.size())) {
      throw std::invalid_argument("model: document " + document(d).id + " has no author");
    }
    NodeId parent = author_node(author);
    if (config.has_level(kThetaPrime)) {
      theta_prime.push_back(tree.add_node(NodeKind::kPyp, group[kThetaPrime], parent));
      parent = theta_prime.back();
    }
    theta.push_back(tree.add_node(NodeKind::kPyp, group[kTheta], parent));
  }
  gamma = tree.add_node(NodeKind::kPyp, group[kGamma], kNoNode);
  const auto vocab = corpus->vocabulary.size();
  if (vocab == 0) throw std::invalid_argument("model: empty vocabulary");
  tree.set_base(gamma, BaseMeasure{1.0 / static_cast<double>(vocab), {}});
  for (std::size_t k = 0; k < k_cap; ++k) phi.push_back(tree.add_node(NodeKind::kPyp, group[kPhi], gamma));
  phi_prime.reserve(docs.size() * k_cap);
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (std::size_t k = 0; k < k_cap; ++k) {
      phi_prime.push_back(tree.add_node(NodeKind::kPyp, group[kPhiPrime], phi[k]));
    }
  }
  z.assign(docs.size(), {});
  for (std::size_t d = 0; d < docs.size(); ++d) z[d].assign(document(d).tokens.size(), -1);

  std::unordered_map<std::int32_t, std::int32_t> local;
  for (std::size_t d = 0; d < docs.size(); ++d) local.emplace(docs[d], static_cast<std::int32_t>(d));
  out_degree.assign(docs.size(), 0);
  in_degree.assign(docs.size(), 0);
  for (const auto& [i, j] : corpus->graph.edges()) {
    auto a = local.find(i);
    auto b = local.find(j);
    if (a == local.end() || b == local.end()) continue;
    edges.push_back({a->second, b->second, -1});
    ++out_degree[static_cast<std::size_t>(a->second)];
    ++in_degree[static_cast<std::size_t>(b->second)];
  }
  h.assign(docs.size() * k_cap, 0);
  lambda_plus.assign(docs.size(), 1.0);
  lambda_minus.assign(docs.size(), 1.0);
  lambda_topic.assign(k_cap, 1.0);
}

NodeId ModelState::author_node(std::int32_t author) const {
  if (!config.has_level(kNu)) return mu;
  return nu[static_cast<std::size_t>(author)];
}

ModelState ModelState::init_random(std::shared_ptr<const Corpus> corpus, ModelConfig config) {
  ModelState s(std::move(corpus), config);
  const std::int32_t initial = s.config.initial_topics > 0 ? s.config.initial_topics : s.cap();
  for (std::size_t d = 0; d < s.docs.size(); ++d) {
    const auto& tokens = s.document(d).tokens;
    for (std::size_t n = 0; n < tokens.size(); ++n) {
      auto k = static_cast<std::int32_t>(uniform01(s.rng) * initial);
      if (k >= initial) k = initial - 1;
      s.z[d][n] = k;
      s.tree.seat_customer(s.theta[d], k, s.rng);
      s.tree.seat_customer(s.word_start(d, k), tokens[n], s.rng);
    }
  }
  return s;
}

std::int32_t ModelState::active_topics() const {
  return static_cast<std::int32_t>(tree.node(mu).counts.size());
}

double ModelState::new_topic_weight() const {
  const auto free = free_slots();
  return free > 0 ? 1.0 / static_cast<double>(free) : 0.0;
}

std::vector<double> ModelState::mu_estimate() const {
  return tree.estimate_gem(mu, static_cast<std::size_t>(cap()));
}

std::vector<double> ModelState::topic_estimate(NodeId node) const {
  if (node == mu) return mu_estimate();
  const auto parent = topic_estimate(tree.node(node).parent);
  return tree.estimate(node, parent);
}

std::vector<double> ModelState::gamma_estimate() const {
  const std::vector<double> uniform(corpus->vocabulary.size(),
                                    1.0 / static_cast<double>(corpus->vocabulary.size()));
  return tree.estimate(gamma, uniform);
}

std::vector<std::vector<double>> ModelState::phi_estimate() const {
  const auto g = gamma_estimate();
  std::vector<std::vector<double>> out;
  out.reserve(phi.size());
  for (NodeId node : phi) out.push_back(tree.estimate(node, g));
  return out;
}

std::vector<std::vector<double>> ModelState::theta_prime_estimates() const {
  if (theta_prime.empty()) return {};
  const auto m = mu_estimate();
  std::vector<std::vector<double>> by_author(nu.size());
  for (std::size_t a = 0; a < nu.size(); ++a) by_author[a] = tree.estimate(nu[a], m);
  std::vector<std::vector<double>> out(docs.size());
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const NodeId parent = tree.node(theta_prime[d]).parent;
    const auto& base = parent == mu ? m : by_author[static_cast<std::size_t>(document(d).author)];
    out[d] = tree.estimate(theta_prime[d], base);
  }
  return out;
}

double ModelState::network_energy(const std::vector<std::vector<double>>& th) const {
  const auto k_cap = static_cast<std::size_t>(cap());
  std::vector<double> plus(k_cap, 0.0);
  std::vector<double> minus(k_cap, 0.0);
  for (std::size_t d = 0; d < th.size(); ++d) {
    for (std::size_t k = 0; k < k_cap; ++k) {
      plus[k] += lambda_plus[d] * th[d][k];
      minus[k] += lambda_minus[d] * th[d][k];
    }
  }
  double e = 0.0;
  for (std::size_t k = 0; k < k_cap; ++k) e += lambda_topic[k] * plus[k] * minus[k];
  return e;
}

double ModelState::log_joint() const {
  double value = tree.log_likelihood();
  if (!network_ready) return value;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    value += static_cast<double>(out_degree[d]) * std::log(lambda_plus[d]) +
             static_cast<double>(in_degree[d]) * std::log(lambda_minus[d]);
  }
  for (const auto& e : edges) value += std::log(lambda_topic[static_cast<std::size_t>(e.topic)]);
  return value - network_energy(theta_prime_estimates());
}

std::vector<std::string> ModelState::consistency_check() const {
  std::unordered_map<NodeId, std::vector<std::pair<Key, std::int64_t>>> direct;
  std::vector<std::string> problems;
  std::int64_t tokens = 0;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    std::map<Key, std::int64_t> topics;
    std::map<std::pair<Key, Key>, std::int64_t> words;
    const auto& doc_tokens = document(d).tokens;
    for (std::size_t n = 0; n < z[d].size(); ++n) {
      const auto k = z[d][n];
      if (k < 0 || k >= cap()) {
        problems.push_back("document " + std::to_string(d) + " token " + std::to_string(n) +
                           ": topic " + std::to_string(k) + " outside the slot range");
        continue;
      }
      ++topics[k];
      ++words[{k, doc_tokens[n]}];
      ++tokens;
    }
    auto& th = direct[theta[d]];
    for (const auto& [k, c] : topics) th.emplace_back(k, c);
    for (const auto& [kw, c] : words) direct[word_start(d, kw.first)].emplace_back(kw.second, c);
    if (network_ready) {
      auto& tp = direct[theta_prime[d]];
      for (std::int32_t k = 0; k < cap(); ++k) {
        if (h_at(d, k) != 0) tp.emplace_back(k, h_at(d, k));
      }
    }
  }
  auto found = tree.consistency_check([&](NodeId id, std::vector<std::pair<Key, std::int64_t>>& out) {
    auto it = direct.find(id);
    if (it != direct.end()) out = it->second;
  });
  problems.insert(problems.end(), found.begin(), found.end());

  std::int64_t theta_customers = 0;
  for (NodeId id : theta) theta_customers += tree.node(id).customers;
  if (theta_customers != tokens) {
    problems.push_back("topic-side customers " + std::to_string(theta_customers) +
                       " != tokens " + std::to_string(tokens));
  }
  std::int64_t word_customers = 0;
  for (NodeId id : phi_prime) word_customers += tree.node(id).customers;
  if (word_customers != tokens) {
    problems.push_back("word-side customers " + std::to_string(word_customers) + " != tokens " +
                       std::to_string(tokens));
  }
  if (active_topics() > cap()) problems.push_back("more active topics than the cap");
  for (const auto& [k, tc] : tree.node(mu).counts) {
    if (k < 0 || k >= cap()) problems.push_back("root key " + std::to_string(k) + " outside slots");
  }

  if (network_ready) {
    std::vector<std::int32_t> expected(h.size(), 0);
    for (const auto& e : edges) {
      if (e.topic < 0 || e.topic >= cap()) {
        problems.push_back("edge " + std::to_string(e.citing) + "->" + std::to_string(e.cited) +
                           ": citing topic out of range");
        continue;
      }
      ++expected[static_cast<std::size_t>(e.citing) * static_cast<std::size_t>(cap()) +
                 static_cast<std::size_t>(e.topic)];
      ++expected[static_cast<std::size_t>(e.cited) * static_cast<std::size_t>(cap()) +
                 static_cast<std::size_t>(e.topic)];
    }
    if (expected != h) problems.push_back("network counts h disagree with citing topics");
    std::int64_t total = 0;
    for (std::size_t d = 0; d < docs.size(); ++d) {
      std::int64_t row = 0;
      for (std::int32_t k = 0; k < cap(); ++k) row += h_at(d, k);
      if (row != out_degree[d] + in_degree[d]) {
        problems.push_back("document " + std::to_string(d) + ": network counts " +
                           std::to_string(row) + " != degree sum " +
                           std::to_string(out_degree[d] + in_degree[d]));
      }
      total += row;
    }
    if (total != 2 * static_cast<std::int64_t>(edges.size())) {
      problems.push_back("total network counts " + std::to_string(total) + " != 2|edges|");
    }
  }
  return problems;
}

namespace {

json config_json(const ModelConfig& c) {
  return {{"topic_cap", c.topic_cap},
          {"initial_topics", c.initial_topics},
          {"discount", c.discount},
          {"beta0", c.beta0},
          {"tau0", c.tau0},
          {"tau1", c.tau1},
          {"eps0", c.eps0},
          {"eps1", c.eps1},
          {"iterations", c.iterations},
          {"network_start", c.network_start},
          {"variant", variant_name(c.variant)},
          {"seed", c.seed},
          {"sample_concentration", c.sample_concentration},
          {"sample_lambda", c.sample_lambda},
          {"eta", c.eta},
          {"use_labels", c.use_labels}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.topic_cap = j.at("topic_cap").get<std::int32_t>();
  c.initial_topics = j.at("initial_topics").get<std::int32_t>();
  c.discount = j.at("discount").get<std::array<double, kLevelCount>>();
  c.beta0 = j.at("beta0").get<double>();
  c.tau0 = j.at("tau0").get<double>();
  c.tau1 = j.at("tau1").get<double>();
  c.eps0 = j.at("eps0").get<double>();
  c.eps1 = j.at("eps1").get<double>();
  c.iterations = j.at("iterations").get<std::int64_t>();
  c.network_start = j.at("network_start").get<std::int64_t>();
  auto v = parse_variant(j.at("variant").get<std::string>());
  if (!v) throw CheckpointError("unknown variant in checkpoint");
  c.variant = *v;
  c.seed = j.at("seed").get<std::uint64_t>();
  c.sample_concentration = j.at("sample_concentration").get<bool>();
  c.sample_lambda = j.at("sample_lambda").get<bool>();
  c.eta = j.at("eta").get<std::int64_t>();
  c.use_labels = j.at("use_labels").get<bool>();
  return c;
}

}  // namespace

void ModelState::save_checkpoint(const std::filesystem::path& path) const {
  json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["corpus_hash"] = hex64(corpus_hash(*corpus));
  j["config"] = config_json(config);
  j["iteration"] = iteration;
  j["rng"] = serialize_rng(rng);
  json betas = json::array();
  for (std::size_t g = 0; g < tree.group_count(); ++g) {
    betas.push_back(tree.params(static_cast<std::int32_t>(g)).concentration);
  }
  j["concentration"] = std::move(betas);
  json nodes = json::array();
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const PypNode& n = tree.node(static_cast<NodeId>(i));
    if (n.counts.empty()) continue;
    json entries = json::array();
    for (const auto& [k, tc] : n.counts) entries.push_back({k, tc.customers, tc.tables});
    nodes.push_back({i, std::move(entries)});
  }
  j["nodes"] = std::move(nodes);
  j["z"] = z;
  j["lambda_plus"] = lambda_plus;
  j["lambda_minus"] = lambda_minus;
  j["lambda_topic"] = lambda_topic;
  j["network_ready"] = network_ready;
  json y = json::array();
  for (const auto& e : edges) y.push_back(e.topic);
  j["y"] = std::move(y);

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << j.dump() << '\n';
    if (!out) throw std::runtime_error("failed writing " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

ModelState ModelState::load_checkpoint(const std::filesystem::path& path,
                                       std::shared_ptr<const Corpus> corpus) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw CheckpointError(path.string() + ": corrupt checkpoint: " + e.what());
  }
  if (!j.is_object() || j.value("format", "") != kCheckpointFormat) {
    throw CheckpointError(path.string() + ": not a checkpoint");
  }
  if (j.value("version", -1) != kCheckpointVersion) {
    throw CheckpointError(path.string() + ": unsupported checkpoint version " +
                          j.value("version", json(-1)).dump() + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  try {
    if (j.at("corpus_hash").get<std::string>() != hex64(corpus_hash(*corpus))) {
      throw CheckpointError(path.string() + ": checkpoint was written for a different corpus");
    }
    ModelState s(std::move(corpus), config_from_json(j.at("config")));
    s.iteration = j.at("iteration").get<std::int64_t>();
    deserialize_rng(s.rng, j.at("rng").get<std::string>());
    const auto& betas = j.at("concentration");
    if (betas.size() != s.tree.group_count()) throw CheckpointError("group count mismatch");
    for (std::size_t g = 0; g < betas.size(); ++g) {
      s.tree.set_concentration(static_cast<std::int32_t>(g), betas[g].get<double>());
    }
    for (const auto& jn : j.at("nodes")) {
      const auto id = jn.at(0).get<NodeId>();
      if (id < 0 || static_cast<std::size_t>(id) >= s.tree.size()) {
        throw CheckpointError("node id out of range");
      }
      PypNode& n = s.tree.mutable_node(id);
      for (const auto& e : jn.at(1)) {
        TableCount& tc = n.counts.upsert(e.at(0).get<Key>());
        tc.customers = e.at(1).get<std::int32_t>();
        tc.tables = e.at(2).get<std::int32_t>();
        n.customers += tc.customers;
        n.tables += tc.tables;
      }
    }
    s.z = j.at("z").get<std::vector<std::vector<std::int32_t>>>();
    if (s.z.size() != s.docs.size()) throw CheckpointError("topic assignment shape mismatch");
    for (std::size_t d = 0; d < s.docs.size(); ++d) {
      if (s.z[d].size() != s.document(d).tokens.size()) {
        throw CheckpointError("topic assignment shape mismatch");
      }
    }
    s.lambda_plus = j.at("lambda_plus").get<std::vector<double>>();
    s.lambda_minus = j.at("lambda_minus").get<std::vector<double>>();
    s.lambda_topic = j.at("lambda_topic").get<std::vector<double>>();
    if (s.lambda_plus.size() != s.docs.size() || s.lambda_minus.size() != s.docs.size() ||
        s.lambda_topic.size() != static_cast<std::size_t>(s.cap())) {
      throw CheckpointError("network parameter shape mismatch");
    }
    s.network_ready = j.at("network_ready").get<bool>();
    const auto y = j.at("y").get<std::vector<std::int32_t>>();
    if (y.size() != s.edges.size()) throw CheckpointError("citing topic count mismatch");
    for (std::size_t e = 0; e < y.size(); ++e) {
      s.edges[e].topic = y[e];
      if (s.network_ready) {
        if (y[e] < 0 || y[e] >= s.cap()) throw CheckpointError("citing topic out of range");
        ++s.h_at(static_cast<std::size_t>(s.edges[e].citing), y[e]);
        ++s.h_at(static_cast<std::size_t>(s.edges[e].cited), y[e]);
      }
    }
    return s;
  } catch (const json::exception& e) {
    throw CheckpointError(path.string() + ": corrupt checkpoint: " + e.what());
  }
}

}  // namespace cntm
