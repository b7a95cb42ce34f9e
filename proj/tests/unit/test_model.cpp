#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cntm/model.hpp"
#include "cntm/sampler.hpp"
#include "cntm/synthetic.hpp"
#include "doctest.h"
#include "json.hpp"
#include "oracle.hpp"

using namespace cntm;

namespace {

std::shared_ptr<const Corpus> small_synthetic(std::int32_t documents = 40) {
  SyntheticSpec spec;
  spec.documents = documents;
  spec.doc_length = 15;
  return std::make_shared<const Corpus>(generate_synthetic(spec));
}

// Log probability of the tree recomputed from raw counts.
double independent_log_likelihood(const ModelState& s) {
  long double total = 0.0L;
  for (std::size_t id = 0; id < s.tree.size(); ++id) {
    const PypNode& n = s.tree.node(static_cast<NodeId>(id));
    const PypParams& p = s.tree.params(n.group);
    long double w = 0.0L;
    for (std::int64_t i = 0; i < n.tables; ++i) w += std::log(static_cast<long double>(p.concentration + i * p.discount));
    for (std::int64_t i = 0; i < n.customers; ++i) w -= std::log(static_cast<long double>(p.concentration + i));
    for (const auto& [k, tc] : n.counts) {
      if (tc.customers > 0) {
        w += std::log(oracle::generalized_stirling(tc.customers, tc.tables, p.discount));
      }
    }
    total += w;
  }
  for (const auto& [k, tc] : s.tree.node(s.gamma).counts) {
    total += tc.tables * std::log(1.0L / s.corpus->vocabulary.size());
  }
  return static_cast<double>(total);
}

struct TempFile {
  std::filesystem::path path;
  explicit TempFile(const std::string& name)
      : path(std::filesystem::temp_directory_path() / (name + std::to_string(std::rand()))) {}
  ~TempFile() { std::filesystem::remove(path); }
};

}  // namespace

TEST_CASE("single token log joint") {
  auto corpus = fixtures::make_corpus({{2}}, {0}, 5);
  ModelConfig config;
  config.topic_cap = 1;
  ModelState s = ModelState::init_random(corpus, config);
  // Every node holds one customer at one table: f = 1 everywhere and the
  // base contributes 1/|V|.
  CHECK(s.log_joint() == doctest::Approx(std::log(1.0 / 5.0)));
  CHECK(s.tree.size() == 7);
}

TEST_CASE("log joint matches an independent evaluation") {
  auto corpus = small_synthetic(12);
  ModelConfig config;
  config.topic_cap = 4;
  config.network_start = 0;
  config.iterations = 3;
  ModelState s = ModelState::init_random(corpus, config);
  CHECK(s.log_joint() == doctest::Approx(independent_log_likelihood(s)).epsilon(1e-10));
  train(s);
  CHECK(s.tree.log_likelihood() == doctest::Approx(independent_log_likelihood(s)).epsilon(1e-10));
  CHECK(std::isfinite(s.log_joint()));
}

TEST_CASE("initial state") {
  auto corpus = small_synthetic();
  ModelConfig config;
  config.topic_cap = 6;
  ModelState a = ModelState::init_random(corpus, config);
  ModelState b = ModelState::init_random(corpus, config);
  CHECK(a.consistency_check().empty());
  CHECK(a.z == b.z);
  CHECK(a.log_joint() == b.log_joint());
  std::int64_t tokens = 0;
  std::int64_t customers = 0;
  for (std::size_t d = 0; d < a.num_docs(); ++d) {
    tokens += static_cast<std::int64_t>(a.document(d).tokens.size());
    customers += a.tree.node(a.theta[d]).customers;
  }
  CHECK(tokens == customers);
  CHECK(a.active_topics() <= a.cap());
  CHECK(a.edges.size() == a.num_docs() + [&] {
    std::size_t n = 0;
    for (const auto& e : a.edges) n += e.citing != e.cited ? 1 : 0;
    return n;
  }());
}

TEST_CASE("variants wire the expected levels") {
  auto corpus = small_synthetic();
  for (Variant v : {Variant::kFull, Variant::kNoNetwork, Variant::kAtm, Variant::kHdpLdaBursty}) {
    ModelConfig config;
    config.variant = v;
    config.topic_cap = 5;
    config.iterations = 4;
    config.network_start = 2;
    ModelState s = ModelState::init_random(corpus, config);
    train(s);
    CHECK(s.consistency_check().empty());
    CHECK(s.theta_prime.empty() == (v == Variant::kAtm));
    CHECK(s.nu.empty() == (v == Variant::kHdpLdaBursty));
    CHECK(s.network_ready == (v == Variant::kFull));
    CHECK(parse_variant(variant_name(v)) == v);
  }
  CHECK(parse_variant("no-network") == Variant::kNoNetwork);
  CHECK_FALSE(parse_variant("lda").has_value());
}

TEST_CASE("configuration validation") {
  auto corpus = small_synthetic();
  ModelConfig config;
  config.topic_cap = 0;
  CHECK_THROWS_AS(ModelState(corpus, config), ConfigError);
  config = {};
  config.discount[kPhi] = 1.0;
  CHECK_THROWS_AS(ModelState(corpus, config), ConfigError);
  config = {};
  config.beta0 = 0.0;
  CHECK_THROWS_AS(ModelState(corpus, config), ConfigError);
  config = {};
  config.initial_topics = 30;
  CHECK_THROWS_AS(ModelState(corpus, config), ConfigError);
}

TEST_CASE("checkpoint round trip") {
  auto corpus = small_synthetic();
  ModelConfig config;
  config.topic_cap = 6;
  config.iterations = 6;
  config.network_start = 3;
  ModelState s = ModelState::init_random(corpus, config);
  train(s);
  TempFile file("cntm_ckpt_");
  s.save_checkpoint(file.path);
  ModelState back = ModelState::load_checkpoint(file.path, corpus);
  CHECK(back.log_joint() == doctest::Approx(s.log_joint()).epsilon(1e-12));
  CHECK(back.z == s.z);
  CHECK(back.h == s.h);
  CHECK(back.lambda_plus == s.lambda_plus);
  CHECK(back.iteration == s.iteration);
  CHECK(back.consistency_check().empty());

  SUBCASE("continuing equals uninterrupted training") {
    ModelConfig longer = config;
    longer.iterations = 12;
    ModelState straight = ModelState::init_random(corpus, longer);
    train(straight);
    back.config.iterations = 12;
    train(back);
    CHECK(back.z == straight.z);
    CHECK(back.log_joint() == straight.log_joint());
    CHECK(back.lambda_topic == straight.lambda_topic);
  }
  SUBCASE("version and corpus checks") {
    std::ifstream in(file.path);
    auto j = nlohmann::json::parse(in);
    in.close();
    j["version"] = 99;
    TempFile bad("cntm_bad_");
    std::ofstream(bad.path) << j.dump();
    CHECK_THROWS_WITH_AS(ModelState::load_checkpoint(bad.path, corpus), doctest::Contains("version"),
                         CheckpointError);
    CHECK_THROWS_AS(ModelState::load_checkpoint(file.path, small_synthetic(41)), CheckpointError);
    std::ofstream(bad.path) << "{ not json";
    CHECK_THROWS_AS(ModelState::load_checkpoint(bad.path, corpus), CheckpointError);
  }
}

TEST_CASE("estimates are distributions") {
  auto corpus = small_synthetic();
  ModelConfig config;
  config.topic_cap = 6;
  config.iterations = 5;
  config.network_start = 2;
  ModelState s = ModelState::init_random(corpus, config);
  train(s);
  const auto check = [](const std::vector<double>& v) {
    double sum = 0.0;
    for (double x : v) {
      CHECK(x >= 0.0);
      sum += x;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  };
  check(s.mu_estimate());
  check(s.gamma_estimate());
  for (const auto& row : s.phi_estimate()) check(row);
  for (const auto& row : s.theta_prime_estimates()) check(row);
  for (NodeId id : s.theta) check(s.topic_estimate(id));
  for (NodeId id : s.nu) check(s.topic_estimate(id));
}
