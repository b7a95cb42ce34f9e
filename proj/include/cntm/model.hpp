#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cntm/corpus.hpp"
#include "cntm/pyp.hpp"
#include "cntm/random.hpp"

namespace cntm {

enum class Variant : std::uint8_t { kFull, kNoNetwork, kAtm, kHdpLdaBursty };

std::string variant_name(Variant v);
/// Accepts "full", "no-network"/"no_network", "atm", "hdp-lda"/"hdp_lda_bursty".
std::optional<Variant> parse_variant(const std::string& text);

enum Level : int { kMu, kNu, kThetaPrime, kTheta, kGamma, kPhi, kPhiPrime };
inline constexpr int kLevelCount = 7;
const char* level_name(int level);

struct ModelConfig {
  std::int32_t topic_cap = 20;
  /// Slots given tokens at initialisation; 0 means all topic_cap slots.
  std::int32_t initial_topics = 0;
  std::array<double, kLevelCount> discount{0.01, 0.01, 0.01, 0.01, 0.7, 0.7, 0.7};
  double beta0 = 0.1;
  double tau0 = 1.0;
  double tau1 = 1.0;
  double eps0 = 1.0;
  double eps1 = 1.0;
  std::int64_t iterations = 2000;
  std::int64_t network_start = 1000;
  Variant variant = Variant::kFull;
  std::uint64_t seed = 1;
  bool sample_concentration = true;
  bool sample_lambda = true;
  /// Author merging applied to the corpus before training (recorded only).
  std::int64_t eta = 1;
  bool use_labels = false;

  void validate() const;
  bool has_level(int level) const;
  bool uses_network() const { return variant == Variant::kFull; }
};

struct Edge {
  std::int32_t citing = 0;  // model document index
  std::int32_t cited = 0;
  std::int32_t topic = -1;  // y, -1 until the network is initialised
};

/// Thrown when a checkpoint cannot be used (version, corpus mismatch, corruption).
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Complete collapsed state of one sampling chain over the training documents
/// of a corpus. Topic-side chain: theta_d -> theta'_d -> nu_a -> mu (variants
/// drop levels); word-side chain: phi'_{d,k} -> phi_k -> gamma -> uniform.
struct ModelState {
  ModelState(std::shared_ptr<const Corpus> corpus, ModelConfig config);

  /// Skeleton plus random topic assignments seated bottom-up.
  static ModelState init_random(std::shared_ptr<const Corpus> corpus, ModelConfig config);

  std::shared_ptr<const Corpus> corpus;
  ModelConfig config;
  Rng rng;
  std::int64_t iteration = 0;

  std::vector<std::int32_t> docs;  // model document -> corpus document
  PypTree tree;
  std::array<std::int32_t, kLevelCount> group{};  // -1 when the level is absent
  NodeId mu = kNoNode;
  NodeId gamma = kNoNode;
  std::vector<NodeId> nu;           // per author (empty for hdp)
  std::vector<NodeId> theta_prime;  // per document (empty for atm)
  std::vector<NodeId> theta;        // per document
  std::vector<NodeId> phi;          // per topic slot
  std::vector<NodeId> phi_prime;    // per document x topic slot
  std::vector<std::vector<std::int32_t>> z;

  std::vector<Edge> edges;  // training subgraph, diagonal included
  std::vector<std::int64_t> out_degree;
  std::vector<std::int64_t> in_degree;
  std::vector<std::int32_t> h;  // document x topic slot
  std::vector<double> lambda_plus;
  std::vector<double> lambda_minus;
  std::vector<double> lambda_topic;
  bool network_ready = false;

  std::size_t num_docs() const { return docs.size(); }
  std::int32_t cap() const { return config.topic_cap; }
  const Document& document(std::size_t d) const {
    return corpus->documents[static_cast<std::size_t>(docs[d])];
  }
  NodeId word_start(std::size_t d, std::int32_t k) const {
    return phi_prime[d * static_cast<std::size_t>(cap()) + static_cast<std::size_t>(k)];
  }
  NodeId network_node(std::size_t d) const { return theta_prime[d]; }
  /// Parent of a document's topic chain root-side level: nu_a, or mu for hdp.
  NodeId author_node(std::int32_t author) const;
  std::int32_t& h_at(std::size_t d, std::int32_t k) {
    return h[d * static_cast<std::size_t>(cap()) + static_cast<std::size_t>(k)];
  }
  std::int32_t h_at(std::size_t d, std::int32_t k) const {
    return h[d * static_cast<std::size_t>(cap()) + static_cast<std::size_t>(k)];
  }

  std::int32_t active_topics() const;
  std::int32_t free_slots() const { return cap() - active_topics(); }
  double new_topic_weight() const;

  /// Recursive probability estimate of a topic-side node over all slots.
  std::vector<double> topic_estimate(NodeId node) const;
  std::vector<double> mu_estimate() const;
  std::vector<double> gamma_estimate() const;
  /// phi_hat[k][w] from the phi_k nodes (no document burstiness).
  std::vector<std::vector<double>> phi_estimate() const;
  /// theta'_hat per document (rows), used by the network.
  std::vector<std::vector<double>> theta_prime_estimates() const;

  /// sum_k lambdaT_k (sum_i lambda+_i th_ik)(sum_j lambda-_j th_jk).
  double network_energy(const std::vector<std::vector<double>>& theta_prime_hat) const;
  double log_joint() const;
  std::vector<std::string> consistency_check() const;

  void save_checkpoint(const std::filesystem::path& path) const;
  static ModelState load_checkpoint(const std::filesystem::path& path,
                                    std::shared_ptr<const Corpus> corpus);

 private:
  void build();
};

/// Training-split documents in corpus order (empty ones included).
std::vector<std::int32_t> training_documents(const Corpus& corpus);

}  // namespace cntm
