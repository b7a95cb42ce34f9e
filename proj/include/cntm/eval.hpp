#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cntm/model.hpp"

namespace cntm {

struct FoldInOptions {
  int sweeps = 50;
  int burn_in = 10;
  std::uint64_t seed = 1;
};

/// Topic distribution of an unseen document from its title tokens. Builds a
/// private theta (-> theta') chain under the author's trained estimate and runs
/// Gibbs sweeps with phi_hat held fixed; the trained state is not touched.
std::vector<double> estimate_test_theta(const ModelState& state, const Document& doc,
                                        const std::vector<std::vector<double>>& phi_hat,
                                        const FoldInOptions& options);

struct PerplexityResult {
  double perplexity = 0.0;
  std::int64_t tokens = 0;
  std::int64_t oov_skipped = 0;
};

/// exp(-sum log sum_k phi[k][w] theta[d][k] / N) over the scored tokens.
/// Tokens with known[w] == false are skipped and counted.
PerplexityResult perplexity(const std::vector<std::vector<double>>& phi,
                            const std::vector<std::vector<double>>& theta,
                            const std::vector<std::vector<std::int32_t>>& scored,
                            const std::vector<bool>& known);

/// Perplexity of the training tokens under the trained theta_hat and phi_hat.
PerplexityResult train_perplexity(const ModelState& state);
/// Document completion on the test split: title -> theta, remaining tokens scored.
PerplexityResult test_perplexity(const ModelState& state, const FoldInOptions& options);

/// Argmax with ties to the lowest index.
std::size_t dominant_topic(std::span<const double> distribution);

double purity(std::span<const std::int32_t> clusters, std::span<const std::int32_t> classes);
double nmi(std::span<const std::int32_t> clusters, std::span<const std::int32_t> classes);

struct ClusteringResult {
  std::vector<std::int32_t> clusters;
  std::vector<std::int32_t> classes;
};

/// Dominant topics of labelled training documents against their labels.
ClusteringResult cluster_training_documents(const ModelState& state);

struct Metrics {
  std::map<std::string, double> values;
  std::vector<std::string> notes;
};

Metrics evaluate(const ModelState& state, const FoldInOptions& options);
std::string format_metrics(const Metrics& metrics);

}  // namespace cntm
