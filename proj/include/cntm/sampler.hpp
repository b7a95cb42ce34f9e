#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cntm/model.hpp"

namespace cntm {

struct SweepStats {
  std::int64_t iteration = 0;  // iterations completed
  double log_joint = 0.0;
  std::int32_t k_active = 0;
  std::optional<double> acceptance_rate;  // only when the network sweep ran
  std::int64_t proposal_fallbacks = 0;
  std::array<double, kLevelCount> beta{};
  double seconds = 0.0;
};

/// Resamples z_dn jointly with the indicator chains on both sides.
void sample_word_topic(ModelState& state, std::size_t d, std::size_t n);
void gibbs_sweep_words(ModelState& state);

/// lambda+_i lambda-_j sum_k lambdaT_k th_ik th_jk.
double poisson_rate(const ModelState& state, const std::vector<std::vector<double>>& theta_prime_hat,
                    std::size_t i, std::size_t j);

struct CitingProposal {
  std::vector<double> q;  // normalised over all slots
  std::int32_t topic = 0;
  bool fallback = false;  // all weights were zero; q is uniform over active slots
};

CitingProposal propose_citing_topic(const ModelState& state, std::span<const double> theta_i,
                                    std::span<const double> theta_j);

/// Target weight (up to a constant) of giving the removed edge (i, j) topic k:
/// the marginal likelihood of re-adding both endpoint customers times lambdaT_k.
double citing_topic_target(ModelState& state, std::size_t i, std::size_t j, std::int32_t k);

struct NetworkSweepStats {
  std::int64_t proposals = 0;
  std::int64_t accepted = 0;
  std::int64_t fallbacks = 0;
};

/// One remove / propose / accept / re-add cycle for edge e.
bool mh_step_edge(ModelState& state, std::size_t e, NetworkSweepStats& stats);
/// Assigns every edge a topic from the proposal distribution and adds its
/// two endpoint customers.
void initialize_network(ModelState& state);
NetworkSweepStats network_sweep(ModelState& state);

/// Auxiliary-variable draw of the shared concentration of one level.
double sample_concentration(ModelState& state, int level);

void draw_lambda_plus(ModelState& state, const std::vector<std::vector<double>>& theta_prime_hat);
void draw_lambda_minus(ModelState& state, const std::vector<std::vector<double>>& theta_prime_hat);
void draw_lambda_topic(ModelState& state, const std::vector<std::vector<double>>& theta_prime_hat);
void sample_lambda(ModelState& state);

/// Runs one iteration: word sweep, network (once started), hyperparameters.
SweepStats run_iteration(ModelState& state);

/// Return false to stop training after the current iteration.
using IterationCallback = std::function<bool(const SweepStats&, const ModelState&)>;

/// Continues from state.iteration up to config.iterations.
std::vector<SweepStats> train(ModelState& state, const IterationCallback& callback = {});

/// One stats-log line; wall-clock time only when `timing` is set.
std::string format_stats(const SweepStats& stats, bool timing);

}  // namespace cntm
