#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cntm/random.hpp"
#include "cntm/stirling.hpp"

namespace cntm {

/// Topic id on the topic side, token id on the word side.
using Key = std::int32_t;
using NodeId = std::int32_t;

inline constexpr NodeId kNoNode = -1;
inline constexpr int kMaxChainDepth = 8;

struct PypParams {
  double discount = 0.0;
  double concentration = 1.0;
};

enum class NodeKind : std::uint8_t { kPyp, kGem };

struct TableCount {
  std::int32_t customers = 0;
  std::int32_t tables = 0;
};

/// Sorted flat map from key to (customers, tables). Iteration order is the key
/// order, so sums over a node do not depend on insertion history.
class CountMap {
 public:
  using Entry = std::pair<Key, TableCount>;

  TableCount get(Key key) const;
  TableCount& upsert(Key key);
  /// Drops the entry for `key` if it is all zero.
  void prune(Key key);
  void clear() { entries_.clear(); }

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

 private:
  std::vector<Entry> entries_;
};

struct PypNode {
  NodeKind kind = NodeKind::kPyp;
  std::int32_t group = 0;
  NodeId parent = kNoNode;
  CountMap counts;
  std::int64_t customers = 0;  // C
  std::int64_t tables = 0;     // T
};

/// Parent distribution of a PYP root: uniform probability or explicit vector.
struct BaseMeasure {
  double uniform = 0.0;
  std::vector<double> weights;

  double at(Key key) const {
    if (weights.empty()) return uniform;
    return (key >= 0 && static_cast<std::size_t>(key) < weights.size())
               ? weights[static_cast<std::size_t>(key)]
               : 0.0;
  }
};

/// Which levels of an ancestor chain opened (or, on removal, closed) a table.
/// Levels [0, opened) did; the chain stopped at level `opened` or ran off the
/// root when opened == depth.
struct IndicatorOutcome {
  int depth = 0;
  int opened = 0;

  bool opened_new_table(int level) const { return level < opened; }
};

/// Node ids from a starting node up to its root.
struct ChainPath {
  std::array<NodeId, kMaxChainDepth> nodes{};
  int depth = 0;

  NodeId operator[](int level) const { return nodes[static_cast<std::size_t>(level)]; }
};

struct ChainOptions {
  /// Join is not allowed at levels <= this one (-1: no constraint).
  int must_open_through = -1;
  /// Multiplier on the weight of opening a new key at a GEM root; 0 forbids it.
  double gem_new_key_weight = 1.0;
};

/// Unnormalised weights of every outcome of adding one customer along a chain.
/// outcome[o] for o in [0, depth]: tables opened at levels < o, joined at o
/// (o == depth: opened everywhere including the root).
struct ChainWeights {
  std::array<double, kMaxChainDepth + 1> outcome{};
  int depth = 0;
  double total = 0.0;
};

/// A forest of collapsed PYP/GEM nodes sharing per-group parameters.
///
/// Customer increments use the table-indicator representation: each customer
/// carries a Bernoulli "opened a table" flag, and indicator configurations are
/// uniform given (c, t). Incrementing therefore weights an outcome by the ratio
/// of marginal likelihoods times the indicator factor (t+1)/(c+1) for opening
/// or (c-t+1)/(c+1) for joining, and decrementing removes a table with
/// probability t/c. That pair is an exact Gibbs update of the collapsed state.
///
/// A decrement may leave a transient entry with t = 0 < c (the removed
/// customer was the last table opener). Such an entry has zero likelihood and
/// the next increment for that key must reopen it; add_customer enforces this.
class PypTree {
 public:
  std::int32_t add_group(PypParams params);
  NodeId add_node(NodeKind kind, std::int32_t group, NodeId parent);
  void set_base(NodeId root, BaseMeasure base);

  std::size_t size() const { return nodes_.size(); }
  std::size_t group_count() const { return groups_.size(); }
  const PypNode& node(NodeId id) const { return nodes_[static_cast<std::size_t>(id)]; }
  PypNode& mutable_node(NodeId id) { return nodes_[static_cast<std::size_t>(id)]; }
  const PypParams& params(std::int32_t group) const {
    return groups_[static_cast<std::size_t>(group)];
  }
  void set_concentration(std::int32_t group, double concentration);
  const BaseMeasure& base(NodeId root) const;

  ChainPath path(NodeId start) const;

  /// log f(N): log (b|a)_T - log (b)_C + sum_k log S^{c_k}_{t_k, a}.
  double log_marginal(NodeId id) const;
  /// Sum of log_marginal over all nodes plus sum_k t_k log H(k) at PYP roots.
  double log_likelihood() const;

  ChainWeights chain_weights(const ChainPath& path, Key key,
                             const ChainOptions& options = {}) const;
  /// Highest level on the path whose entry for `key` has customers but no
  /// tables, or -1.
  int highest_open_deficit(const ChainPath& path, Key key) const;
  void apply_chain(const ChainPath& path, Key key, int opened);
  void revert_chain(const ChainPath& path, Key key, int opened);

  /// Blocked increment: samples the indicator chain for one new customer.
  IndicatorOutcome add_customer(NodeId start, Key key, Rng& rng,
                                double gem_new_key_weight = 1.0);
  /// Decrement with the t/c table-removal rule, recursing while tables close.
  IndicatorOutcome remove_customer(NodeId start, Key key, Rng& rng);
  /// Sequential CRP seating: join with weight c_k - a t_k, open with weight
  /// (b + a T) P(k) where P is the parent's predictive probability.
  IndicatorOutcome seat_customer(NodeId start, Key key, Rng& rng);
  /// Predictive probability of `key` at a node (recursive, using bases).
  double predictive(NodeId id, Key key) const;

  /// Posterior mean over keys [0, parent.size()) given the parent distribution.
  std::vector<double> estimate(NodeId id, std::span<const double> parent) const;
  /// Estimate of a GEM root over `slots` keys. Remaining mass goes to unused
  /// slots evenly, or is spread over used slots in proportion when none is free.
  std::vector<double> estimate_gem(NodeId id, std::size_t slots) const;

  /// Direct (non-inherited) customers of a node, used to check c = direct + child tables.
  using DirectCustomers = std::function<void(NodeId, std::vector<std::pair<Key, std::int64_t>>&)>;
  std::vector<std::string> consistency_check(const DirectCustomers& direct = {}) const;

  StirlingCache& stirling_for_group(std::int32_t group) const;

 private:
  std::vector<PypParams> groups_;
  std::vector<std::int32_t> group_cache_;
  mutable std::vector<StirlingCache> caches_;
  std::vector<PypNode> nodes_;
  std::vector<std::pair<NodeId, BaseMeasure>> bases_;
};

}  // namespace cntm
