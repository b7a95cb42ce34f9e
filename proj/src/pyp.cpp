#include "cntm/pyp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace cntm {

std::string serialize_rng(const Rng& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

void deserialize_rng(Rng& rng, const std::string& text) {
  std::istringstream in(text);
  in >> rng;
  if (!in) throw std::runtime_error("rng state: cannot parse");
}

TableCount CountMap::get(Key key) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), key,
                             [](const Entry& e, Key k) { return e.first < k; });
  if (it == entries_.end() || it->first != key) return {};
  return it->second;
}

TableCount& CountMap::upsert(Key key) {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), key,
                             [](const Entry& e, Key k) { return e.first < k; });
  if (it == entries_.end() || it->first != key) it = entries_.insert(it, {key, TableCount{}});
  return it->second;
}

void CountMap::prune(Key key) {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), key,
                             [](const Entry& e, Key k) { return e.first < k; });
  if (it != entries_.end() && it->first == key && it->second.customers == 0 &&
      it->second.tables == 0) {
    entries_.erase(it);
  }
}

std::int32_t PypTree::add_group(PypParams params) {
  if (!(params.discount >= 0.0 && params.discount < 1.0)) {
    throw std::invalid_argument("pyp: discount must lie in [0, 1)");
  }
  if (!(params.concentration > 0.0)) {
    throw std::invalid_argument("pyp: concentration must be positive");
  }
  std::int32_t cache = -1;
  for (std::size_t i = 0; i < caches_.size(); ++i) {
    if (caches_[i].discount() == params.discount) cache = static_cast<std::int32_t>(i);
  }
  if (cache < 0) {
    caches_.emplace_back(params.discount);
    cache = static_cast<std::int32_t>(caches_.size() - 1);
  }
  groups_.push_back(params);
  group_cache_.push_back(cache);
  return static_cast<std::int32_t>(groups_.size() - 1);
}

NodeId PypTree::add_node(NodeKind kind, std::int32_t group, NodeId parent) {
  if (group < 0 || static_cast<std::size_t>(group) >= groups_.size()) {
    throw std::out_of_range("pyp: unknown group");
  }
  if (parent != kNoNode && (parent < 0 || static_cast<std::size_t>(parent) >= nodes_.size())) {
    throw std::out_of_range("pyp: unknown parent");
  }
  if (kind == NodeKind::kGem && parent != kNoNode) {
    throw std::invalid_argument("pyp: a GEM node must be a root");
  }
  PypNode n;
  n.kind = kind;
  n.group = group;
  n.parent = parent;
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

void PypTree::set_base(NodeId root, BaseMeasure base) {
  if (node(root).parent != kNoNode || node(root).kind != NodeKind::kPyp) {
    throw std::invalid_argument("pyp: base measures attach to PYP roots only");
  }
  for (auto& [id, b] : bases_) {
    if (id == root) {
      b = std::move(base);
      return;
    }
  }
  bases_.emplace_back(root, std::move(base));
}

const BaseMeasure& PypTree::base(NodeId root) const {
  for (const auto& [id, b] : bases_) {
    if (id == root) return b;
  }
  throw std::logic_error("pyp: root node " + std::to_string(root) + " has no base measure");
}

void PypTree::set_concentration(std::int32_t group, double concentration) {
  if (!(concentration > 0.0)) throw std::invalid_argument("pyp: concentration must be positive");
  groups_[static_cast<std::size_t>(group)].concentration = concentration;
}

StirlingCache& PypTree::stirling_for_group(std::int32_t group) const {
  return caches_[static_cast<std::size_t>(group_cache_[static_cast<std::size_t>(group)])];
}

ChainPath PypTree::path(NodeId start) const {
  ChainPath p;
  for (NodeId n = start; n != kNoNode; n = node(n).parent) {
    if (p.depth == kMaxChainDepth) throw std::logic_error("pyp: chain too deep");
    p.nodes[static_cast<std::size_t>(p.depth++)] = n;
  }
  return p;
}

double PypTree::log_marginal(NodeId id) const {
  const PypNode& n = node(id);
  const PypParams& p = params(n.group);
  double value = log_pochhammer(p.concentration, p.discount, n.tables) -
                 log_pochhammer(p.concentration, 1.0, n.customers);
  StirlingCache& cache = stirling_for_group(n.group);
  for (const auto& [key, tc] : n.counts) {
    if (tc.customers == 0) continue;
    if (tc.tables < 1 || tc.tables > tc.customers) {
      throw std::logic_error("internal consistency error: node " + std::to_string(id) +
                             " key " + std::to_string(key) + " has c=" +
                             std::to_string(tc.customers) + " t=" + std::to_string(tc.tables));
    }
    value += cache.log_value(tc.customers, tc.tables);
  }
  return value;
}

double PypTree::log_likelihood() const {
  double total = 0.0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) total += log_marginal(static_cast<NodeId>(i));
  for (const auto& [root, b] : bases_) {
    for (const auto& [key, tc] : node(root).counts) {
      if (tc.tables > 0) total += static_cast<double>(tc.tables) * std::log(b.at(key));
    }
  }
  return total;
}

int PypTree::highest_open_deficit(const ChainPath& path, Key key) const {
  int highest = -1;
  for (int l = 0; l < path.depth; ++l) {
    const TableCount tc = node(path[l]).counts.get(key);
    if (tc.customers >= 1 && tc.tables == 0) highest = l;
  }
  return highest;
}

ChainWeights PypTree::chain_weights(const ChainPath& path, Key key,
                                    const ChainOptions& options) const {
  std::array<double, kMaxChainDepth> join{};
  std::array<double, kMaxChainDepth> open{};
  for (int l = 0; l < path.depth; ++l) {
    const NodeId id = path[l];
    const PypNode& n = node(id);
    const PypParams& p = params(n.group);
    const TableCount tc = n.counts.get(key);
    const double denom = p.concentration + static_cast<double>(n.customers);
    const double new_table =
        (p.concentration + p.discount * static_cast<double>(n.tables)) / denom;
    const auto li = static_cast<std::size_t>(l);
    if (n.kind == NodeKind::kGem) {
      if (tc.customers >= 1) {
        join[li] = (static_cast<double>(tc.customers) - p.discount) / denom;
        open[li] = 0.0;
      } else {
        join[li] = 0.0;
        open[li] = new_table * options.gem_new_key_weight;
      }
    } else if (tc.customers == 0) {
      join[li] = 0.0;
      open[li] = new_table;
    } else if (tc.tables == 0) {
      join[li] = 0.0;
      open[li] = new_table / static_cast<double>(tc.customers + 1);
    } else {
      StirlingCache& cache = stirling_for_group(n.group);
      const double c = tc.customers;
      const double t = tc.tables;
      join[li] = std::exp(cache.log_ratio(tc.customers, tc.tables, 1, 0)) * (c + 1.0 - t) /
                 (c + 1.0) / denom;
      open[li] = new_table * std::exp(cache.log_ratio(tc.customers, tc.tables, 1, 1)) *
                 (t + 1.0) / (c + 1.0);
    }
    if (n.kind == NodeKind::kPyp && n.parent == kNoNode) open[li] *= base(id).at(key);
    if (l <= options.must_open_through) join[li] = 0.0;
  }

  ChainWeights w;
  w.depth = path.depth;
  double prefix = 1.0;
  for (int o = 0; o < path.depth; ++o) {
    const auto oi = static_cast<std::size_t>(o);
    w.outcome[oi] = prefix * join[oi];
    w.total += w.outcome[oi];
    prefix *= open[oi];
  }
  w.outcome[static_cast<std::size_t>(path.depth)] = prefix;
  w.total += prefix;
  return w;
}

void PypTree::apply_chain(const ChainPath& path, Key key, int opened) {
  const int reach = std::min(opened, path.depth - 1);
  for (int l = 0; l <= reach; ++l) {
    PypNode& n = mutable_node(path[l]);
    TableCount& tc = n.counts.upsert(key);
    ++tc.customers;
    ++n.customers;
    if (l < opened) {
      ++tc.tables;
      ++n.tables;
    }
  }
}

void PypTree::revert_chain(const ChainPath& path, Key key, int opened) {
  const int reach = std::min(opened, path.depth - 1);
  for (int l = 0; l <= reach; ++l) {
    PypNode& n = mutable_node(path[l]);
    TableCount& tc = n.counts.upsert(key);
    --tc.customers;
    --n.customers;
    if (l < opened) {
      --tc.tables;
      --n.tables;
    }
    n.counts.prune(key);
  }
}

IndicatorOutcome PypTree::add_customer(NodeId start, Key key, Rng& rng,
                                       double gem_new_key_weight) {
  const ChainPath p = path(start);
  ChainOptions options;
  options.must_open_through = highest_open_deficit(p, key);
  options.gem_new_key_weight = gem_new_key_weight;
  const ChainWeights w = chain_weights(p, key, options);
  if (!(w.total > 0.0)) {
    throw std::logic_error("pyp: no feasible increment for key " + std::to_string(key));
  }
  const auto o = static_cast<int>(sample_index(
      std::span<const double>(w.outcome.data(), static_cast<std::size_t>(w.depth + 1)),
      w.total, rng));
  apply_chain(p, key, o);
  return {p.depth, o};
}

IndicatorOutcome PypTree::remove_customer(NodeId start, Key key, Rng& rng) {
  IndicatorOutcome out;
  for (NodeId id = start; id != kNoNode; id = node(id).parent) {
    ++out.depth;
    PypNode& n = mutable_node(id);
    TableCount& tc = n.counts.upsert(key);
    if (tc.customers < 1) {
      n.counts.prune(key);
      throw std::underflow_error("pyp: removing key " + std::to_string(key) +
                                 " with no customers at node " + std::to_string(id));
    }
    bool close = false;
    if (n.kind == NodeKind::kGem) {
      close = tc.customers == 1;
    } else if (tc.tables == tc.customers) {
      close = true;
    } else if (tc.tables > 0) {
      close = bernoulli(static_cast<double>(tc.tables) / static_cast<double>(tc.customers), rng);
    }
    --tc.customers;
    --n.customers;
    if (close) {
      --tc.tables;
      --n.tables;
    }
    n.counts.prune(key);
    if (!close) break;
    ++out.opened;
  }
  return out;
}

double PypTree::predictive(NodeId id, Key key) const {
  const PypNode& n = node(id);
  const PypParams& p = params(n.group);
  const TableCount tc = n.counts.get(key);
  const double denom = p.concentration + static_cast<double>(n.customers);
  const double new_table = p.concentration + p.discount * static_cast<double>(n.tables);
  if (n.kind == NodeKind::kGem) {
    if (tc.customers >= 1) return (static_cast<double>(tc.customers) - p.discount) / denom;
    return new_table / denom;
  }
  const double parent = n.parent == kNoNode ? base(id).at(key) : predictive(n.parent, key);
  return (static_cast<double>(tc.customers) - p.discount * static_cast<double>(tc.tables) +
          new_table * parent) /
         denom;
}

IndicatorOutcome PypTree::seat_customer(NodeId start, Key key, Rng& rng) {
  IndicatorOutcome out;
  for (NodeId id = start; id != kNoNode; id = node(id).parent) {
    ++out.depth;
    PypNode& n = mutable_node(id);
    const PypParams& p = params(n.group);
    const TableCount before = n.counts.get(key);
    bool open = false;
    if (n.kind == NodeKind::kGem) {
      open = before.customers == 0;
    } else {
      const double join =
          before.tables > 0
              ? static_cast<double>(before.customers) - p.discount * static_cast<double>(before.tables)
              : 0.0;
      const double parent = n.parent == kNoNode ? base(id).at(key) : predictive(n.parent, key);
      const double fresh =
          (p.concentration + p.discount * static_cast<double>(n.tables)) * parent;
      if (!(join + fresh > 0.0)) {
        throw std::logic_error("pyp: no feasible seating for key " + std::to_string(key));
      }
      open = uniform01(rng) * (join + fresh) >= join;
    }
    TableCount& tc = n.counts.upsert(key);
    ++tc.customers;
    ++n.customers;
    if (!open) break;
    ++tc.tables;
    ++n.tables;
    ++out.opened;
  }
  return out;
}

std::vector<double> PypTree::estimate(NodeId id, std::span<const double> parent) const {
  const PypNode& n = node(id);
  const PypParams& p = params(n.group);
  const double denom = p.concentration + static_cast<double>(n.customers);
  const double new_table = p.concentration + p.discount * static_cast<double>(n.tables);
  std::vector<double> out(parent.size());
  for (std::size_t k = 0; k < parent.size(); ++k) out[k] = new_table * parent[k] / denom;
  for (const auto& [key, tc] : n.counts) {
    if (key < 0 || static_cast<std::size_t>(key) >= out.size()) continue;
    out[static_cast<std::size_t>(key)] +=
        (static_cast<double>(tc.customers) - p.discount * static_cast<double>(tc.tables)) / denom;
  }
  return out;
}

std::vector<double> PypTree::estimate_gem(NodeId id, std::size_t slots) const {
  const PypNode& n = node(id);
  const PypParams& p = params(n.group);
  std::vector<double> out(slots, 0.0);
  if (slots == 0) return out;
  std::size_t used = 0;
  for (const auto& [key, tc] : n.counts) {
    if (tc.customers > 0 && key >= 0 && static_cast<std::size_t>(key) < slots) ++used;
  }
  if (used == 0) {
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(slots));
    return out;
  }
  const double c_total = static_cast<double>(n.customers);
  const double t_total = static_cast<double>(n.tables);
  if (used == slots) {
    const double denom = c_total - p.discount * t_total;
    for (const auto& [key, tc] : n.counts) {
      if (tc.customers > 0 && static_cast<std::size_t>(key) < slots) {
        out[static_cast<std::size_t>(key)] =
            (static_cast<double>(tc.customers) - p.discount) / denom;
      }
    }
    return out;
  }
  const double denom = p.concentration + c_total;
  const double spare = (p.concentration + p.discount * t_total) / denom /
                       static_cast<double>(slots - used);
  std::fill(out.begin(), out.end(), spare);
  for (const auto& [key, tc] : n.counts) {
    if (tc.customers > 0 && static_cast<std::size_t>(key) < slots) {
      out[static_cast<std::size_t>(key)] = (static_cast<double>(tc.customers) - p.discount) / denom;
    }
  }
  return out;
}

std::vector<std::string> PypTree::consistency_check(const DirectCustomers& direct) const {
  std::vector<std::string> problems;
  auto report = [&](NodeId id, Key key, const std::string& what) {
    problems.push_back("node " + std::to_string(id) + " key " + std::to_string(key) + ": " +
                       what);
  };
  std::vector<std::map<Key, std::int64_t>> inherited(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const PypNode& n = nodes_[i];
    if (n.parent == kNoNode) continue;
    for (const auto& [key, tc] : n.counts) {
      if (tc.tables != 0) inherited[static_cast<std::size_t>(n.parent)][key] += tc.tables;
    }
  }
  std::vector<std::pair<Key, std::int64_t>> own;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto id = static_cast<NodeId>(i);
    const PypNode& n = nodes_[i];
    std::int64_t c_sum = 0;
    std::int64_t t_sum = 0;
    for (const auto& [key, tc] : n.counts) {
      c_sum += tc.customers;
      t_sum += tc.tables;
      if (tc.customers < 0 || tc.tables < 0) report(id, key, "negative count");
      if (tc.tables > tc.customers) {
        report(id, key,
               "tables " + std::to_string(tc.tables) + " > customers " +
                   std::to_string(tc.customers));
      }
      if (tc.customers >= 1 && tc.tables == 0) report(id, key, "customers without a table");
      if (n.kind == NodeKind::kGem && tc.tables != (tc.customers >= 1 ? 1 : 0)) {
        report(id, key, "GEM table count must be 1 exactly when customers are present");
      }
    }
    if (c_sum != n.customers) {
      problems.push_back("node " + std::to_string(id) + ": customer total " +
                         std::to_string(n.customers) + " != sum " + std::to_string(c_sum));
    }
    if (t_sum != n.tables) {
      problems.push_back("node " + std::to_string(id) + ": table total " +
                         std::to_string(n.tables) + " != sum " + std::to_string(t_sum));
    }
    std::map<Key, std::int64_t> expected = inherited[i];
    if (direct) {
      own.clear();
      direct(id, own);
      for (const auto& [key, count] : own) expected[key] += count;
      for (const auto& [key, tc] : n.counts) expected.try_emplace(key, 0);
      for (const auto& [key, count] : expected) {
        const auto have = n.counts.get(key).customers;
        if (have != count) {
          report(id, key,
                 "customers " + std::to_string(have) + " != expected " + std::to_string(count));
        }
      }
    } else {
      for (const auto& [key, count] : expected) {
        const auto have = n.counts.get(key).customers;
        if (have < count) {
          report(id, key,
                 "customers " + std::to_string(have) + " < child tables " +
                     std::to_string(count));
        }
      }
    }
  }
  return problems;
}

}  // namespace cntm
