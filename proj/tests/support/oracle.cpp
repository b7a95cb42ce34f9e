#include "oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace oracle {

std::vector<std::vector<std::uint64_t>> stirling_first_kind(int n_max) {
  std::vector<std::vector<std::uint64_t>> c(static_cast<std::size_t>(n_max) + 1,
                                            std::vector<std::uint64_t>(static_cast<std::size_t>(n_max) + 1, 0));
  c[0][0] = 1;
  for (int n = 0; n < n_max; ++n) {
    for (int m = 1; m <= n + 1; ++m) {
      c[n + 1][m] = static_cast<std::uint64_t>(n) * c[n][m] + c[n][m - 1];
    }
  }
  return c;
}

long double generalized_stirling(int n, int m, long double a) {
  if (m > n || m < 0) return 0.0L;
  std::vector<long double> row{1.0L};
  for (int r = 0; r < n; ++r) {
    std::vector<long double> next(static_cast<std::size_t>(r) + 2, 0.0L);
    for (int j = 0; j <= r; ++j) {
      next[j] += (static_cast<long double>(r) - static_cast<long double>(j) * a) * row[j];
      next[j + 1] += row[j];
    }
    row = std::move(next);
  }
  return row[static_cast<std::size_t>(m)];
}

namespace {

long double rising(long double base, long double step, long long count) {
  long double p = 1.0L;
  for (long long i = 0; i < count; ++i) p *= base + static_cast<long double>(i) * step;
  return p;
}

long double node_weight(const Node& node, const std::map<int, int>& customers,
                        const std::map<int, int>& tables) {
  long long c_total = 0;
  long long t_total = 0;
  for (const auto& [k, c] : customers) c_total += c;
  for (const auto& [k, t] : tables) t_total += t;
  long double w = rising(node.concentration, node.discount, t_total) /
                  rising(node.concentration, 1.0L, c_total);
  if (node.gem) {
    for (const auto& [k, c] : customers) {
      if (c > 0) w *= rising(1.0L - node.discount, 1.0L, c - 1);
    }
    for (long long i = 0; i < t_total; ++i) {
      if (node.slots - i <= 0) return 0.0L;
      w /= static_cast<long double>(node.slots - i);
    }
    return w;
  }
  for (const auto& [k, c] : customers) {
    const auto it = tables.find(k);
    w *= generalized_stirling(c, it == tables.end() ? 0 : it->second, node.discount);
  }
  if (node.parent < 0) w *= std::pow(node.base, static_cast<long double>(t_total));
  return w;
}

}  // namespace

long double total_weight(std::vector<Node> nodes) {
  const auto count = nodes.size();
  for (std::size_t i = 0; i < count; ++i) {
    if (nodes[i].parent >= 0 && static_cast<std::size_t>(nodes[i].parent) <= i) {
      throw std::invalid_argument("oracle: parents must follow children");
    }
  }
  std::vector<std::map<int, int>> inherited(count);
  std::function<long double(std::size_t)> visit = [&](std::size_t i) -> long double {
    if (i == count) return 1.0L;
    std::map<int, int> customers = nodes[i].direct;
    for (const auto& [k, c] : inherited[i]) customers[k] += c;
    std::vector<std::pair<int, int>> keys;
    for (const auto& [k, c] : customers) {
      if (c > 0) keys.emplace_back(k, c);
    }
    std::map<int, int> tables;
    long double sum = 0.0L;
    std::function<void(std::size_t)> choose = [&](std::size_t at) {
      if (at == keys.size()) {
        const long double w = node_weight(nodes[i], customers, tables);
        if (w == 0.0L) return;
        const int parent = nodes[i].parent;
        if (parent >= 0) {
          for (const auto& [k, t] : tables) inherited[static_cast<std::size_t>(parent)][k] += t;
        }
        sum += w * visit(i + 1);
        if (parent >= 0) {
          for (const auto& [k, t] : tables) inherited[static_cast<std::size_t>(parent)][k] -= t;
        }
        return;
      }
      const auto [k, c] = keys[at];
      const int hi = nodes[i].gem ? 1 : c;
      for (int t = 1; t <= hi; ++t) {
        tables[k] = t;
        choose(at + 1);
      }
      tables.erase(k);
    };
    choose(0);
    return sum;
  };
  return visit(0);
}

double chi_square_sf(double statistic, int degrees_of_freedom) {
  // Regularised upper incomplete gamma Q(s, x) with s = df/2, x = stat/2.
  const double s = 0.5 * degrees_of_freedom;
  const double x = 0.5 * statistic;
  if (x <= 0.0) return 1.0;
  const double log_prefix = s * std::log(x) - x - std::lgamma(s);
  if (x < s + 1.0) {
    double term = 1.0 / s;
    double sum = term;
    for (int n = 1; n < 1000; ++n) {
      term *= x / (s + n);
      sum += term;
      if (term < sum * 1e-15) break;
    }
    return 1.0 - std::exp(log_prefix) * sum;
  }
  // Lentz continued fraction for Q.
  double b = x + 1.0 - s;
  double c = 1.0 / 1e-300;
  double d = 1.0 / b;
  double h = d;
  for (int n = 1; n < 1000; ++n) {
    const double an = -n * (n - s);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::abs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-15) break;
  }
  return std::exp(log_prefix) * h;
}

double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  double tv = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) tv += std::abs(p[i] - q[i]);
  return 0.5 * tv;
}

}  // namespace oracle

namespace fixtures {

std::shared_ptr<cntm::Corpus> make_corpus(const std::vector<std::vector<std::int32_t>>& tokens,
                                          const std::vector<std::int32_t>& authors,
                                          std::size_t vocabulary,
                                          const std::vector<std::pair<std::int32_t, std::int32_t>>& edges,
                                          const std::vector<std::string>& labels) {
  auto corpus = std::make_shared<cntm::Corpus>();
  for (std::size_t w = 0; w < vocabulary; ++w) corpus->vocabulary.add("w" + std::to_string(w));
  std::int32_t max_author = -1;
  for (auto a : authors) max_author = std::max(max_author, a);
  for (std::int32_t a = 0; a <= max_author; ++a) corpus->intern_author("A Author" + std::to_string(a), false);
  for (std::size_t d = 0; d < tokens.size(); ++d) {
    cntm::Document doc;
    doc.id = "d" + std::to_string(d);
    doc.tokens = tokens[d];
    doc.author = authors[d];
    if (d < labels.size()) doc.label = labels[d];
    corpus->documents.push_back(std::move(doc));
  }
  corpus->graph = cntm::CitationGraph(tokens.size(), edges);
  return corpus;
}

}  // namespace fixtures
