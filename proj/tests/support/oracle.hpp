#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <vector>

#include "cntm/corpus.hpp"

namespace oracle {

/// Unsigned Stirling numbers of the first kind by the integer recurrence
/// c(n+1, m) = n c(n, m) + c(n, m-1). Exact for n <= 20.
std::vector<std::vector<std::uint64_t>> stirling_first_kind(int n_max);

/// Generalised Stirling numbers S^n_{m,a} in long double, straight recurrence.
long double generalized_stirling(int n, int m, long double a);

/// A restaurant in a brute-force hierarchy. Nodes must be listed children
/// first (every parent index is greater than the child index).
struct Node {
  bool gem = false;
  int parent = -1;
  long double discount = 0.0L;
  long double concentration = 1.0L;
  std::map<int, int> direct;
  /// PYP root only: probability of each key under the base.
  long double base = 1.0L;
  /// GEM root only: number of label slots; each new label has weight
  /// 1 / (free slots) when it appears.
  int slots = 1;
};

/// Sum over every table configuration of the joint probability of the seating
/// arrangement (all keys labelled).
long double total_weight(std::vector<Node> nodes);

/// Upper tail P(X > statistic) of a chi-square distribution.
double chi_square_sf(double statistic, int degrees_of_freedom);

/// Total variation distance between two distributions on the same support.
double total_variation(const std::vector<double>& p, const std::vector<double>& q);

}  // namespace oracle

namespace fixtures {

/// Hand-built corpus: tokens per document, author per document, edges
/// (citing, cited) without the diagonal, optional labels.
std::shared_ptr<cntm::Corpus> make_corpus(const std::vector<std::vector<std::int32_t>>& tokens,
                                          const std::vector<std::int32_t>& authors,
                                          std::size_t vocabulary,
                                          const std::vector<std::pair<std::int32_t, std::int32_t>>& edges = {},
                                          const std::vector<std::string>& labels = {});

}  // namespace fixtures
