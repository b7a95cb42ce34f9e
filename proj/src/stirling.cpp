#include "cntm/stirling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>

namespace cntm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

}  // namespace

StirlingCache::StirlingCache(double discount) : discount_(discount) {
  if (!(discount >= 0.0 && discount < 1.0)) {
    throw std::invalid_argument("stirling: discount must lie in [0, 1), got " +
                                std::to_string(discount));
  }
  columns_ = 8;
  table_.push_back({0.0});
  extend_rows(64);
}

void StirlingCache::fill_row(std::int64_t n, std::int64_t from_column) {
  auto& row = table_[static_cast<std::size_t>(n)];
  const std::int64_t width = std::min(n, columns_ - 1) + 1;
  row.resize(static_cast<std::size_t>(width), kNegInf);
  if (n == 0) {
    row[0] = 0.0;
    return;
  }
  const auto& prev = table_[static_cast<std::size_t>(n - 1)];
  const auto prev_width = static_cast<std::int64_t>(prev.size());
  const double prev_n = static_cast<double>(n - 1);
  for (std::int64_t m = std::max<std::int64_t>(from_column, 0); m < width; ++m) {
    // S^n_m = S^{n-1}_{m-1} + (n-1 - m a) S^{n-1}_m
    double value = kNegInf;
    if (m >= 1 && m - 1 < prev_width) value = prev[static_cast<std::size_t>(m - 1)];
    if (m < prev_width && m <= n - 1) {
      const double stay = prev[static_cast<std::size_t>(m)];
      if (stay != kNegInf) {
        value = log_add(value,
                        std::log(prev_n - static_cast<double>(m) * discount_) + stay);
      }
    }
    row[static_cast<std::size_t>(m)] = value;
  }
}

void StirlingCache::extend_rows(std::int64_t new_rows) {
  const auto old_rows = rows();
  table_.resize(static_cast<std::size_t>(new_rows));
  for (std::int64_t n = old_rows; n < new_rows; ++n) fill_row(n, 0);
}

void StirlingCache::extend_columns(std::int64_t new_columns) {
  columns_ = new_columns;
  for (std::int64_t n = 0; n < rows(); ++n) {
    const auto old_width =
        static_cast<std::int64_t>(table_[static_cast<std::size_t>(n)].size());
    fill_row(n, old_width);
  }
}

void StirlingCache::ensure(std::int64_t n, std::int64_t m) {
  if (m >= columns_) {
    std::int64_t c = columns_;
    while (c <= m) c *= 2;
    extend_columns(c);
  }
  if (n >= rows()) {
    std::int64_t r = rows();
    while (r <= n) r *= 2;
    extend_rows(r);
  }
}

double StirlingCache::log_value(std::int64_t n, std::int64_t m) {
  if (n < 0 || m < 0 || m > n) {
    throw std::domain_error("stirling: need 0 <= m <= n, got n=" + std::to_string(n) +
                            " m=" + std::to_string(m));
  }
  if (n >= rows() || m >= columns_) ensure(n, m);
  return table_[static_cast<std::size_t>(n)][static_cast<std::size_t>(m)];
}

double StirlingCache::log_ratio(std::int64_t n, std::int64_t m, int dn, int dm) {
  return log_value(n + dn, m + dm) - log_value(n, m);
}

namespace {

StirlingCache& thread_cache(double discount) {
  thread_local std::map<double, StirlingCache> caches;
  auto it = caches.find(discount);
  if (it == caches.end()) it = caches.emplace(discount, StirlingCache(discount)).first;
  return it->second;
}

}  // namespace

double log_stirling(std::int64_t n, std::int64_t m, double discount) {
  return thread_cache(discount).log_value(n, m);
}

double log_stirling_ratio(std::int64_t n, std::int64_t m, int dn, int dm,
                          double discount) {
  return thread_cache(discount).log_ratio(n, m, dn, dm);
}

double log_pochhammer(double base, double step, std::int64_t count) {
  double total = 0.0;
  for (std::int64_t i = 0; i < count; ++i) {
    const double factor = base + static_cast<double>(i) * step;
    if (!(factor > 0.0)) {
      throw std::domain_error("pochhammer: nonpositive factor at i=" + std::to_string(i));
    }
    total += std::log(factor);
  }
  return total;
}

double pochhammer_ratio(double base, double step, std::int64_t count) {
  return base + static_cast<double>(count) * step;
}

}  // namespace cntm
