#pragma once

#include <cstdint>
#include <vector>

namespace cntm {

/// Log-space table of generalised Stirling numbers S^n_{m,a} for one fixed
/// discount a, built from S^{n+1}_m = S^n_{m-1} + (n - m a) S^n_m.
///
/// Rows grow by doubling in n. Columns are stored up to a bound that also
/// doubles when a larger m is requested, so long rows with small table counts
/// stay cheap. Lookups may grow the table and are therefore non-const; a table
/// belongs to a single sampling chain.
class StirlingCache {
 public:
  explicit StirlingCache(double discount);

  double discount() const { return discount_; }

  /// log S^n_{m,a}; -inf where the number is zero (m = 0 < n).
  double log_value(std::int64_t n, std::int64_t m);

  /// log(S^{n+dn}_{m+dm} / S^n_m) for dn, dm in {0, 1}.
  double log_ratio(std::int64_t n, std::int64_t m, int dn, int dm);

  std::int64_t rows() const { return static_cast<std::int64_t>(table_.size()); }
  std::int64_t columns() const { return columns_; }

 private:
  void ensure(std::int64_t n, std::int64_t m);
  void extend_columns(std::int64_t new_columns);
  void extend_rows(std::int64_t new_rows);
  void fill_row(std::int64_t n, std::int64_t from_column);

  double discount_;
  std::int64_t columns_ = 0;  // stored columns per row: 0..columns_-1
  std::vector<std::vector<double>> table_;
};

/// Free-function form backed by a per-thread cache per discount value.
double log_stirling(std::int64_t n, std::int64_t m, double discount);
double log_stirling_ratio(std::int64_t n, std::int64_t m, int dn, int dm,
                          double discount);

/// log prod_{i<count} (base + i*step).
double log_pochhammer(double base, double step, std::int64_t count);

/// (base|step)_{count+1} / (base|step)_count = base + count*step.
double pochhammer_ratio(double base, double step, std::int64_t count);

}  // namespace cntm
