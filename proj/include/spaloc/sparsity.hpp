#pragma once

#include "spaloc/sparse_tensor.hpp"

#include <Eigen/Core>

#include <cmath>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

namespace spaloc {

class UndefinedInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Hoyer measure ((sum|x|)/||x||_2 - 1)/(sqrt(n) - 1), in [0, 1], larger is denser.
/// The all-zero vector maps to 0.
template <typename Derived>
double hoyer(const Eigen::DenseBase<Derived>& x) {
  const auto n = static_cast<double>(x.size());
  if (x.size() < 2) throw UndefinedInputError("hoyer needs at least two entries");
  const double l1 = x.derived().template cast<double>().cwiseAbs().sum();
  const double l2 = std::sqrt(x.derived().template cast<double>().cwiseAbs2().sum());
  if (l2 == 0) return 0.0;
  return (l1 / l2 - 1.0) / (std::sqrt(n) - 1.0);
}

/// Hoyer-Square (sum|x|)^2 / sum x^2, in [1, n]. The all-zero vector maps to 1.
template <typename Derived>
double hoyer_square(const Eigen::DenseBase<Derived>& x) {
  const double l1 = x.derived().template cast<double>().cwiseAbs().sum();
  const double l2sq = x.derived().template cast<double>().cwiseAbs2().sum();
  if (l2sq == 0) return 1.0;
  return l1 * l1 / l2sq;
}

template <typename Derived>
double l1_loss(const Eigen::DenseBase<Derived>& x) {
  if (x.size() == 0) return 0.0;
  return x.derived().template cast<double>().cwiseAbs().mean();
}

template <typename Derived>
double l2_loss(const Eigen::DenseBase<Derived>& x) {
  if (x.size() == 0) return 0.0;
  return x.derived().template cast<double>().cwiseAbs2().mean();
}

/// (sum_t H_S(g_t)) / (sum_t |g_t|); empty tables contribute to neither sum.
double density_loss(std::span<const Eigen::VectorXd> gates);

struct DensityEntry {
  int layer = 0;
  int arity = 0;
  std::int64_t rows = 0;      // rows materialised before pruning
  std::int64_t retained = 0;  // rows kept after pruning
  std::int64_t capacity = 0;  // N^arity
  double hs = 1.0;            // Hoyer-Square of the gate table

  double retained_frac() const { return rows > 0 ? static_cast<double>(retained) / rows : 0.0; }
};

/// Per-layer, per-arity gate statistics and the aggregate NNZ density.
struct DensityReport {
  std::vector<DensityEntry> entries;

  /// Percentage of retained rows over all N^r slots of the intermediate
  /// groundings of arity >= 1.
  double density_percent() const;

  /// Max over entries of materialised rows, before pruning.
  std::int64_t peak_rows() const;
  /// Max over entries of retained rows, the peak-memory proxy.
  std::int64_t peak_retained() const;

  /// CSV with columns layer,arity,rows,retained_frac,hs.
  void write_csv(std::ostream& os, bool header = true) const;
};

}  // namespace spaloc
