#include "spaloc/sparsity.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>

namespace spaloc {

double density_loss(std::span<const Eigen::VectorXd> gates) {
  if (gates.empty()) throw UndefinedInputError("density_loss needs at least one table");
  double hs = 0;
  double size = 0;
  for (const auto& g : gates) {
    if (g.size() == 0) continue;
    hs += hoyer_square(g);
    size += static_cast<double>(g.size());
  }
  return size > 0 ? hs / size : 0.0;
}

double DensityReport::density_percent() const {
  double kept = 0;
  double slots = 0;
  for (const auto& e : entries) {
    if (e.arity < 1) continue;
    kept += static_cast<double>(e.retained);
    slots += static_cast<double>(e.capacity);
  }
  return slots > 0 ? 100.0 * kept / slots : 0.0;
}

std::int64_t DensityReport::peak_rows() const {
  std::int64_t peak = 0;
  for (const auto& e : entries) peak = std::max(peak, e.rows);
  return peak;
}

std::int64_t DensityReport::peak_retained() const {
  std::int64_t peak = 0;
  for (const auto& e : entries) peak = std::max(peak, e.retained);
  return peak;
}

void DensityReport::write_csv(std::ostream& os, bool header) const {
  if (header) os << "layer,arity,rows,retained_frac,hs\n";
  for (const auto& e : entries)
    os << e.layer << ',' << e.arity << ',' << e.rows << ',' << std::setprecision(6) << e.retained_frac()
       << ',' << e.hs << '\n';
}

}  // namespace spaloc
