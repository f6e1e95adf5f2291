#pragma once

#include "spaloc/model.hpp"

#include <vector>

namespace spaloc {

/// Fully materialised NLM forward pass. Shares the model's parameters but
/// none of the sparse plan machinery; tuple (x_1..x_r) sits at row
/// sum_k x_k N^(r-1-k) of every table.
template <typename Scalar>
struct DenseForward {
  ValueTable<Scalar> predictions;  // N^out_arity x out_channels, sigmoid applied
  std::vector<ValueTable<Scalar>> last_layer;  // per arity
  std::int64_t peak_rows = 0;
};

namespace dense_detail {

inline std::int64_t ipow(std::int64_t n, int r) {
  std::int64_t p = 1;
  for (int k = 0; k < r; ++k) p *= n;
  return p;
}

// (x_1..x_r) from a row number.
inline void unrank(std::int64_t row, int r, std::int64_t n, std::vector<std::int64_t>& tuple) {
  tuple.assign(r, 0);
  for (int k = r - 1; k >= 0; --k) {
    tuple[k] = row % n;
    row /= n;
  }
}

inline std::int64_t rank(const std::vector<std::int64_t>& tuple, std::int64_t n) {
  std::int64_t row = 0;
  for (auto x : tuple) row = row * n + x;
  return row;
}

}  // namespace dense_detail

/// Throws CapacityError when a layer table would exceed kDenseCapacity entries.
template <typename Scalar>
DenseForward<Scalar> dense_reference_forward(const Model<Scalar>& model, const ArityFamily<Scalar>& inputs) {
  using namespace dense_detail;
  const auto& cfg = model.config();
  const int R = cfg.breadth;
  const std::int64_t n = inputs.node_count();
  DenseForward<Scalar> result;

  std::vector<ValueTable<Scalar>> cur(R + 1);
  for (int r = 0; r <= R; ++r) {
    const std::int64_t rows = ipow(n, r);
    if (rows * std::max<Index>(1, inputs.tensors[r].channels()) > kDenseCapacity)
      throw CapacityError("dense reference too large");
    cur[r] = ValueTable<Scalar>::Zero(rows, inputs.tensors[r].channels());
    const auto& t = inputs.tensors[r];
    std::vector<std::int64_t> tuple(r);
    for (Index i = 0; i < t.rows(); ++i) {
      for (int k = 0; k < r; ++k) tuple[k] = t.indices()(i, k);
      cur[r].row(rank(tuple, n)) = t.values().row(i);
    }
  }

  std::vector<std::int64_t> tuple;
  std::vector<std::int64_t> permuted;
  for (const auto& layer : model.layers()) {
    std::vector<ValueTable<Scalar>> next(R + 1);
    for (int r = 0; r <= R; ++r) {
      const auto& block = layer.blocks[r];
      const std::int64_t rows = ipow(n, r);
      const Index w_same = static_cast<Index>(cur[r].cols());
      const Index w_low = r >= 1 ? static_cast<Index>(cur[r - 1].cols()) : 0;
      const Index w_high = r < R ? static_cast<Index>(cur[r + 1].cols()) : 0;
      const Index width = w_same + w_low + w_high;
      const auto& perms = permutations(r);
      const Index fused = static_cast<Index>(perms.size()) * width;
      if (rows * std::max<Index>(fused, 1) > kDenseCapacity) throw CapacityError("dense reference too large");
      result.peak_rows = std::max(result.peak_rows, rows);

      // concat(same, expand(lower), reduce(higher))
      ValueTable<Scalar> cat = ValueTable<Scalar>::Zero(rows, width);
      for (std::int64_t row = 0; row < rows; ++row) {
        if (w_same) cat.row(row).head(w_same) = cur[r].row(row);
        if (w_low) cat.row(row).segment(w_same, w_low) = cur[r - 1].row(row / n);
        if (w_high) {
          for (std::int64_t z = 0; z < n; ++z) {
            const auto src = cur[r + 1].row(row * n + z);
            if (z == 0) cat.row(row).tail(w_high) = src;
            else cat.row(row).tail(w_high) = cat.row(row).tail(w_high).cwiseMax(src);
          }
        }
      }
      // permute: block k of tuple x is cat at (x_{p_k(0)}, ..., x_{p_k(r-1)})
      ValueTable<Scalar> fusedtab(rows, fused);
      for (std::int64_t row = 0; row < rows; ++row) {
        unrank(row, r, n, tuple);
        for (std::size_t k = 0; k < perms.size(); ++k) {
          permuted.assign(r, 0);
          for (int j = 0; j < r; ++j) permuted[j] = tuple[perms[k][j]];
          if (width) fusedtab.row(row).segment(static_cast<Index>(k) * width, width) = cat.row(rank(permuted, n));
        }
      }
      ValueTable<Scalar> main = (fusedtab * block.main.value).cwiseMax(Scalar(0));
      ValueTable<Scalar> logit = fusedtab * block.gate.value;
      logit.array() += block.gate_bias.value(0, 0);
      const auto gate = (Scalar(1) + (-logit.array()).exp()).inverse();
      next[r] = (main.array().colwise() * gate.col(0)).matrix();
    }
    cur = std::move(next);
  }
  ValueTable<Scalar> logits = cur[cfg.output_arity] * model.head().value;
  logits.rowwise() += model.head_bias().value.row(0);
  result.predictions = (Scalar(1) + (-logits.array()).exp()).inverse().matrix();
  result.last_layer = std::move(cur);
  return result;
}

}  // namespace spaloc
