#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace spaloc {

using Index = std::int32_t;
using RowKey = std::uint64_t;

using IndexTable = Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using ValueTable = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kMaxArity = 4;

class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Row keys.
//
// An index row (x_1, ..., x_r) over N nodes maps to the mixed-radix integer
// sum_k x_k N^(r-1-k). Key order is lexicographic row order, so canonical
// tensors are exactly those whose key sequence is strictly increasing.
// ---------------------------------------------------------------------------

/// Throws CapacityError when N^arity does not fit in a signed 64-bit key.
void check_key_capacity(int arity, Index node_count);

/// Largest row count a single plan may materialise (a few GB of tables).
inline constexpr std::int64_t kRowCapacity = std::int64_t{1} << 24;

/// N^arity, checked.
RowKey tuple_count(int arity, Index node_count);

RowKey row_key(const Index* row, int arity, Index node_count);
void decode_key(RowKey key, int arity, Index node_count, Index* row);
std::vector<RowKey> row_keys(const IndexTable& indices, Index node_count);

/// All permutations of {0..arity-1} in lexicographic order; entry 0 is the identity.
const std::vector<std::vector<int>>& permutations(int arity);

Index factorial(int n);

// ---------------------------------------------------------------------------
// Structural plans.
//
// Every relational primitive is an index-level computation followed by a
// value gather. Plans hold the index-level half so that the value half can run
// on plain tables, on the autodiff tape, or in any scalar type.
// ---------------------------------------------------------------------------

/// One channel block of a gathered output: rows come from input `input`,
/// `source[i]` is the input row for output row i or -1 for implicit zeros.
struct GatherBlock {
  int input = 0;
  std::vector<Index> source;
};

struct GatherPlan {
  int arity = 0;
  Index node_count = 0;
  IndexTable indices;
  std::vector<GatherBlock> blocks;

  Index rows() const { return static_cast<Index>(indices.rows()); }
};

/// Rows [offsets[s], offsets[s+1]) of the input share output prefix s.
struct SegmentPlan {
  int arity = 0;
  Index node_count = 0;
  IndexTable indices;
  std::vector<Index> offsets;

  Index rows() const { return static_cast<Index>(indices.rows()); }
};

GatherPlan plan_expand(const IndexTable& in, int arity, Index node_count);
SegmentPlan plan_reduce(const IndexTable& in, int arity, Index node_count);
GatherPlan plan_permute(const IndexTable& in, int arity, Index node_count);
GatherPlan plan_concat(std::span<const IndexTable* const> ins, int arity, Index node_count);
GatherPlan plan_select(const IndexTable& in, std::span<const Index> keep);

/// Output widths: sum over blocks of the width of the block's input.
template <typename Scalar>
ValueTable<Scalar> apply_gather(const GatherPlan& plan,
                                std::span<const ValueTable<Scalar>* const> inputs) {
  Index width = 0;
  for (const auto& b : plan.blocks) width += static_cast<Index>(inputs[b.input]->cols());
  ValueTable<Scalar> out = ValueTable<Scalar>::Zero(plan.rows(), width);
  Index offset = 0;
  for (const auto& b : plan.blocks) {
    const auto& in = *inputs[b.input];
    const Index w = static_cast<Index>(in.cols());
    if (w > 0) {
      for (Index i = 0; i < plan.rows(); ++i) {
        const Index s = b.source[i];
        if (s >= 0) out.row(i).segment(offset, w) = in.row(s);
      }
    }
    offset += w;
  }
  return out;
}

/// Channelwise max per segment. `argmax`, when given, receives the winning input
/// row for every (segment, channel); ties resolve to the first row.
template <typename Scalar>
ValueTable<Scalar> apply_segment_max(const SegmentPlan& plan, const ValueTable<Scalar>& in,
                                     IndexTable* argmax = nullptr) {
  const Index d = static_cast<Index>(in.cols());
  ValueTable<Scalar> out(plan.rows(), d);
  if (argmax) argmax->resize(plan.rows(), d);
  for (Index s = 0; s < plan.rows(); ++s) {
    const Index begin = plan.offsets[s];
    const Index end = plan.offsets[s + 1];
    for (Index c = 0; c < d; ++c) {
      Index best = begin;
      Scalar v = in(begin, c);
      for (Index i = begin + 1; i < end; ++i) {
        if (in(i, c) > v) {
          v = in(i, c);
          best = i;
        }
      }
      out(s, c) = v;
      if (argmax) (*argmax)(s, c) = best;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// SparseFeatureTensor
// ---------------------------------------------------------------------------

/// Coordinate-list hyperedge features: row i of `indices` is an r-tuple of
/// node ids, row i of `values` its D-channel feature. Absent tuples are zero.
/// Rows are distinct and in lexicographic order.
template <typename Scalar>
class SparseFeatureTensor {
 public:
  SparseFeatureTensor() = default;

  /// Empty tensor.
  SparseFeatureTensor(int arity, Index node_count, Index channels)
      : arity_(arity), node_count_(node_count), indices_(0, arity), values_(0, channels) {
    check_shape();
  }

  /// Sorts rows and drops duplicate tuples (the first occurrence wins).
  static SparseFeatureTensor from_rows(int arity, Index node_count, IndexTable indices,
                                       ValueTable<Scalar> values) {
    SparseFeatureTensor t;
    t.arity_ = arity;
    t.node_count_ = node_count;
    if (indices.rows() != values.rows())
      throw InvariantError("index and value tables have different row counts");
    if (indices.cols() != arity) throw InvariantError("index table width differs from arity");
    t.check_shape();
    t.check_bounds(indices);
    const auto keys = row_keys(indices, node_count);
    std::vector<Index> order(keys.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Index>(i);
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return keys[a] < keys[b]; });
    std::vector<Index> keep;
    keep.reserve(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (i > 0 && keys[order[i]] == keys[order[i - 1]]) continue;
      keep.push_back(order[i]);
    }
    t.indices_.resize(static_cast<Index>(keep.size()), arity);
    t.values_.resize(static_cast<Index>(keep.size()), values.cols());
    for (std::size_t i = 0; i < keep.size(); ++i) {
      t.indices_.row(i) = indices.row(keep[i]);
      t.values_.row(i) = values.row(keep[i]);
    }
    return t;
  }

  /// Adopts tables that are already canonical; verified in debug builds.
  static SparseFeatureTensor from_canonical(int arity, Index node_count, IndexTable indices,
                                            ValueTable<Scalar> values) {
    SparseFeatureTensor t;
    t.arity_ = arity;
    t.node_count_ = node_count;
    t.indices_ = std::move(indices);
    t.values_ = std::move(values);
#ifndef NDEBUG
    t.validate();
#endif
    return t;
  }

  int arity() const { return arity_; }
  Index node_count() const { return node_count_; }
  Index channels() const { return static_cast<Index>(values_.cols()); }
  Index rows() const { return static_cast<Index>(indices_.rows()); }
  const IndexTable& indices() const { return indices_; }
  const ValueTable<Scalar>& values() const { return values_; }
  ValueTable<Scalar>& mutable_values() { return values_; }

  /// Throws InvariantError if any tensor invariant is violated.
  void validate() const {
    check_shape();
    if (indices_.rows() != values_.rows()) throw InvariantError("misaligned index/value tables");
    if (indices_.cols() != arity_) throw InvariantError("index table width differs from arity");
    check_bounds(indices_);
    const auto keys = row_keys(indices_, node_count_);
    for (std::size_t i = 1; i < keys.size(); ++i)
      if (keys[i] <= keys[i - 1]) throw InvariantError("index rows not strictly increasing");
  }

  template <typename To>
  SparseFeatureTensor<To> cast() const {
    return SparseFeatureTensor<To>::from_canonical(arity_, node_count_, indices_,
                                                   values_.template cast<To>());
  }

  friend bool operator==(const SparseFeatureTensor& a, const SparseFeatureTensor& b) {
    return a.arity_ == b.arity_ && a.node_count_ == b.node_count_ &&
           a.indices_.rows() == b.indices_.rows() && a.values_.cols() == b.values_.cols() &&
           a.indices_ == b.indices_ && a.values_ == b.values_;
  }

 private:
  void check_shape() const {
    if (arity_ < 0 || arity_ > kMaxArity) throw InvariantError("arity out of range");
    if (node_count_ < 0) throw InvariantError("negative node count");
    if (arity_ == 0 && indices_.rows() > 1) throw InvariantError("arity-0 tensor with several rows");
  }

  void check_bounds(const IndexTable& indices) const {
    if (indices.size() == 0) return;
    if (indices.minCoeff() < 0 || indices.maxCoeff() >= node_count_)
      throw InvariantError("node index out of range");
  }

  int arity_ = 0;
  Index node_count_ = 0;
  IndexTable indices_;
  ValueTable<Scalar> values_;
};

using Tensor = SparseFeatureTensor<float>;

/// R+1 tensors of arity 0..R over a shared node set.
template <typename Scalar>
struct ArityFamily {
  std::vector<SparseFeatureTensor<Scalar>> tensors;

  int breadth() const { return static_cast<int>(tensors.size()) - 1; }
  Index node_count() const { return tensors.empty() ? 0 : tensors.front().node_count(); }

  void validate() const {
    for (std::size_t r = 0; r < tensors.size(); ++r) {
      if (tensors[r].arity() != static_cast<int>(r)) throw InvariantError("arity family out of order");
      if (tensors[r].node_count() != node_count()) throw InvariantError("arity family node counts differ");
      tensors[r].validate();
    }
  }

  template <typename To>
  ArityFamily<To> cast() const {
    ArityFamily<To> out;
    for (const auto& t : tensors) out.tensors.push_back(t.template cast<To>());
    return out;
  }
};

// ---------------------------------------------------------------------------
// Relational primitives
// ---------------------------------------------------------------------------

/// (x_1..x_r) -> (x_1..x_r, o) for every node o, value row duplicated.
template <typename Scalar>
SparseFeatureTensor<Scalar> expand(const SparseFeatureTensor<Scalar>& t) {
  auto plan = plan_expand(t.indices(), t.arity(), t.node_count());
  const ValueTable<Scalar>* in[] = {&t.values()};
  auto values = apply_gather<Scalar>(plan, in);
  return SparseFeatureTensor<Scalar>::from_canonical(t.arity() + 1, t.node_count(),
                                                     std::move(plan.indices), std::move(values));
}

/// Channelwise max over the last index; prefixes without entries stay absent.
template <typename Scalar>
SparseFeatureTensor<Scalar> reduce_max(const SparseFeatureTensor<Scalar>& t) {
  if (t.arity() < 1) throw InvariantError("reduce_max needs arity >= 1");
  auto plan = plan_reduce(t.indices(), t.arity(), t.node_count());
  auto values = apply_segment_max(plan, t.values());
  return SparseFeatureTensor<Scalar>::from_canonical(t.arity() - 1, t.node_count(),
                                                     std::move(plan.indices), std::move(values));
}

/// Channel block k of row x holds t at the k-th permutation of x (zeros if absent).
/// Output rows: every permutation of every stored row.
template <typename Scalar>
SparseFeatureTensor<Scalar> permute_fuse(const SparseFeatureTensor<Scalar>& t) {
  if (t.arity() < 1) throw InvariantError("permute_fuse needs arity >= 1");
  auto plan = plan_permute(t.indices(), t.arity(), t.node_count());
  const ValueTable<Scalar>* in[] = {&t.values()};
  auto values = apply_gather<Scalar>(plan, in);
  return SparseFeatureTensor<Scalar>::from_canonical(t.arity(), t.node_count(),
                                                     std::move(plan.indices), std::move(values));
}

/// Union of supports; missing entries contribute zeros to their channel block.
template <typename Scalar>
SparseFeatureTensor<Scalar> concat_channels(std::span<const SparseFeatureTensor<Scalar>> ts) {
  if (ts.empty()) throw InvariantError("concat of no tensors");
  const int arity = ts.front().arity();
  const Index n = ts.front().node_count();
  std::vector<const IndexTable*> idx;
  std::vector<const ValueTable<Scalar>*> vals;
  for (const auto& t : ts) {
    if (t.arity() != arity) throw InvariantError("concat arity mismatch");
    if (t.node_count() != n) throw InvariantError("concat node-count mismatch");
    idx.push_back(&t.indices());
    vals.push_back(&t.values());
  }
  auto plan = plan_concat(idx, arity, n);
  auto values = apply_gather<Scalar>(plan, vals);
  return SparseFeatureTensor<Scalar>::from_canonical(arity, n, std::move(plan.indices),
                                                     std::move(values));
}

/// Keeps rows whose gate is >= eps.
template <typename Scalar, typename GateScalar>
SparseFeatureTensor<Scalar> prune_rows(const SparseFeatureTensor<Scalar>& t,
                                       std::span<const GateScalar> gate, double eps) {
  if (static_cast<Index>(gate.size()) != t.rows()) throw InvariantError("gate length differs from row count");
  std::vector<Index> keep;
  keep.reserve(gate.size());
  for (Index i = 0; i < t.rows(); ++i)
    if (!(static_cast<double>(gate[i]) < eps)) keep.push_back(i);
  auto plan = plan_select(t.indices(), keep);
  plan.arity = t.arity();
  plan.node_count = t.node_count();
  const ValueTable<Scalar>* in[] = {&t.values()};
  auto values = apply_gather<Scalar>(plan, in);
  return SparseFeatureTensor<Scalar>::from_canonical(t.arity(), t.node_count(),
                                                     std::move(plan.indices), std::move(values));
}

// ---------------------------------------------------------------------------
// Dense bridge (test scale)
// ---------------------------------------------------------------------------

/// Fully materialized grounding: row k of `data` is the tuple with key k.
template <typename Scalar>
struct DenseGrounding {
  int arity = 0;
  Index node_count = 0;
  ValueTable<Scalar> data;
};

/// Largest N^r * D the dense bridge will allocate.
inline constexpr std::int64_t kDenseCapacity = std::int64_t{1} << 28;

template <typename Scalar>
DenseGrounding<Scalar> densify(const SparseFeatureTensor<Scalar>& t) {
  const RowKey count = tuple_count(t.arity(), t.node_count());
  if (static_cast<long double>(count) * std::max<Index>(t.channels(), 1) > kDenseCapacity)
    throw CapacityError("dense grounding too large");
  DenseGrounding<Scalar> d{t.arity(), t.node_count(),
                           ValueTable<Scalar>::Zero(static_cast<Index>(count), t.channels())};
  for (Index i = 0; i < t.rows(); ++i)
    d.data.row(static_cast<Index>(row_key(t.indices().row(i).data(), t.arity(), t.node_count()))) =
        t.values().row(i);
  return d;
}

/// Keeps every tuple whose value row is not entirely zero.
template <typename Scalar>
SparseFeatureTensor<Scalar> from_dense(const DenseGrounding<Scalar>& d) {
  std::vector<Index> keep;
  for (Index k = 0; k < d.data.rows(); ++k)
    if ((d.data.row(k).array() != Scalar(0)).any()) keep.push_back(k);
  IndexTable idx(static_cast<Index>(keep.size()), d.arity);
  ValueTable<Scalar> vals(static_cast<Index>(keep.size()), d.data.cols());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    decode_key(static_cast<RowKey>(keep[i]), d.arity, d.node_count, idx.row(i).data());
    vals.row(i) = d.data.row(keep[i]);
  }
  return SparseFeatureTensor<Scalar>::from_canonical(d.arity, d.node_count, std::move(idx),
                                                     std::move(vals));
}

// ---------------------------------------------------------------------------
// Debug text form: header "arity N M D", then M lines "i1 ... ir | v1 ... vD".
// ---------------------------------------------------------------------------

void write_text(std::ostream& os, const Tensor& t);
Tensor read_text(std::istream& is);

}  // namespace spaloc
