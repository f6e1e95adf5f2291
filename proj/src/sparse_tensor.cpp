#include "spaloc/sparse_tensor.hpp"

#include <array>
#include <iomanip>
#include <istream>
#include <limits>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>

namespace spaloc {

void check_key_capacity(int arity, Index node_count) {
  if (arity < 0 || arity > kMaxArity) throw CapacityError("arity out of range");
  long double total = 1;
  for (int k = 0; k < arity; ++k) total *= static_cast<long double>(node_count);
  if (total > static_cast<long double>(std::numeric_limits<std::int64_t>::max()))
    throw CapacityError("N^arity exceeds 64-bit row keys");
}

RowKey tuple_count(int arity, Index node_count) {
  check_key_capacity(arity, node_count);
  RowKey c = 1;
  for (int k = 0; k < arity; ++k) c *= static_cast<RowKey>(node_count);
  return c;
}

RowKey row_key(const Index* row, int arity, Index node_count) {
  RowKey key = 0;
  for (int k = 0; k < arity; ++k) key = key * static_cast<RowKey>(node_count) + static_cast<RowKey>(row[k]);
  return key;
}

void decode_key(RowKey key, int arity, Index node_count, Index* row) {
  for (int k = arity - 1; k >= 0; --k) {
    row[k] = static_cast<Index>(key % static_cast<RowKey>(node_count));
    key /= static_cast<RowKey>(node_count);
  }
}

std::vector<RowKey> row_keys(const IndexTable& indices, Index node_count) {
  const int arity = static_cast<int>(indices.cols());
  std::vector<RowKey> keys(static_cast<std::size_t>(indices.rows()));
  for (Index i = 0; i < indices.rows(); ++i) keys[i] = row_key(indices.row(i).data(), arity, node_count);
  return keys;
}

const std::vector<std::vector<int>>& permutations(int arity) {
  static std::array<std::vector<std::vector<int>>, kMaxArity + 1> table;
  static std::once_flag once;
  std::call_once(once, [] {
    for (int r = 0; r <= kMaxArity; ++r) {
      std::vector<int> p(r);
      std::iota(p.begin(), p.end(), 0);
      do table[r].push_back(p);
      while (std::next_permutation(p.begin(), p.end()));
    }
  });
  if (arity < 0 || arity > kMaxArity) throw InvariantError("arity out of range");
  return table[arity];
}

Index factorial(int n) {
  Index f = 1;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}

namespace {

IndexTable decode_keys(const std::vector<RowKey>& keys, int arity, Index node_count) {
  IndexTable out(static_cast<Index>(keys.size()), arity);
  for (std::size_t i = 0; i < keys.size(); ++i) decode_key(keys[i], arity, node_count, out.row(i).data());
  return out;
}

bool is_complete(Index rows, int arity, Index node_count) {
  return static_cast<RowKey>(rows) == tuple_count(arity, node_count);
}

Index find_key(const std::vector<RowKey>& keys, RowKey key) {
  auto it = std::lower_bound(keys.begin(), keys.end(), key);
  if (it == keys.end() || *it != key) return -1;
  return static_cast<Index>(it - keys.begin());
}

}  // namespace

GatherPlan plan_expand(const IndexTable& in, int arity, Index node_count) {
  check_key_capacity(arity + 1, node_count);
  const Index m = static_cast<Index>(in.rows());
  if (static_cast<std::int64_t>(m) * node_count > kRowCapacity)
    throw CapacityError("expand: " + std::to_string(static_cast<std::int64_t>(m) * node_count) +
                        " rows exceed the row capacity");
  const Index rows = m * node_count;
  GatherPlan plan;
  plan.arity = arity + 1;
  plan.node_count = node_count;
  plan.indices.resize(rows, arity + 1);
  plan.blocks.push_back({0, std::vector<Index>(static_cast<std::size_t>(rows))});
  auto& src = plan.blocks[0].source;
  Index out = 0;
  for (Index i = 0; i < m; ++i) {
    for (Index o = 0; o < node_count; ++o, ++out) {
      for (int k = 0; k < arity; ++k) plan.indices(out, k) = in(i, k);
      plan.indices(out, arity) = o;
      src[out] = i;
    }
  }
  return plan;
}

SegmentPlan plan_reduce(const IndexTable& in, int arity, Index node_count) {
  if (arity < 1) throw InvariantError("reduce needs arity >= 1");
  SegmentPlan plan;
  plan.arity = arity - 1;
  plan.node_count = node_count;
  const Index m = static_cast<Index>(in.rows());
  std::vector<Index> starts;
  for (Index i = 0; i < m; ++i) {
    bool same = i > 0;
    for (int k = 0; same && k < arity - 1; ++k) same = in(i, k) == in(i - 1, k);
    if (!same) starts.push_back(i);
  }
  plan.indices.resize(static_cast<Index>(starts.size()), arity - 1);
  for (std::size_t s = 0; s < starts.size(); ++s)
    for (int k = 0; k < arity - 1; ++k) plan.indices(s, k) = in(starts[s], k);
  plan.offsets = std::move(starts);
  plan.offsets.push_back(m);
  return plan;
}

GatherPlan plan_permute(const IndexTable& in, int arity, Index node_count) {
  const auto& perms = permutations(arity);
  const Index m = static_cast<Index>(in.rows());
  GatherPlan plan;
  plan.arity = arity;
  plan.node_count = node_count;
  std::array<Index, kMaxArity> row{};
  std::array<Index, kMaxArity> permuted{};

  if (arity <= 1) {
    plan.indices = in;
    plan.blocks.push_back({0, std::vector<Index>(static_cast<std::size_t>(m))});
    std::iota(plan.blocks[0].source.begin(), plan.blocks[0].source.end(), 0);
    return plan;
  }

  if (is_complete(m, arity, node_count)) {
    // Row i carries key i, so a permuted tuple's row is its key.
    plan.indices = in;
    for (const auto& p : perms) {
      GatherBlock b{0, std::vector<Index>(static_cast<std::size_t>(m))};
      for (Index i = 0; i < m; ++i) {
        for (int k = 0; k < arity; ++k) permuted[k] = in(i, p[k]);
        b.source[i] = static_cast<Index>(row_key(permuted.data(), arity, node_count));
      }
      plan.blocks.push_back(std::move(b));
    }
    return plan;
  }

  const auto keys = row_keys(in, node_count);
  std::vector<RowKey> out_keys;
  out_keys.reserve(static_cast<std::size_t>(m) * perms.size());
  for (Index i = 0; i < m; ++i) {
    for (const auto& p : perms) {
      for (int k = 0; k < arity; ++k) permuted[k] = in(i, p[k]);
      out_keys.push_back(row_key(permuted.data(), arity, node_count));
    }
  }
  std::sort(out_keys.begin(), out_keys.end());
  out_keys.erase(std::unique(out_keys.begin(), out_keys.end()), out_keys.end());
  out_keys.shrink_to_fit();

  const Index rows = static_cast<Index>(out_keys.size());
  plan.indices = decode_keys(out_keys, arity, node_count);
  for (const auto& p : perms) {
    GatherBlock b{0, std::vector<Index>(static_cast<std::size_t>(rows))};
    for (Index i = 0; i < rows; ++i) {
      for (int k = 0; k < arity; ++k) row[k] = plan.indices(i, k);
      for (int k = 0; k < arity; ++k) permuted[k] = row[p[k]];
      b.source[i] = find_key(keys, row_key(permuted.data(), arity, node_count));
    }
    plan.blocks.push_back(std::move(b));
  }
  return plan;
}

GatherPlan plan_concat(std::span<const IndexTable* const> ins, int arity, Index node_count) {
  GatherPlan plan;
  plan.arity = arity;
  plan.node_count = node_count;
  std::vector<std::vector<RowKey>> keys;
  keys.reserve(ins.size());
  std::vector<RowKey> merged;
  bool complete_found = false;
  for (const IndexTable* t : ins) {
    keys.push_back(row_keys(*t, node_count));
    if (!complete_found && is_complete(static_cast<Index>(t->rows()), arity, node_count)) {
      complete_found = true;
      merged = keys.back();
    }
  }
  if (!complete_found) {
    for (const auto& k : keys) {
      std::vector<RowKey> next;
      next.reserve(merged.size() + k.size());
      std::set_union(merged.begin(), merged.end(), k.begin(), k.end(), std::back_inserter(next));
      merged.swap(next);
    }
  }
  const Index rows = static_cast<Index>(merged.size());
  plan.indices = decode_keys(merged, arity, node_count);
  for (std::size_t b = 0; b < ins.size(); ++b) {
    GatherBlock block{static_cast<int>(b), std::vector<Index>(static_cast<std::size_t>(rows), -1)};
    const auto& k = keys[b];
    std::size_t j = 0;
    for (Index i = 0; i < rows && j < k.size(); ++i) {
      if (merged[i] == k[j]) block.source[i] = static_cast<Index>(j++);
    }
    plan.blocks.push_back(std::move(block));
  }
  return plan;
}

GatherPlan plan_select(const IndexTable& in, std::span<const Index> keep) {
  GatherPlan plan;
  plan.arity = static_cast<int>(in.cols());
  plan.indices.resize(static_cast<Index>(keep.size()), in.cols());
  plan.blocks.push_back({0, std::vector<Index>(keep.begin(), keep.end())});
  for (std::size_t i = 0; i < keep.size(); ++i) plan.indices.row(i) = in.row(keep[i]);
  return plan;
}

void write_text(std::ostream& os, const Tensor& t) {
  os << t.arity() << ' ' << t.node_count() << ' ' << t.rows() << ' ' << t.channels() << '\n';
  const auto old = os.precision(std::numeric_limits<float>::max_digits10);
  for (Index i = 0; i < t.rows(); ++i) {
    for (int k = 0; k < t.arity(); ++k) os << t.indices()(i, k) << ' ';
    os << '|';
    for (Index c = 0; c < t.channels(); ++c) os << ' ' << t.values()(i, c);
    os << '\n';
  }
  os.precision(old);
}

Tensor read_text(std::istream& is) {
  int arity = 0;
  Index n = 0, m = 0, d = 0;
  if (!(is >> arity >> n >> m >> d)) throw InvariantError("malformed tensor header");
  IndexTable idx(m, arity);
  ValueTable<float> vals(m, d);
  for (Index i = 0; i < m; ++i) {
    for (int k = 0; k < arity; ++k)
      if (!(is >> idx(i, k))) throw InvariantError("malformed tensor index row");
    std::string bar;
    if (!(is >> bar) || bar != "|") throw InvariantError("missing '|' separator");
    for (Index c = 0; c < d; ++c)
      if (!(is >> vals(i, c))) throw InvariantError("malformed tensor value row");
  }
  return Tensor::from_rows(arity, n, std::move(idx), std::move(vals));
}

}  // namespace spaloc
