#pragma once

#include "spaloc/sparse_tensor.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace spaloc {

using Count = std::int64_t;
using CountMatrix = Eigen::Matrix<Count, Eigen::Dynamic, Eigen::Dynamic>;
using SparseCount = Eigen::SparseMatrix<Count, Eigen::RowMajor>;

struct Hyperedge {
  std::vector<Index> nodes;  // ordered tuple, arity >= 1
  int relation = 0;

  friend bool operator==(const Hyperedge&, const Hyperedge&) = default;
};

/// Immutable node set [0, n) plus a list of labelled hyperedges.
class Hypergraph {
 public:
  Hypergraph() = default;
  /// Throws InvariantError on out-of-range nodes or empty edges.
  Hypergraph(Index node_count, std::vector<Hyperedge> edges);

  Index node_count() const { return n_; }
  Index edge_count() const { return static_cast<Index>(edges_.size()); }
  const std::vector<Hyperedge>& edges() const { return edges_; }
  int max_arity() const;

  /// n x m, B(i, j) = 1 iff node i occurs in edge j (repeated nodes count once).
  SparseCount incidence() const;

  /// Edges containing each node, ascending, each edge listed once per node.
  const std::vector<std::vector<Index>>& node_edges() const { return node_edges_; }
  /// Binarised neighbourhood: nodes sharing an edge with v, excluding v, ascending.
  const std::vector<std::vector<Index>>& neighbors() const { return neighbors_; }

  /// Content hash (FNV-1a over n and the edge list).
  std::uint64_t hash() const;

 private:
  Index n_ = 0;
  std::vector<Hyperedge> edges_;
  std::vector<std::vector<Index>> node_edges_;
  std::vector<std::vector<Index>> neighbors_;
};

/// Result of inducing on a node subset: `nodes[s]` is the original id of
/// local node s, `local[v]` the local id of original node v or -1.
struct InducedSubgraph {
  Hypergraph graph;
  std::vector<Index> nodes;
  std::vector<Index> local;
};

/// Keeps every edge whose nodes all lie in `nodes`. Local ids follow the
/// order of `nodes` after sorting and deduplication.
InducedSubgraph induce_subgraph(const Hypergraph& h, std::span<const Index> nodes);

/// (B B^T)^(k-1) B. Throws std::invalid_argument for k < 1.
CountMatrix k_hop_incidence(const Hypergraph& h, int k);

/// k-hop paths incident to one node (sum_j B^(k)_ij) or connecting two nodes
/// (B^(k)_i . B_j). Throws std::invalid_argument for other target sizes.
Count count_paths(const Hypergraph& h, std::span<const Index> targets, int k);

/// Edge sequences (e_1..e_K), 1 <= K <= max_len, consecutive edges sharing a
/// node, whose union covers the targets. Throws CapacityError for max_len > 4.
Count enumerate_hyperpaths(const Hypergraph& h, std::span<const Index> targets, int max_len);

/// Paths of length 1..tau incident to the targets: matrix counts for one or
/// two targets, enumerate_hyperpaths beyond.
Count count_paths_upto(const Hypergraph& h, std::span<const Index> targets, int tau);

/// Precomputed length-<=tau path counts of one graph. For pairs it stores
/// sum_{k<=tau} A^k with A = B B^T; for single nodes the vector of
/// sum_{k<=tau} A^(k-1) deg. Larger targets are enumerated on demand.
class PathCounter {
 public:
  PathCounter() = default;
  PathCounter(const Hypergraph& h, int tau);

  int tau() const { return tau_; }
  std::uint64_t graph_hash() const { return hash_; }
  Count count(std::span<const Index> targets) const;

  /// Binary cache; load returns false if the file is missing or keyed differently.
  void save(const std::string& path) const;
  bool load(const std::string& path, std::uint64_t hash, int tau);

  /// Loads "<dir>/paths_<hash>_<tau>.bin" or computes and writes it.
  static PathCounter cached(const Hypergraph& h, int tau, const std::string& dir);

 private:
  const Hypergraph* graph_ = nullptr;  // used only for targets of size >= 3
  int tau_ = 0;
  std::uint64_t hash_ = 0;
  SparseCount pairs_;
  std::vector<Count> singles_;
};

struct ISQuery {
  std::vector<Index> targets;       // original node ids
  std::vector<Index> subgraph;      // original ids of the sampled nodes
  int tau = 1;
};

/// Ratio of length-<=tau paths for the targets in `sub` (induced from
/// `full` on q.subgraph) over those in `full`; 0/0 is 1. Throws
/// std::invalid_argument if a target lies outside the subgraph or tau < 1.
double information_sufficiency(const ISQuery& q, const Hypergraph& full, const Hypergraph& sub);

/// Same ratio with full-graph counts taken from a counter.
double information_sufficiency(std::span<const Index> sub_targets, const Hypergraph& sub,
                               Count full_count, int tau);

}  // namespace spaloc
