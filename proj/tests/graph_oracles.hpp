#pragma once

#include "spaloc/hypergraph.hpp"

#include <algorithm>
#include <random>
#include <vector>

namespace spaloc::testing {

inline bool member(const Hyperedge& e, Index v) { return std::find(e.nodes.begin(), e.nodes.end(), v) != e.nodes.end(); }

/// Node-edge walks v0 e1 v1 ... e_k starting at `from`; for a pair the last
/// edge must contain `to`. Plain recursion over the edge list.
inline Count dfs_walks(const Hypergraph& h, Index from, Index to, int k) {
  std::function<Count(Index, int)> rec = [&](Index v, int left) -> Count {
    Count c = 0;
    for (const auto& e : h.edges()) {
      if (!member(e, v)) continue;
      if (left == 1) {
        c += (to < 0 || member(e, to)) ? 1 : 0;
        continue;
      }
      std::vector<Index> seen;
      for (Index u : e.nodes) {
        if (std::find(seen.begin(), seen.end(), u) != seen.end()) continue;
        seen.push_back(u);
        c += rec(u, left - 1);
      }
    }
    return c;
  };
  return rec(from, k);
}

/// Every edge sequence of length 1..max_len, filtered by the hyperpath definition.
inline Count brute_hyperpaths(const Hypergraph& h, const std::vector<Index>& targets, int max_len) {
  const int m = h.edge_count();
  Count total = 0;
  std::vector<int> seq;
  std::function<void()> rec = [&]() {
    if (!seq.empty()) {
      bool ok = true;
      for (std::size_t i = 1; i < seq.size() && ok; ++i) {
        bool share = false;
        for (Index v : h.edges()[seq[i]].nodes) share = share || member(h.edges()[seq[i - 1]], v);
        ok = share;
      }
      for (Index t : targets) {
        bool covered = false;
        for (int e : seq) covered = covered || member(h.edges()[e], t);
        ok = ok && covered;
      }
      total += ok;
    }
    if (static_cast<int>(seq.size()) == max_len) return;
    for (int e = 0; e < m; ++e) {
      seq.push_back(e);
      rec();
      seq.pop_back();
    }
  };
  rec();
  return total;
}

inline Hypergraph random_hypergraph(std::mt19937_64& rng, int max_n = 8, int max_m = 12, int max_arity = 3) {
  const int n = std::uniform_int_distribution<int>(1, max_n)(rng);
  const int m = std::uniform_int_distribution<int>(0, max_m)(rng);
  std::uniform_int_distribution<int> node(0, n - 1);
  std::uniform_int_distribution<int> arity(1, max_arity);
  std::vector<Hyperedge> edges;
  for (int j = 0; j < m; ++j) {
    Hyperedge e;
    const int r = arity(rng);
    for (int k = 0; k < r; ++k) e.nodes.push_back(node(rng));
    e.relation = j % 3;
    edges.push_back(e);
  }
  return Hypergraph(n, edges);
}

}  // namespace spaloc::testing
