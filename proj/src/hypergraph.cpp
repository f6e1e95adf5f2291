#include "spaloc/hypergraph.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace spaloc {

Hypergraph::Hypergraph(Index node_count, std::vector<Hyperedge> edges)
    : n_(node_count), edges_(std::move(edges)) {
  if (n_ < 0) throw InvariantError("negative node count");
  node_edges_.assign(n_, {});
  neighbors_.assign(n_, {});
  for (Index j = 0; j < edge_count(); ++j) {
    const auto& e = edges_[j];
    if (e.nodes.empty()) throw InvariantError("hyperedge with no nodes");
    for (Index v : e.nodes)
      if (v < 0 || v >= n_) throw InvariantError("hyperedge node out of range");
    std::vector<Index> distinct = e.nodes;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    for (Index v : distinct) {
      node_edges_[v].push_back(j);
      for (Index u : distinct)
        if (u != v) neighbors_[v].push_back(u);
    }
  }
  for (auto& nb : neighbors_) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
}

int Hypergraph::max_arity() const {
  int r = 0;
  for (const auto& e : edges_) r = std::max(r, static_cast<int>(e.nodes.size()));
  return r;
}

SparseCount Hypergraph::incidence() const {
  std::vector<Eigen::Triplet<Count>> trips;
  for (Index v = 0; v < n_; ++v)
    for (Index j : node_edges_[v]) trips.emplace_back(v, j, 1);
  SparseCount b(n_, edge_count());
  b.setFromTriplets(trips.begin(), trips.end());
  return b;
}

std::uint64_t Hypergraph::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](std::uint64_t x) {
    for (int b = 0; b < 8; ++b) {
      h ^= (x >> (8 * b)) & 0xff;
      h *= 1099511628211ull;
    }
  };
  mix(static_cast<std::uint64_t>(n_));
  for (const auto& e : edges_) {
    mix(e.nodes.size());
    for (Index v : e.nodes) mix(static_cast<std::uint64_t>(v));
    mix(static_cast<std::uint64_t>(e.relation));
  }
  return h;
}

InducedSubgraph induce_subgraph(const Hypergraph& h, std::span<const Index> nodes) {
  InducedSubgraph s;
  s.nodes.assign(nodes.begin(), nodes.end());
  std::sort(s.nodes.begin(), s.nodes.end());
  s.nodes.erase(std::unique(s.nodes.begin(), s.nodes.end()), s.nodes.end());
  s.local.assign(h.node_count(), -1);
  for (std::size_t i = 0; i < s.nodes.size(); ++i) {
    if (s.nodes[i] < 0 || s.nodes[i] >= h.node_count()) throw InvariantError("induce: node out of range");
    s.local[s.nodes[i]] = static_cast<Index>(i);
  }
  // every kept edge touches a kept node; scan those nodes' edges once
  std::vector<Index> candidates;
  for (Index v : s.nodes) candidates.insert(candidates.end(), h.node_edges()[v].begin(), h.node_edges()[v].end());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  std::vector<Hyperedge> kept;
  for (Index j : candidates) {
    const auto& e = h.edges()[j];
    Hyperedge le{{}, e.relation};
    bool inside = true;
    for (Index v : e.nodes) {
      if (s.local[v] < 0) {
        inside = false;
        break;
      }
      le.nodes.push_back(s.local[v]);
    }
    if (inside) kept.push_back(std::move(le));
  }
  s.graph = Hypergraph(static_cast<Index>(s.nodes.size()), std::move(kept));
  return s;
}

namespace {

SparseCount gram(const Hypergraph& h) {
  const SparseCount b = h.incidence();
  SparseCount a = b * SparseCount(b.transpose());
  return a;
}

std::vector<Count> degrees(const Hypergraph& h) {
  std::vector<Count> d(h.node_count());
  for (Index v = 0; v < h.node_count(); ++v) d[v] = static_cast<Count>(h.node_edges()[v].size());
  return d;
}

std::vector<Count> sparse_times(const SparseCount& a, const std::vector<Count>& x) {
  std::vector<Count> y(a.rows(), 0);
  for (Index i = 0; i < a.outerSize(); ++i)
    for (SparseCount::InnerIterator it(a, i); it; ++it) y[i] += it.value() * x[it.col()];
  return y;
}

void check_targets(const Hypergraph& h, std::span<const Index> targets) {
  for (Index v : targets)
    if (v < 0 || v >= h.node_count()) throw std::invalid_argument("target node out of range");
}

}  // namespace

CountMatrix k_hop_incidence(const Hypergraph& h, int k) {
  if (k < 1) throw std::invalid_argument("k_hop_incidence needs k >= 1");
  const SparseCount a = gram(h);
  SparseCount bk = h.incidence();
  for (int step = 1; step < k; ++step) bk = (a * bk).pruned();
  return CountMatrix(bk);
}

Count count_paths(const Hypergraph& h, std::span<const Index> targets, int k) {
  if (k < 1) throw std::invalid_argument("count_paths needs k >= 1");
  check_targets(h, targets);
  if (targets.size() == 1) {
    // sum_j B^(k)_ij = (A^(k-1) deg)_i
    const SparseCount a = gram(h);
    auto x = degrees(h);
    for (int step = 1; step < k; ++step) x = sparse_times(a, x);
    return x[targets[0]];
  }
  if (targets.size() == 2) {
    // B^(k)_i . B_j = (A^k)_ij; propagate the indicator of j
    const SparseCount a = gram(h);
    std::vector<Count> x(h.node_count(), 0);
    x[targets[1]] = 1;
    for (int step = 0; step < k; ++step) x = sparse_times(a, x);
    return x[targets[0]];
  }
  throw std::invalid_argument("count_paths handles one or two targets; use enumerate_hyperpaths");
}

Count enumerate_hyperpaths(const Hypergraph& h, std::span<const Index> targets, int max_len) {
  if (max_len > 4) throw CapacityError("enumerate_hyperpaths limited to max_len <= 4");
  if (max_len < 1 || targets.empty()) return 0;
  check_targets(h, targets);
  std::vector<Index> t(targets.begin(), targets.end());
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  if (t.size() > 16) throw CapacityError("too many targets");
  const unsigned full = (1u << t.size()) - 1;

  auto cover = [&](Index e) {
    unsigned m = 0;
    for (Index v : h.edges()[e].nodes) {
      auto it = std::lower_bound(t.begin(), t.end(), v);
      if (it != t.end() && *it == v) m |= 1u << (it - t.begin());
    }
    return m;
  };
  auto adjacent = [&](Index e) {
    std::vector<Index> out;
    for (Index v : h.edges()[e].nodes) out.insert(out.end(), h.node_edges()[v].begin(), h.node_edges()[v].end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  };

  // Some edge of the sequence holds t[0], and consecutive edges are
  // adjacent, so e_1 lies within max_len - 1 edge hops of t[0]'s edges.
  std::vector<char> seen(h.edge_count(), 0);
  std::vector<Index> frontier = h.node_edges()[t[0]];
  std::vector<Index> starts;
  for (Index e : frontier) seen[e] = 1;
  starts = frontier;
  for (int hop = 1; hop < max_len; ++hop) {
    std::vector<Index> next;
    for (Index e : frontier)
      for (Index f : adjacent(e))
        if (!seen[f]) {
          seen[f] = 1;
          next.push_back(f);
        }
    starts.insert(starts.end(), next.begin(), next.end());
    frontier = std::move(next);
  }

  Count total = 0;
  std::vector<std::vector<Index>> adj_cache(h.edge_count());
  std::vector<char> adj_ready(h.edge_count(), 0);
  auto dfs = [&](auto&& self, Index e, int len, unsigned mask) -> void {
    mask |= cover(e);
    if (mask == full) ++total;
    if (len == max_len) return;
    if (!adj_ready[e]) {
      adj_cache[e] = adjacent(e);
      adj_ready[e] = 1;
    }
    for (Index f : adj_cache[e]) self(self, f, len + 1, mask);
  };
  for (Index e : starts) dfs(dfs, e, 1, 0u);
  return total;
}

Count count_paths_upto(const Hypergraph& h, std::span<const Index> targets, int tau) {
  if (tau < 1) throw std::invalid_argument("tau must be >= 1");
  if (targets.size() >= 3) return enumerate_hyperpaths(h, targets, tau);
  Count total = 0;
  for (int k = 1; k <= tau; ++k) total += count_paths(h, targets, k);
  return total;
}

PathCounter::PathCounter(const Hypergraph& h, int tau) : graph_(&h), tau_(tau), hash_(h.hash()) {
  if (tau < 1) throw std::invalid_argument("tau must be >= 1");
  const SparseCount a = gram(h);
  SparseCount power = a;
  pairs_ = a;
  for (int k = 2; k <= tau; ++k) {
    power = (power * a).pruned();
    pairs_ += power;
  }
  auto x = degrees(h);
  singles_ = x;
  for (int k = 2; k <= tau; ++k) {
    x = sparse_times(a, x);
    for (std::size_t i = 0; i < x.size(); ++i) singles_[i] += x[i];
  }
}

Count PathCounter::count(std::span<const Index> targets) const {
  if (targets.size() == 1) return singles_.at(targets[0]);
  if (targets.size() == 2) return pairs_.coeff(targets[0], targets[1]);
  if (!graph_) throw std::logic_error("path counter loaded from cache cannot enumerate large targets");
  return enumerate_hyperpaths(*graph_, targets, tau_);
}

namespace {
constexpr char kCacheMagic[8] = {'S', 'P', 'P', 'A', 'T', 'H', '1', '\0'};
}

void PathCounter::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write path cache " + path);
  os.write(kCacheMagic, 8);
  auto put = [&](auto v) { os.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
  put(hash_);
  put(static_cast<std::int32_t>(tau_));
  put(static_cast<std::int64_t>(singles_.size()));
  for (Count c : singles_) put(c);
  put(static_cast<std::int64_t>(pairs_.nonZeros()));
  for (Index i = 0; i < pairs_.outerSize(); ++i)
    for (SparseCount::InnerIterator it(pairs_, i); it; ++it) {
      put(static_cast<std::int32_t>(it.row()));
      put(static_cast<std::int32_t>(it.col()));
      put(it.value());
    }
}

bool PathCounter::load(const std::string& path, std::uint64_t hash, int tau) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return false;
  char magic[8];
  if (!is.read(magic, 8) || !std::equal(magic, magic + 8, kCacheMagic)) return false;
  auto get = [&](auto& v) {
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(v))) throw std::runtime_error("truncated path cache " + path);
  };
  std::uint64_t h = 0;
  std::int32_t t = 0;
  get(h);
  get(t);
  if (h != hash || t != tau) return false;
  std::int64_t n = 0;
  get(n);
  singles_.resize(n);
  for (auto& c : singles_) get(c);
  std::int64_t nnz = 0;
  get(nnz);
  std::vector<Eigen::Triplet<Count>> trips;
  trips.reserve(nnz);
  for (std::int64_t k = 0; k < nnz; ++k) {
    std::int32_t i = 0, j = 0;
    Count v = 0;
    get(i);
    get(j);
    get(v);
    trips.emplace_back(i, j, v);
  }
  pairs_ = SparseCount(n, n);
  pairs_.setFromTriplets(trips.begin(), trips.end());
  hash_ = h;
  tau_ = t;
  graph_ = nullptr;
  return true;
}

PathCounter PathCounter::cached(const Hypergraph& h, int tau, const std::string& dir) {
  std::ostringstream name;
  name << "paths_" << std::hex << h.hash() << std::dec << '_' << tau << ".bin";
  const auto path = (std::filesystem::path(dir) / name.str()).string();
  PathCounter pc;
  if (pc.load(path, h.hash(), tau)) {
    pc.graph_ = &h;
    return pc;
  }
  pc = PathCounter(h, tau);
  std::filesystem::create_directories(dir);
  // write to a temporary name and rename so concurrent writers never expose partial files
  const auto tmp = path + ".tmp";
  pc.save(tmp);
  std::filesystem::rename(tmp, path);
  return pc;
}

double information_sufficiency(std::span<const Index> sub_targets, const Hypergraph& sub, Count full_count,
                               int tau) {
  const Count kept = count_paths_upto(sub, sub_targets, tau);
  if (full_count == 0) return 1.0;  // 0/0, an induced subgraph cannot have more paths
  return std::min(1.0, static_cast<double>(kept) / static_cast<double>(full_count));
}

double information_sufficiency(const ISQuery& q, const Hypergraph& full, const Hypergraph& sub) {
  if (q.tau < 1) throw std::invalid_argument("tau must be >= 1");
  std::vector<Index> nodes = q.subgraph;
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  if (static_cast<Index>(nodes.size()) != sub.node_count())
    throw std::invalid_argument("subgraph node list does not match the induced graph");
  std::vector<Index> local;
  for (Index v : q.targets) {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), v);
    if (it == nodes.end() || *it != v) throw std::invalid_argument("target outside the subgraph");
    local.push_back(static_cast<Index>(it - nodes.begin()));
  }
  return information_sufficiency(local, sub, count_paths_upto(full, q.targets, q.tau), q.tau);
}

}  // namespace spaloc
