#include "spaloc/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iomanip>
#include <memory>
#include <ostream>
#include <stdexcept>

namespace spaloc {

SamplerKind parse_sampler(const std::string& name) {
  if (name == "node") return SamplerKind::Node;
  if (name == "walk") return SamplerKind::Walk;
  if (name == "neighbor") return SamplerKind::Neighbor;
  throw std::invalid_argument("unknown sampler '" + name + "' (node, walk, neighbor)");
}

const char* sampler_name(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::Node: return "node";
    case SamplerKind::Walk: return "walk";
    case SamplerKind::Neighbor: return "neighbor";
  }
  return "?";
}

namespace {

Index uniform(Index n, std::mt19937_64& rng) { return std::uniform_int_distribution<Index>(0, n - 1)(rng); }

// A uniform node outside `taken`; rejection first, then a scan once the set is dense.
Index fresh_node(Index n, const std::vector<char>& taken, std::mt19937_64& rng) {
  for (int tries = 0; tries < 32; ++tries) {
    const Index v = uniform(n, rng);
    if (!taken[v]) return v;
  }
  std::vector<Index> free;
  for (Index v = 0; v < n; ++v)
    if (!taken[v]) free.push_back(v);
  return free[uniform(static_cast<Index>(free.size()), rng)];
}

std::vector<Index> sorted(std::vector<Index> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

std::vector<Index> node_sampler(const Hypergraph& h, Index ns, std::mt19937_64& rng) {
  const Index n = h.node_count();
  ns = std::min(ns, n);
  std::vector<char> taken(n, 0);
  std::vector<Index> out;
  while (static_cast<Index>(out.size()) < ns) {
    const Index v = fresh_node(n, taken, rng);
    taken[v] = 1;
    out.push_back(v);
  }
  return sorted(out);
}

std::vector<Index> walk_sampler(const Hypergraph& h, Index ns, std::mt19937_64& rng) {
  const Index n = h.node_count();
  ns = std::min(ns, n);
  std::vector<char> taken(n, 0);
  std::vector<Index> out;
  if (ns == 0) return out;
  Index cur = uniform(n, rng);
  taken[cur] = 1;
  out.push_back(cur);
  int stall = 0;
  while (static_cast<Index>(out.size()) < ns) {
    const auto& nb = h.neighbors()[cur];
    if (nb.empty() || stall >= kStallSteps) {
      cur = fresh_node(n, taken, rng);
      stall = 0;
    } else {
      cur = nb[uniform(static_cast<Index>(nb.size()), rng)];
      ++stall;
    }
    if (!taken[cur]) {
      taken[cur] = 1;
      out.push_back(cur);
      stall = 0;
    }
  }
  return sorted(out);
}

std::vector<Index> neighbor_expansion_sampler(const Hypergraph& h, Index ns, std::mt19937_64& rng) {
  const Index n = h.node_count();
  ns = std::min(ns, n);
  std::vector<char> taken(n, 0);
  std::vector<char> in_frontier(n, 0);
  std::vector<Index> frontier;
  std::vector<Index> out;
  auto add = [&](Index v) {
    taken[v] = 1;
    out.push_back(v);
    for (Index u : h.neighbors()[v])
      if (!taken[u] && !in_frontier[u]) {
        in_frontier[u] = 1;
        frontier.push_back(u);
      }
  };
  const Index seeds = std::min<Index>(ns, std::max<Index>(1, (ns + 9) / 10));
  while (static_cast<Index>(out.size()) < seeds) add(fresh_node(n, taken, rng));
  while (static_cast<Index>(out.size()) < ns) {
    // drop entries that were taken as seeds after entering the frontier
    frontier.erase(std::remove_if(frontier.begin(), frontier.end(), [&](Index v) { return taken[v] != 0; }),
                   frontier.end());
    if (frontier.empty()) {
      add(fresh_node(n, taken, rng));
      continue;
    }
    const Index pick = uniform(static_cast<Index>(frontier.size()), rng);
    const Index v = frontier[pick];
    frontier[pick] = frontier.back();
    frontier.pop_back();
    in_frontier[v] = 0;
    add(v);
  }
  return sorted(out);
}

std::vector<Index> sample_nodes(SamplerKind kind, const Hypergraph& h, Index ns, std::mt19937_64& rng) {
  switch (kind) {
    case SamplerKind::Node: return node_sampler(h, ns, rng);
    case SamplerKind::Walk: return walk_sampler(h, ns, rng);
    case SamplerKind::Neighbor: return neighbor_expansion_sampler(h, ns, rng);
  }
  throw std::invalid_argument("unknown sampler");
}

namespace {

// BFS distances from `src`, truncated at `limit` (others stay -1).
std::vector<int> bfs(const Hypergraph& h, Index src, int limit, std::vector<Index>& reached) {
  std::vector<int> dist(h.node_count(), -1);
  std::deque<Index> q = {src};
  dist[src] = 0;
  reached = {src};
  while (!q.empty()) {
    const Index v = q.front();
    q.pop_front();
    if (dist[v] == limit) continue;
    for (Index u : h.neighbors()[v])
      if (dist[u] < 0) {
        dist[u] = dist[v] + 1;
        reached.push_back(u);
        q.push_back(u);
      }
  }
  return dist;
}

}  // namespace

std::vector<Index> path_sampler(const Hypergraph& h, Index y1, Index y2, int tau, int budget,
                                std::mt19937_64& rng) {
  if (y1 < 0 || y1 >= h.node_count() || y2 < 0 || y2 >= h.node_count())
    throw std::invalid_argument("path_sampler: target outside the graph");
  if (y1 == y2) return {y1};
  std::vector<Index> ball1, ball2;
  const auto d1 = bfs(h, y1, tau, ball1);
  const auto d2 = bfs(h, y2, tau, ball2);
  std::vector<Index> out = {y1, y2};
  if (d1[y2] < 0) return sorted(out);
  // nodes on some connecting walk of <= tau hops
  std::vector<Index> on_walk;
  for (Index v : ball1)
    if (d2[v] >= 0 && d1[v] + d2[v] <= tau) on_walk.push_back(v);
  if (budget < 0) {
    out.insert(out.end(), on_walk.begin(), on_walk.end());
    out = sorted(out);
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
  // walks[l][v]: walks of exactly l hops from v to y2 inside the walk region
  std::vector<Index> local(h.node_count(), -1);
  for (std::size_t i = 0; i < on_walk.size(); ++i) local[on_walk[i]] = static_cast<Index>(i);
  const auto m = on_walk.size();
  std::vector<std::vector<double>> walks(tau + 1, std::vector<double>(m, 0.0));
  walks[0][local[y2]] = 1;
  for (int l = 1; l <= tau; ++l)
    for (std::size_t i = 0; i < m; ++i)
      for (Index u : h.neighbors()[on_walk[i]])
        if (local[u] >= 0) walks[l][i] += walks[l - 1][local[u]];
  std::vector<double> by_length(tau + 1, 0.0);
  for (int l = 1; l <= tau; ++l) by_length[l] = walks[l][local[y1]];
  std::discrete_distribution<int> pick_length(by_length.begin(), by_length.end());
  std::vector<char> taken(h.node_count(), 0);
  taken[y1] = taken[y2] = 1;
  for (int b = 0; b < budget; ++b) {
    int l = pick_length(rng);
    Index v = y1;
    while (l > 0) {
      std::vector<Index> next;
      std::vector<double> weight;
      for (Index u : h.neighbors()[v])
        if (local[u] >= 0 && walks[l - 1][local[u]] > 0) {
          next.push_back(u);
          weight.push_back(walks[l - 1][local[u]]);
        }
      v = next[std::discrete_distribution<std::size_t>(weight.begin(), weight.end())(rng)];
      --l;
      if (!taken[v]) {
        taken[v] = 1;
        out.push_back(v);
      }
    }
  }
  return sorted(out);
}

LabelMode parse_label_mode(const std::string& name) {
  if (name == "NC" || name == "nc") return LabelMode::NC;
  if (name == "LS" || name == "ls") return LabelMode::LS;
  if (name == "IS" || name == "is") return LabelMode::IS;
  throw std::invalid_argument("unknown label mode '" + name + "' (NC, LS, IS)");
}

const char* label_mode_name(LabelMode mode) {
  switch (mode) {
    case LabelMode::NC: return "NC";
    case LabelMode::LS: return "LS";
    case LabelMode::IS: return "IS";
  }
  return "?";
}

SubgraphSample restrict_labels(InducedSubgraph sub, int arity, const std::vector<std::vector<Index>>& full_positives) {
  SubgraphSample s;
  s.arity = arity;
  for (const auto& t : full_positives) {
    std::vector<Index> local;
    for (Index v : t) {
      if (v < 0 || v >= static_cast<Index>(sub.local.size()) || sub.local[v] < 0) break;
      local.push_back(sub.local[v]);
    }
    if (static_cast<int>(local.size()) != arity) continue;
    s.tuples.push_back(std::move(local));
  }
  std::sort(s.tuples.begin(), s.tuples.end());
  s.raw.assign(s.tuples.size(), 1.0f);
  s.is.assign(s.tuples.size(), 1.0f);
  s.adjusted = s.raw;
  s.sub = std::move(sub);
  return s;
}

void adjust_labels(SubgraphSample& sample, const PathCounter& full, int tau, LabelMode mode, double alpha) {
  const auto n = sample.tuples.size();
  sample.is.assign(n, 1.0f);
  sample.adjusted.resize(n);
  std::unique_ptr<PathCounter> sub_counter;
  if (mode == LabelMode::IS && sample.arity <= 2) sub_counter = std::make_unique<PathCounter>(sample.sub.graph, tau);
  std::vector<Index> original;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = sample.tuples[i];
    if (mode == LabelMode::IS && sample.raw[i] > 0) {
      original.clear();
      for (Index v : t) original.push_back(sample.sub.nodes[v]);
      const Count total = full.count(original);
      const Count kept = sub_counter ? sub_counter->count(t) : count_paths_upto(sample.sub.graph, t, tau);
      sample.is[i] = total == 0 ? 1.0f : static_cast<float>(std::min(1.0, static_cast<double>(kept) / total));
    }
    switch (mode) {
      case LabelMode::NC: sample.adjusted[i] = sample.raw[i]; break;
      case LabelMode::LS: sample.adjusted[i] = static_cast<float>(alpha) * sample.raw[i]; break;
      case LabelMode::IS: sample.adjusted[i] = sample.raw[i] * sample.is[i]; break;
    }
  }
}

double mean_information_sufficiency(const InducedSubgraph& sample, const PathCounter& full, int tau) {
  const Index m = sample.graph.node_count();
  PathCounter sub(sample.graph, tau);
  double sum = 0;
  long count = 0;
  for (Index u = 0; u < m; ++u)
    for (Index v = u + 1; v < m; ++v) {
      const Index orig[] = {sample.nodes[u], sample.nodes[v]};
      const Count total = full.count(orig);
      if (total == 0) continue;
      const Index loc[] = {u, v};
      sum += std::min(1.0, static_cast<double>(sub.count(loc)) / static_cast<double>(total));
      ++count;
    }
  return count == 0 ? 100.0 : 100.0 * sum / static_cast<double>(count);
}

void write_sampler_stats(std::ostream& os, const std::vector<SamplerStat>& rows) {
  os << "sampler,N,N_s,seed,mis_percent\n";
  for (const auto& r : rows)
    os << r.sampler << ',' << r.n << ',' << r.ns << ',' << r.seed << ',' << std::fixed << std::setprecision(4)
       << r.mis_percent << std::defaultfloat << '\n';
}

}  // namespace spaloc
