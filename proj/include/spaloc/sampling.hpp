#pragma once

#include "spaloc/hypergraph.hpp"

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

namespace spaloc {

enum class SamplerKind { Node, Walk, Neighbor };

SamplerKind parse_sampler(const std::string& name);
const char* sampler_name(SamplerKind kind);

/// Uniform without replacement; returns min(ns, n) nodes, ascending.
std::vector<Index> node_sampler(const Hypergraph& h, Index ns, std::mt19937_64& rng);

/// Random walk over the binarised graph from a uniform start, collecting
/// distinct nodes; teleports to a uniform node on a dead end or after
/// `kStallSteps` steps without a new node (a fully visited component).
std::vector<Index> walk_sampler(const Hypergraph& h, Index ns, std::mt19937_64& rng);

/// max(1, ceil(ns/10)) uniform seeds, then repeatedly a uniform pick among
/// the distinct neighbours of the current set; a fresh uniform seed when the
/// frontier is empty.
std::vector<Index> neighbor_expansion_sampler(const Hypergraph& h, Index ns, std::mt19937_64& rng);

std::vector<Index> sample_nodes(SamplerKind kind, const Hypergraph& h, Index ns, std::mt19937_64& rng);

inline constexpr int kStallSteps = 64;

/// Nodes of up to `budget` walks y1 -> y2 with at most tau hops, drawn
/// uniformly among all such walks, plus {y1, y2}. budget < 0 returns every
/// node on some connecting walk (dist(y1, v) + dist(v, y2) <= tau).
std::vector<Index> path_sampler(const Hypergraph& h, Index y1, Index y2, int tau, int budget,
                                std::mt19937_64& rng);

enum class LabelMode { NC, LS, IS };
LabelMode parse_label_mode(const std::string& name);
const char* label_mode_name(LabelMode mode);

/// Supervision for one sampled subgraph. Tuples are in local ids of `sub`;
/// only raw positives are listed, every other tuple is a negative with label 0.
struct SubgraphSample {
  InducedSubgraph sub;
  int arity = 0;
  std::vector<std::vector<Index>> tuples;
  std::vector<float> raw;
  std::vector<float> is;
  std::vector<float> adjusted;
};

/// Positives of the full graph (original ids) whose nodes all lie in the
/// subgraph, translated to local ids, with raw label 1 and IS 1.
SubgraphSample restrict_labels(InducedSubgraph sub, int arity,
                               const std::vector<std::vector<Index>>& full_positives);

/// adjusted = raw (NC), alpha * raw (LS), raw * IS(tuple | sub, full) (IS).
void adjust_labels(SubgraphSample& sample, const PathCounter& full, int tau, LabelMode mode,
                   double alpha = 0.9);

/// Mean IS in percent over unordered pairs {u, v} of sampled nodes that are
/// joined by at least one path of length <= tau in the full graph; pairs
/// with no full-graph path are 0/0 and carry no information about the
/// sampler. Returns 100 when no pair qualifies.
double mean_information_sufficiency(const InducedSubgraph& sample, const PathCounter& full, int tau);

struct SamplerStat {
  std::string sampler;
  Index n = 0;
  Index ns = 0;
  std::uint64_t seed = 0;
  double mis_percent = 0;
};

/// Columns sampler,N,N_s,seed,mis_percent.
void write_sampler_stats(std::ostream& os, const std::vector<SamplerStat>& rows);

}  // namespace spaloc
