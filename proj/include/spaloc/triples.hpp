#pragma once

#include "spaloc/hypergraph.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace spaloc {

struct TripleParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Name <-> dense id, ids in order of first appearance.
class Vocabulary {
 public:
  Index add(const std::string& name);
  /// -1 when unknown.
  Index find(const std::string& name) const;
  const std::string& name(Index id) const { return names_[static_cast<std::size_t>(id)]; }
  Index size() const { return static_cast<Index>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }

  /// One name per line.
  void write(std::ostream& os) const;
  static Vocabulary read(std::istream& is);

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, Index> ids_;
};

struct Triple {
  Index head = 0;
  Index relation = 0;
  Index tail = 0;

  friend bool operator==(const Triple&, const Triple&) = default;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

/// A knowledge graph: sorted, duplicate-free triples over its own entity
/// vocabulary. Relation ids come from a vocabulary that may be shared with
/// another graph, as in the inductive setting where train and test graphs
/// have disjoint entities but one relation set.
struct TripleGraph {
  Vocabulary entities;
  Vocabulary relations;
  std::vector<Triple> triples;

  Index entity_count() const { return entities.size(); }
  /// One binary hyperedge (head, tail) per triple, tagged with the relation.
  Hypergraph graph() const;
  bool contains(const Triple& t) const;
  /// Triples touching each entity, as indices into `triples`.
  std::vector<std::vector<Index>> incident() const;
};

/// Lines `head \t relation \t tail`; blank lines are skipped. Relations
/// missing from `relations` are added to it. Throws TripleParseError naming
/// the source and line on anything else.
TripleGraph read_triples(std::istream& is, Vocabulary relations = {}, const std::string& source = "<stream>");
TripleGraph load_triples(const std::string& path, Vocabulary relations = {});

void write_triples(std::ostream& os, const TripleGraph& g);

struct KGPair {
  TripleGraph train;
  TripleGraph test;
};

/// Train graph then test graph, the test graph reusing and extending the
/// train relation vocabulary. Entity sets are checked to be disjoint.
KGPair load_inductive_pair(const std::string& train_path, const std::string& test_path);

/// Family worlds rendered as triples (father, mother, sibling, grandparent,
/// uncle). Train and test graphs come from different worlds, so their
/// entities are disjoint.
KGPair synthetic_family_kg(Index persons_per_world, int train_worlds, int test_worlds, std::uint64_t seed);

}  // namespace spaloc
