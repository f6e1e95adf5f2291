#include "spaloc/triples.hpp"

#include "spaloc/family_tree.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>

namespace spaloc {

Index Vocabulary::add(const std::string& name) {
  auto [it, fresh] = ids_.emplace(name, size());
  if (fresh) names_.push_back(name);
  return it->second;
}

Index Vocabulary::find(const std::string& name) const {
  auto it = ids_.find(name);
  return it == ids_.end() ? -1 : it->second;
}

void Vocabulary::write(std::ostream& os) const {
  for (const auto& n : names_) os << n << '\n';
}

Vocabulary Vocabulary::read(std::istream& is) {
  Vocabulary v;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) v.add(line);
  }
  return v;
}

Hypergraph TripleGraph::graph() const {
  std::vector<Hyperedge> edges;
  edges.reserve(triples.size());
  for (const auto& t : triples) edges.push_back({{t.head, t.tail}, t.relation});
  return Hypergraph(entity_count(), std::move(edges));
}

bool TripleGraph::contains(const Triple& t) const { return std::binary_search(triples.begin(), triples.end(), t); }

std::vector<std::vector<Index>> TripleGraph::incident() const {
  std::vector<std::vector<Index>> out(static_cast<std::size_t>(entity_count()));
  for (std::size_t i = 0; i < triples.size(); ++i) {
    out[triples[i].head].push_back(static_cast<Index>(i));
    if (triples[i].tail != triples[i].head) out[triples[i].tail].push_back(static_cast<Index>(i));
  }
  return out;
}

TripleGraph read_triples(std::istream& is, Vocabulary relations, const std::string& source) {
  TripleGraph g;
  g.relations = std::move(relations);
  std::string line;
  int number = 0;
  while (std::getline(is, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::string field[3];
    std::size_t start = 0;
    int count = 0;
    for (; count < 3; ++count) {
      const auto tab = line.find('\t', start);
      field[count] = line.substr(start, tab == std::string::npos ? std::string::npos : tab - start);
      if (tab == std::string::npos) {
        start = std::string::npos;
        ++count;
        break;
      }
      start = tab + 1;
    }
    if (count != 3 || start != std::string::npos || field[0].empty() || field[1].empty() || field[2].empty())
      throw TripleParseError(source + ":" + std::to_string(number) +
                             ": expected 'head<TAB>relation<TAB>tail', got '" + line + "'");
    g.triples.push_back({g.entities.add(field[0]), g.relations.add(field[1]), g.entities.add(field[2])});
  }
  std::sort(g.triples.begin(), g.triples.end());
  g.triples.erase(std::unique(g.triples.begin(), g.triples.end()), g.triples.end());
  return g;
}

TripleGraph load_triples(const std::string& path, Vocabulary relations) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open triple file " + path);
  return read_triples(in, std::move(relations), path);
}

void write_triples(std::ostream& os, const TripleGraph& g) {
  for (const auto& t : g.triples)
    os << g.entities.name(t.head) << '\t' << g.relations.name(t.relation) << '\t' << g.entities.name(t.tail) << '\n';
}

KGPair load_inductive_pair(const std::string& train_path, const std::string& test_path) {
  KGPair p;
  p.train = load_triples(train_path);
  p.test = load_triples(test_path, p.train.relations);
  p.train.relations = p.test.relations;
  for (const auto& name : p.test.entities.names())
    if (p.train.entities.find(name) >= 0)
      throw std::invalid_argument("inductive split: entity '" + name + "' appears in both graphs");
  return p;
}

namespace {

void add_world(TripleGraph& g, const FamilyTree& t, const std::string& prefix) {
  auto id = [&](Index x) { return g.entities.add(prefix + std::to_string(x)); };
  for (Index x = 0; x < t.size(); ++x) id(x);
  const auto rel = relations(t);
  auto put = [&](const char* relation, Index h, Index tl) { g.triples.push_back({id(h), g.relations.add(relation), id(tl)}); };
  for (auto [x, a] : rel.father) put("father", x, a);
  for (auto [x, a] : rel.mother) put("mother", x, a);
  for (const auto& p : eval_target(t, Task::Grandparent)) put("grandparent", p[0], p[1]);
  for (const auto& p : eval_target(t, Task::Uncle)) put("uncle", p[0], p[1]);
  for (Index x = 0; x < t.size(); ++x)
    for (Index y = 0; y < t.size(); ++y)
      if (x != y && t.persons[x].father >= 0 && t.persons[x].father == t.persons[y].father) put("sibling", x, y);
}

}  // namespace

KGPair synthetic_family_kg(Index persons_per_world, int train_worlds, int test_worlds, std::uint64_t seed) {
  KGPair p;
  for (const char* r : {"father", "mother", "sibling", "grandparent", "uncle"}) p.train.relations.add(r);
  p.test.relations = p.train.relations;
  for (int w = 0; w < train_worlds; ++w)
    add_world(p.train, generate_family_tree(persons_per_world, seed * 7919 + static_cast<std::uint64_t>(w)),
              "a" + std::to_string(w) + "_");
  for (int w = 0; w < test_worlds; ++w)
    add_world(p.test, generate_family_tree(persons_per_world, seed * 7919 + 5000 + static_cast<std::uint64_t>(w)),
              "b" + std::to_string(w) + "_");
  for (auto* g : {&p.train, &p.test}) {
    std::sort(g->triples.begin(), g->triples.end());
    g->triples.erase(std::unique(g->triples.begin(), g->triples.end()), g->triples.end());
  }
  return p;
}

}  // namespace spaloc
