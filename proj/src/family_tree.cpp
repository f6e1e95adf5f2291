#include "spaloc/family_tree.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace spaloc {

void FamilyTree::validate() const {
  for (Index x = 0; x < size(); ++x) {
    const auto& p = persons[x];
    if (p.father < -1 || p.father >= size() || p.mother < -1 || p.mother >= size())
      throw InvariantError("parent out of range");
    if (p.father >= 0 && !male(p.father)) throw InvariantError("father is not male");
    if (p.mother >= 0 && male(p.mother)) throw InvariantError("mother is not female");
  }
  // 0 unvisited, 1 on the current ancestor chain, 2 done
  std::vector<char> state(size(), 0);
  for (Index root = 0; root < size(); ++root) {
    if (state[root]) continue;
    std::vector<std::pair<Index, int>> stack = {{root, 0}};
    state[root] = 1;
    while (!stack.empty()) {
      auto& [x, next] = stack.back();
      const Index links[] = {persons[x].father, persons[x].mother};
      if (next == 2) {
        state[x] = 2;
        stack.pop_back();
        continue;
      }
      const Index a = links[next++];
      if (a < 0 || state[a] == 2) continue;
      if (state[a] == 1) throw InvariantError("parentage is cyclic");
      state[a] = 1;
      stack.emplace_back(a, 0);
    }
  }
}

FamilyRelations relations(const FamilyTree& t) {
  FamilyRelations r;
  for (Index x = 0; x < t.size(); ++x) {
    (t.male(x) ? r.males : r.females).push_back(x);
    const auto& p = t.persons[x];
    auto& inverse = t.male(x) ? r.son : r.daughter;
    if (p.father >= 0) {
      r.father.emplace_back(x, p.father);
      inverse.emplace_back(p.father, x);
    }
    if (p.mother >= 0) {
      r.mother.emplace_back(x, p.mother);
      inverse.emplace_back(p.mother, x);
    }
  }
  for (auto* v : {&r.father, &r.mother, &r.son, &r.daughter}) std::sort(v->begin(), v->end());
  return r;
}

FamilyTree generate_family_tree(Index n, std::uint64_t seed, const FamilyOptions& options) {
  if (n < 1) throw std::invalid_argument("family tree needs n >= 1");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::bernoulli_distribution gets_parents(options.parent_prob);
  FamilyTree t;
  std::vector<Index> males, females;
  for (Index x = 0; x < n; ++x) {
    Person p;
    p.gender = coin(rng) ? Gender::Male : Gender::Female;
    if (!males.empty() && !females.empty() && gets_parents(rng)) {
      p.father = males[std::uniform_int_distribution<std::size_t>(0, males.size() - 1)(rng)];
      p.mother = females[std::uniform_int_distribution<std::size_t>(0, females.size() - 1)(rng)];
    }
    (p.gender == Gender::Male ? males : females).push_back(x);
    t.persons.push_back(p);
  }
  return t;
}

namespace {

const std::vector<TaskSpec>& specs() {
  static const std::vector<TaskSpec> s = {
      {Task::HasFather, "HasFather", 1, 1},         {Task::HasSister, "HasSister", 1, 2},
      {Task::Grandparent, "Grandparent", 2, 2},     {Task::Uncle, "Uncle", 2, 2},
      {Task::MGUncle, "MGUncle", 2, 2},             {Task::FamilyOfThree, "FamilyOfThree", 3, 2},
      {Task::ThreeGenerations, "ThreeGenerations", 3, 2},
  };
  return s;
}

std::vector<Index> parents(const FamilyTree& t, Index x) {
  std::vector<Index> out;
  if (t.persons[x].father >= 0) out.push_back(t.persons[x].father);
  if (t.persons[x].mother >= 0) out.push_back(t.persons[x].mother);
  return out;
}

}  // namespace

const TaskSpec& task_spec(Task task) { return specs().at(static_cast<std::size_t>(task)); }

Task parse_task(const std::string& name) {
  for (const auto& s : specs())
    if (name == s.name) return s.task;
  throw std::invalid_argument("unknown task '" + name + "'");
}

const std::vector<Task>& all_tasks() {
  static const std::vector<Task> t = {Task::HasFather,     Task::HasSister,    Task::Grandparent,
                                      Task::Uncle,         Task::MGUncle,      Task::FamilyOfThree,
                                      Task::ThreeGenerations};
  return t;
}

std::vector<std::vector<Index>> eval_target(const FamilyTree& t, Task task) {
  const Index n = t.size();
  std::vector<std::vector<Index>> children(n), sons(n);
  for (Index x = 0; x < n; ++x)
    for (Index p : parents(t, x)) {
      children[p].push_back(x);
      if (t.male(x)) sons[p].push_back(x);
    }
  auto grandparents = [&](Index x) {
    std::vector<Index> g;
    for (Index a : parents(t, x))
      for (Index b : parents(t, a)) g.push_back(b);
    return g;
  };

  std::vector<std::vector<Index>> out;
  for (Index x = 0; x < n; ++x) {
    const auto& px = t.persons[x];
    switch (task) {
      case Task::HasFather:
        if (px.father >= 0) out.push_back({x});
        break;
      case Task::HasSister: {
        bool has = false;
        if (px.father >= 0)
          for (Index b : children[px.father]) has = has || (b != x && !t.male(b));
        if (has) out.push_back({x});
        break;
      }
      case Task::Grandparent:
        for (Index y : grandparents(x)) out.push_back({x, y});
        break;
      case Task::Uncle:
        for (Index a : grandparents(x))
          for (Index y : sons[a])
            if (y != px.father) out.push_back({x, y});
        break;
      case Task::MGUncle:
        for (Index c : parents(t, x)) {
          const Index a = t.persons[c].mother;  // Grandmother(x, a)
          if (a < 0) continue;
          const Index b = t.persons[a].mother;
          if (b < 0) continue;
          for (Index y : sons[b]) out.push_back({x, y});
        }
        break;
      case Task::FamilyOfThree:
        if (px.father >= 0 && px.mother >= 0) out.push_back({x, px.father, px.mother});
        break;
      case Task::ThreeGenerations:
        for (Index y : parents(t, x))
          for (Index z : parents(t, y)) out.push_back({x, y, z});
        break;
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Hypergraph family_hypergraph(const FamilyTree& t) {
  std::vector<Hyperedge> edges;
  for (Index x = 0; x < t.size(); ++x) {
    if (t.persons[x].father >= 0) edges.push_back({{x, t.persons[x].father}, 0});
    if (t.persons[x].mother >= 0) edges.push_back({{x, t.persons[x].mother}, 1});
  }
  return Hypergraph(t.size(), std::move(edges));
}

ArityFamily<float> encode_inputs(const FamilyTree& t, int breadth) {
  if (breadth < 2) throw InvariantError("family inputs need breadth >= 2");
  const Index n = t.size();
  const auto rel = relations(t);
  ArityFamily<float> f;
  f.tensors.emplace_back(0, n, 0);

  IndexTable genders(n, 1);
  ValueTable<float> g = ValueTable<float>::Zero(n, 2);
  for (Index x = 0; x < n; ++x) {
    genders(x, 0) = x;
    g(x, t.male(x) ? 0 : 1) = 1;
  }
  f.tensors.push_back(Tensor::from_canonical(1, n, std::move(genders), std::move(g)));

  std::vector<std::pair<Pair, int>> entries;
  const std::vector<Pair>* lists[] = {&rel.father, &rel.mother, &rel.son, &rel.daughter};
  for (int c = 0; c < 4; ++c)
    for (const auto& p : *lists[c]) entries.emplace_back(p, c);
  std::sort(entries.begin(), entries.end());
  std::vector<Pair> keys;
  for (const auto& e : entries)
    if (keys.empty() || keys.back() != e.first) keys.push_back(e.first);
  IndexTable idx(static_cast<Index>(keys.size()), 2);
  ValueTable<float> v = ValueTable<float>::Zero(static_cast<Index>(keys.size()), 4);
  std::size_t row = 0;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    idx(i, 0) = keys[i].first;
    idx(i, 1) = keys[i].second;
    for (; row < entries.size() && entries[row].first == keys[i]; ++row) v(i, entries[row].second) = 1;
  }
  f.tensors.push_back(Tensor::from_canonical(2, n, std::move(idx), std::move(v)));
  for (int r = 3; r <= breadth; ++r) f.tensors.emplace_back(r, n, 0);
  return f;
}

FamilyRelations decode_inputs(const ArityFamily<float>& inputs) {
  FamilyRelations r;
  const auto& g = inputs.tensors.at(1);
  for (Index i = 0; i < g.rows(); ++i) {
    if (g.values()(i, 0) > 0.5f) r.males.push_back(g.indices()(i, 0));
    if (g.values()(i, 1) > 0.5f) r.females.push_back(g.indices()(i, 0));
  }
  const auto& b = inputs.tensors.at(2);
  std::vector<Pair>* lists[] = {&r.father, &r.mother, &r.son, &r.daughter};
  for (Index i = 0; i < b.rows(); ++i)
    for (int c = 0; c < 4; ++c)
      if (b.values()(i, c) > 0.5f) lists[c]->emplace_back(b.indices()(i, 0), b.indices()(i, 1));
  return r;
}

Tensor encode_targets(const std::vector<std::vector<Index>>& positives, int arity, Index node_count) {
  IndexTable idx(static_cast<Index>(positives.size()), arity);
  for (std::size_t i = 0; i < positives.size(); ++i) {
    if (static_cast<int>(positives[i].size()) != arity) throw InvariantError("target tuple arity mismatch");
    for (int k = 0; k < arity; ++k) idx(i, k) = positives[i][k];
  }
  return Tensor::from_rows(arity, node_count, std::move(idx),
                           ValueTable<float>::Ones(static_cast<Index>(positives.size()), 1));
}

FamilyTree restrict_family(const FamilyTree& t, std::span<const Index> nodes) {
  std::vector<Index> keep(nodes.begin(), nodes.end());
  std::sort(keep.begin(), keep.end());
  keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
  std::vector<Index> local(t.size(), -1);
  for (std::size_t i = 0; i < keep.size(); ++i) local[keep[i]] = static_cast<Index>(i);
  FamilyTree out;
  for (Index x : keep) {
    Person p = t.persons[x];
    p.father = p.father >= 0 ? local[p.father] : -1;
    p.mother = p.mother >= 0 ? local[p.mother] : -1;
    out.persons.push_back(p);
  }
  return out;
}

void write_world(std::ostream& os, const FamilyTree& t) {
  os << "SPALOC-WORLD 1\n";
  for (Index x = 0; x < t.size(); ++x) os << "PERSON " << x << ' ' << (t.male(x) ? 'M' : 'F') << '\n';
  for (Index x = 0; x < t.size(); ++x)
    if (t.persons[x].father >= 0 || t.persons[x].mother >= 0)
      os << "PARENTS " << x << ' ' << t.persons[x].father << ' ' << t.persons[x].mother << '\n';
}

FamilyTree read_world(std::istream& is) {
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& what) {
    throw std::runtime_error("world file line " + std::to_string(lineno) + ": " + what);
  };
  ++lineno;
  if (!std::getline(is, line) || line != "SPALOC-WORLD 1") fail("expected header 'SPALOC-WORLD 1'");
  FamilyTree t;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "PERSON") {
      Index id = -1;
      char g = 0;
      if (!(ls >> id >> g) || (g != 'M' && g != 'F')) fail("malformed PERSON");
      if (id != t.size()) fail("PERSON ids must be consecutive from 0");
      t.persons.push_back({g == 'M' ? Gender::Male : Gender::Female, -1, -1});
    } else if (kind == "PARENTS") {
      Index id = -1, f = -1, m = -1;
      if (!(ls >> id >> f >> m)) fail("malformed PARENTS");
      if (id < 0 || id >= t.size() || f < -1 || f >= t.size() || m < -1 || m >= t.size())
        fail("PARENTS refers to an unknown person");
      t.persons[id].father = f;
      t.persons[id].mother = m;
    } else {
      fail("unknown record '" + kind + "'");
    }
  }
  try {
    t.validate();
  } catch (const InvariantError& e) {
    throw std::runtime_error(std::string("world file: ") + e.what());
  }
  return t;
}

}  // namespace spaloc
