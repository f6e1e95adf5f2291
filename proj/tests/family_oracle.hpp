#pragma once

#include "spaloc/family_tree.hpp"

#include <functional>
#include <set>
#include <vector>

namespace spaloc::testing {

// First-order evaluation by enumerating every quantified variable over all persons.
struct Logic {
  std::set<Pair> F, M, S, D;
  Index n;
  explicit Logic(const FamilyTree& t) : n(t.size()) {
    for (Index x = 0; x < n; ++x)
      for (Index a = 0; a < n; ++a) {
        if (t.persons[x].father == a) F.insert({x, a});
        if (t.persons[x].mother == a) M.insert({x, a});
        if ((t.persons[a].father == x || t.persons[a].mother == x) && t.male(a)) S.insert({x, a});
        if ((t.persons[a].father == x || t.persons[a].mother == x) && !t.male(a)) D.insert({x, a});
      }
  }
  bool father(Index x, Index y) const { return F.count({x, y}); }
  bool mother(Index x, Index y) const { return M.count({x, y}); }
  bool son(Index x, Index y) const { return S.count({x, y}); }
  bool daughter(Index x, Index y) const { return D.count({x, y}); }
  bool parent(Index x, Index y) const { return father(x, y) || mother(x, y); }
  bool grandparent(Index x, Index y) const {
    for (Index a = 0; a < n; ++a)
      if (parent(x, a) && parent(a, y)) return true;
    return false;
  }
  bool grandmother(Index x, Index y) const {
    for (Index a = 0; a < n; ++a)
      if (parent(x, a) && mother(a, y)) return true;
    return false;
  }
  bool eval(Task task, const std::vector<Index>& v) const {
    switch (task) {
      case Task::HasFather:
        for (Index a = 0; a < n; ++a)
          if (father(v[0], a)) return true;
        return false;
      case Task::HasSister:
        for (Index a = 0; a < n; ++a)
          for (Index b = 0; b < n; ++b)
            if (father(v[0], a) && daughter(a, b) && b != v[0]) return true;
        return false;
      case Task::Grandparent:
        return grandparent(v[0], v[1]);
      case Task::Uncle:
        for (Index a = 0; a < n; ++a)
          if (grandparent(v[0], a) && son(a, v[1]) && !father(v[0], v[1])) return true;
        return false;
      case Task::MGUncle:
        for (Index a = 0; a < n; ++a)
          for (Index b = 0; b < n; ++b)
            if (grandmother(v[0], a) && mother(a, b) && son(b, v[1])) return true;
        return false;
      case Task::FamilyOfThree:
        return father(v[0], v[1]) && mother(v[0], v[2]);
      case Task::ThreeGenerations:
        return parent(v[0], v[1]) && parent(v[1], v[2]);
    }
    return false;
  }
};

inline std::vector<std::vector<Index>> brute(const FamilyTree& t, Task task) {
  Logic logic(t);
  const int r = task_spec(task).arity;
  std::vector<std::vector<Index>> out;
  std::vector<Index> v(r, 0);
  std::function<void(int)> rec = [&](int k) {
    if (k == r) {
      if (logic.eval(task, v)) out.push_back(v);
      return;
    }
    for (Index x = 0; x < t.size(); ++x) {
      v[k] = x;
      rec(k + 1);
    }
  };
  rec(0);
  return out;
}

}  // namespace spaloc::testing
