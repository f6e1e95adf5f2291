#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "family_oracle.hpp"
#include "spaloc/family_tree.hpp"

#include <set>
#include <sstream>

using namespace spaloc;
using spaloc::testing::brute;

namespace {

FamilyTree small_world() {
  // 0 A male, 1 B female, 2 C child of A and B
  FamilyTree t;
  t.persons = {{Gender::Male, -1, -1}, {Gender::Female, -1, -1}, {Gender::Male, 0, 1}};
  return t;
}

}  // namespace

TEST_CASE("task table") {
  CHECK(task_spec(Task::HasFather).tau == 1);
  for (Task task : all_tasks()) {
    if (task != Task::HasFather) CHECK(task_spec(task).tau == 2);
    CHECK(parse_task(task_spec(task).name) == task);
  }
  CHECK(task_spec(Task::FamilyOfThree).arity == 3);
  CHECK_THROWS_AS(parse_task("Cousin"), std::invalid_argument);
}

TEST_CASE("hand-evaluated worlds") {
  auto t = small_world();
  CHECK(eval_target(t, Task::FamilyOfThree) == std::vector<std::vector<Index>>{{2, 0, 1}});
  CHECK(eval_target(t, Task::Grandparent).empty());
  CHECK(eval_target(t, Task::HasSister).empty());

  // C -> father A, A -> father G
  FamilyTree chain;
  chain.persons = {{Gender::Male, -1, -1}, {Gender::Male, 0, -1}, {Gender::Female, 1, -1}};
  CHECK(eval_target(chain, Task::Grandparent) == std::vector<std::vector<Index>>{{2, 0}});
  CHECK(eval_target(chain, Task::ThreeGenerations) == std::vector<std::vector<Index>>{{2, 1, 0}});

  auto one = generate_family_tree(1, 3);
  for (Task task : all_tasks()) CHECK(eval_target(one, task).empty());
}

TEST_CASE("eval_target equals brute-force quantifier enumeration") {
  int positives = 0;
  for (std::uint64_t seed = 0; seed < 120; ++seed) {
    const Index n = 2 + seed % 11;
    auto t = generate_family_tree(n, seed);
    for (Task task : all_tasks()) {
      auto fast = eval_target(t, task);
      REQUIRE(fast == brute(t, task));
      positives += static_cast<int>(fast.size());
    }
  }
  CHECK(positives > 500);
}

TEST_CASE("generated worlds are valid and reproducible") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto t = generate_family_tree(40, seed);
    CHECK_NOTHROW(t.validate());
    CHECK(t == generate_family_tree(40, seed));
  }
  FamilyTree cyclic;
  cyclic.persons = {{Gender::Male, 1, -1}, {Gender::Male, 0, -1}};
  CHECK_THROWS_AS(cyclic.validate(), InvariantError);
  FamilyTree wrong;
  wrong.persons = {{Gender::Female, -1, -1}, {Gender::Male, 0, -1}};
  CHECK_THROWS_AS(wrong.validate(), InvariantError);
}

TEST_CASE("N = 20 worlds have usable positive rates") {
  // fraction of positive tuples, averaged over 1000 seeds
  for (Task task : {Task::Grandparent, Task::Uncle, Task::HasSister, Task::HasFather}) {
    double rate = 0;
    double mean_pos = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      auto t = generate_family_tree(20, 10000 + seed);
      const auto pos = eval_target(t, task).size();
      const int r = task_spec(task).arity;
      rate += static_cast<double>(pos) / std::pow(20.0, r);
      mean_pos += static_cast<double>(pos);
    }
    rate /= 1000;
    mean_pos /= 1000;
    INFO(task_spec(task).name, " rate ", rate);
    CHECK(mean_pos >= 1);
    if (task == Task::Grandparent) {
      CHECK(rate >= 0.02);
      CHECK(rate <= 0.5);
    }
  }
}

TEST_CASE("encoding is lossless") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto t = generate_family_tree(15, seed);
    auto in = encode_inputs(t);
    CHECK_NOTHROW(in.validate());
    CHECK(in.breadth() == 3);
    CHECK(decode_inputs(in) == relations(t));
    std::set<Pair> related;
    const auto rel = relations(t);
    for (const auto* list : {&rel.father, &rel.mother, &rel.son, &rel.daughter})
      related.insert(list->begin(), list->end());
    CHECK(in.tensors[2].rows() == static_cast<Index>(related.size()));
  }
  auto lone = generate_family_tree(1, 0);
  auto in = encode_inputs(lone);
  CHECK(in.tensors[2].rows() == 0);
  auto tgt = encode_targets({{2, 0, 1}}, 3, 3);
  CHECK(tgt.rows() == 1);
}

TEST_CASE("world file round trip and errors") {
  auto t = generate_family_tree(25, 9);
  std::stringstream ss;
  write_world(ss, t);
  CHECK(read_world(ss) == t);
  std::stringstream bad("SPALOC-WORLD 1\nPERSON 0 M\nPERSON 1 X\n");
  try {
    read_world(bad);
    FAIL("expected a parse error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("restriction and family hypergraph") {
  auto t = small_world();
  const Index keep[] = {0, 2};
  auto r = restrict_family(t, keep);
  CHECK(r.size() == 2);
  CHECK(r.persons[1].father == 0);
  CHECK(r.persons[1].mother == -1);
  auto h = family_hypergraph(t);
  CHECK(h.edge_count() == 2);
}
