#pragma once

#include "spaloc/hypergraph.hpp"
#include "spaloc/sparse_tensor.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace spaloc {

enum class Gender : std::uint8_t { Male, Female };

struct Person {
  Gender gender = Gender::Male;
  Index father = -1;
  Index mother = -1;

  friend bool operator==(const Person&, const Person&) = default;
};

/// Persons 0..n-1 with optional parents; generated trees list parents first.
struct FamilyTree {
  std::vector<Person> persons;

  Index size() const { return static_cast<Index>(persons.size()); }
  bool male(Index x) const { return persons[x].gender == Gender::Male; }

  /// Throws InvariantError if a parent is out of range, of the wrong gender,
  /// or makes the parentage cyclic.
  void validate() const;

  friend bool operator==(const FamilyTree&, const FamilyTree&) = default;
};

using Pair = std::pair<Index, Index>;

/// The four input predicates as ordered pair lists, each sorted.
/// Father(x, a): a is x's father. Son(x, a): a is x's son.
struct FamilyRelations {
  std::vector<Pair> father, mother, son, daughter;
  std::vector<Index> males, females;

  friend bool operator==(const FamilyRelations&, const FamilyRelations&) = default;
};

FamilyRelations relations(const FamilyTree& t);

struct FamilyOptions {
  double parent_prob = 0.85;
};

/// Sequential growth: person i gets a uniform gender and, with probability
/// parent_prob (when an earlier male and female exist), a father chosen
/// uniformly among earlier males and a mother among earlier females.
FamilyTree generate_family_tree(Index n, std::uint64_t seed, const FamilyOptions& options = {});

enum class Task { HasFather, HasSister, Grandparent, Uncle, MGUncle, FamilyOfThree, ThreeGenerations };

struct TaskSpec {
  Task task;
  const char* name;
  int arity;
  int tau;
};

const TaskSpec& task_spec(Task task);
/// Accepts the names above; throws std::invalid_argument otherwise.
Task parse_task(const std::string& name);
const std::vector<Task>& all_tasks();

/// Positive tuples of the target predicate, lexicographically sorted.
std::vector<std::vector<Index>> eval_target(const FamilyTree& t, Task task);

/// Hypergraph used for sampling and path counting: one binary edge per
/// parent link, (child, father) with relation 0 and (child, mother) with 1.
Hypergraph family_hypergraph(const FamilyTree& t);

/// Arity 0: no channels. Arity 1: [male, female] for every person.
/// Arity 2: [Father, Mother, Son, Daughter] on related ordered pairs.
/// Higher arities: no channels.
ArityFamily<float> encode_inputs(const FamilyTree& t, int breadth = 3);
inline const std::vector<int>& family_input_channels() {
  static const std::vector<int> c = {0, 2, 4, 0};
  return c;
}

/// Relation sets recovered from an encoded input family.
FamilyRelations decode_inputs(const ArityFamily<float>& inputs);

/// One-channel tensor with value 1 on every positive tuple.
Tensor encode_targets(const std::vector<std::vector<Index>>& positives, int arity, Index node_count);

/// Restriction to a node subset: persons renumbered in ascending order of
/// original id, parents outside the subset dropped.
FamilyTree restrict_family(const FamilyTree& t, std::span<const Index> nodes);

/// "SPALOC-WORLD 1" header, then `PERSON id M|F` and `PARENTS id father mother`.
void write_world(std::ostream& os, const FamilyTree& t);
/// Throws std::runtime_error with the line number on malformed input.
FamilyTree read_world(std::istream& is);

}  // namespace spaloc
