#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "spaloc/triples.hpp"

#include <set>
#include <sstream>

using namespace spaloc;

TEST_CASE("empty input gives an empty graph") {
  std::istringstream in("");
  auto g = read_triples(in);
  CHECK(g.triples.empty());
  CHECK(g.entity_count() == 0);
  CHECK(g.graph().edge_count() == 0);
}

TEST_CASE("three-line fixture") {
  std::istringstream in("alice\tparent_of\tbob\nbob\tparent_of\tcarol\n\ncarol\tfriend_of\talice\n");
  auto g = read_triples(in);
  CHECK(g.triples.size() == 3);
  CHECK(g.entities.size() == 3);
  CHECK(g.relations.size() == 2);
  auto h = g.graph();
  CHECK(h.edge_count() == 3);
  CHECK(h.node_count() == 3);
  CHECK(g.contains({g.entities.find("bob"), g.relations.find("parent_of"), g.entities.find("carol")}));
  CHECK_FALSE(g.contains({g.entities.find("carol"), g.relations.find("parent_of"), g.entities.find("bob")}));
}

TEST_CASE("duplicate triples collapse") {
  std::istringstream a("x\tr\ty\ny\tr\tz\n");
  std::istringstream b("x\tr\ty\ny\tr\tz\nx\tr\ty\n");
  CHECK(read_triples(a).triples.size() == read_triples(b).triples.size());
}

TEST_CASE("malformed lines name their line number") {
  for (const char* text : {"a\tr\tb\nonly two\tfields\n", "a\tr\tb\na\tr\tb\textra\n", "a\tr\tb\n\tr\tb\n"}) {
    std::istringstream in(text);
    try {
      read_triples(in, {}, "fixture.tsv");
      FAIL("no error");
    } catch (const TripleParseError& e) {
      CHECK(std::string(e.what()).find("fixture.tsv:2") != std::string::npos);
    }
  }
}

TEST_CASE("vocabulary round trip") {
  Vocabulary v;
  v.add("b");
  v.add("a");
  CHECK(v.add("b") == 0);
  std::stringstream s;
  v.write(s);
  auto w = Vocabulary::read(s);
  CHECK(w.names() == v.names());
  CHECK(w.find("a") == 1);
  CHECK(w.find("zzz") == -1);
}

TEST_CASE("write then read preserves the triple set") {
  std::istringstream in("a\tr\tb\nb\ts\tc\nc\tr\ta\n");
  auto g = read_triples(in);
  std::stringstream out;
  write_triples(out, g);
  auto back = read_triples(out);
  std::set<std::string> x, y;
  for (const auto& t : g.triples)
    x.insert(g.entities.name(t.head) + g.relations.name(t.relation) + g.entities.name(t.tail));
  for (const auto& t : back.triples)
    y.insert(back.entities.name(t.head) + back.relations.name(t.relation) + back.entities.name(t.tail));
  CHECK(x == y);
}

TEST_CASE("synthetic inductive split") {
  auto kg = synthetic_family_kg(60, 3, 2, 4);
  CHECK(kg.train.relations.names() == kg.test.relations.names());
  CHECK(kg.train.entity_count() <= 180);
  CHECK(kg.test.entity_count() <= 120);
  for (const auto& name : kg.test.entities.names()) CHECK(kg.train.entities.find(name) < 0);
  std::set<Index> rels;
  for (const auto& t : kg.train.triples) rels.insert(t.relation);
  CHECK(rels.size() == 5);
  auto again = synthetic_family_kg(60, 3, 2, 4);
  CHECK(again.train.triples == kg.train.triples);
}
