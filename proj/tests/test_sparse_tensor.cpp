#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "spaloc/sparse_tensor.hpp"

#include <map>
#include <random>
#include <sstream>

using namespace spaloc;

namespace {

using Tuple = std::vector<int>;
using Grounding = std::map<Tuple, std::vector<double>>;  // absent key = zero row

Grounding to_map(const Tensor& t) {
  Grounding g;
  for (Index i = 0; i < t.rows(); ++i) {
    Tuple key(t.indices().row(i).data(), t.indices().row(i).data() + t.arity());
    std::vector<double> v(t.channels());
    for (Index c = 0; c < t.channels(); ++c) v[c] = t.values()(i, c);
    g[key] = v;
  }
  return g;
}

void all_tuples(int arity, int n, const std::function<void(const Tuple&)>& f) {
  Tuple x(arity, 0);
  std::function<void(int)> rec = [&](int k) {
    if (k == arity) return f(x);
    for (int v = 0; v < n; ++v) {
      x[k] = v;
      rec(k + 1);
    }
  };
  rec(0);
}

Tensor random_tensor(int arity, int n, int channels, double fill, std::mt19937_64& rng) {
  std::bernoulli_distribution keep(fill);
  std::uniform_real_distribution<float> val(-1, 1);
  std::vector<Tuple> rows;
  all_tuples(arity, n, [&](const Tuple& x) {
    if (keep(rng)) rows.push_back(x);
  });
  IndexTable idx(static_cast<Index>(rows.size()), arity);
  ValueTable<float> v(static_cast<Index>(rows.size()), channels);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int k = 0; k < arity; ++k) idx(i, k) = rows[i][k];
    for (int c = 0; c < channels; ++c) v(i, c) = val(rng);
  }
  return Tensor::from_rows(arity, n, idx, v);
}

}  // namespace

TEST_CASE("from_rows sorts and keeps the first duplicate") {
  IndexTable idx(3, 2);
  idx << 1, 0, 0, 1, 1, 0;
  ValueTable<float> v(3, 1);
  v << 5, 6, 7;
  auto t = Tensor::from_rows(2, 3, idx, v);
  CHECK(t.rows() == 2);
  CHECK(t.indices()(0, 1) == 1);
  CHECK(t.values()(1, 0) == 5);
  CHECK_NOTHROW(t.validate());
}

TEST_CASE("out-of-range index is rejected") {
  IndexTable idx(1, 2);
  idx << 0, 3;
  ValueTable<float> v(1, 1);
  CHECK_THROWS_AS(Tensor::from_rows(2, 3, idx, v), InvariantError);
}

TEST_CASE("key capacity is checked") {
  CHECK_NOTHROW(check_key_capacity(4, 50000));
  CHECK_THROWS_AS(check_key_capacity(4, 2000000), CapacityError);
}

TEST_CASE("permutations are lexicographic with identity first") {
  const auto& p = permutations(3);
  REQUIRE(p.size() == 6);
  CHECK(p[0] == std::vector<int>{0, 1, 2});
  CHECK(p[1] == std::vector<int>{0, 2, 1});
  CHECK(p[5] == std::vector<int>{2, 1, 0});
  CHECK(factorial(4) == 24);
}

TEST_CASE("expand of a unary tensor broadcasts over the new slot") {
  IndexTable idx(1, 1);
  idx << 1;
  ValueTable<float> v(1, 2);
  v << 2, 3;
  auto e = expand(Tensor::from_rows(1, 3, idx, v));
  CHECK(e.arity() == 2);
  REQUIRE(e.rows() == 3);
  for (Index i = 0; i < 3; ++i) {
    CHECK(e.indices()(i, 0) == 1);
    CHECK(e.indices()(i, 1) == i);
    CHECK(e.values()(i, 1) == 3);
  }
}

TEST_CASE("reduce_max of an empty tensor is empty") {
  Tensor t(2, 4, 3);
  auto r = reduce_max(t);
  CHECK(r.rows() == 0);
  CHECK(r.channels() == 3);
}

TEST_CASE("primitives agree with a map-based oracle") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 1 + trial % 5;
    const int arity = 1 + trial % 3;
    auto t = random_tensor(arity, n, 2, 0.4, rng);
    const auto g = to_map(t);

    // expand
    Grounding ge;
    for (const auto& [x, v] : g)
      for (int o = 0; o < n; ++o) {
        Tuple y = x;
        y.push_back(o);
        ge[y] = v;
      }
    CHECK(to_map(expand(t)) == ge);

    // reduce: max over stored rows only
    Grounding gr;
    for (const auto& [x, v] : g) {
      Tuple y(x.begin(), x.end() - 1);
      auto it = gr.find(y);
      if (it == gr.end()) gr[y] = v;
      else
        for (std::size_t c = 0; c < v.size(); ++c) it->second[c] = std::max(it->second[c], v[c]);
    }
    CHECK(to_map(reduce_max(t)) == gr);

    // permute: every permutation of a stored tuple, blocks in permutation order
    const auto& perms = permutations(arity);
    Grounding gp;
    for (const auto& [x, v] : g)
      for (const auto& p : perms) {
        // output tuple y with y[p[j]] = x[j] makes block k of y read x back
        Tuple y(arity);
        for (int j = 0; j < arity; ++j) y[p[j]] = x[j];
        gp[y];
      }
    for (auto& [y, row] : gp) {
      row.clear();
      for (const auto& p : perms) {
        Tuple src(arity);
        for (int j = 0; j < arity; ++j) src[j] = y[p[j]];
        auto it = g.find(src);
        for (int c = 0; c < 2; ++c) row.push_back(it == g.end() ? 0.0 : it->second[c]);
      }
    }
    CHECK(to_map(permute_fuse(t)) == gp);

    // concat
    auto u = random_tensor(arity, n, 1, 0.3, rng);
    const auto gu = to_map(u);
    Grounding gc;
    for (const auto& [x, v] : g) gc[x];
    for (const auto& [x, v] : gu) gc[x];
    for (auto& [x, row] : gc) {
      auto a = g.find(x);
      auto b = gu.find(x);
      row = a == g.end() ? std::vector<double>{0, 0} : a->second;
      row.push_back(b == gu.end() ? 0.0 : b->second[0]);
    }
    const Tensor parts[] = {t, u};
    auto c = concat_channels<float>(parts);
    CHECK_NOTHROW(c.validate());
    CHECK(to_map(c) == gc);
  }
}

TEST_CASE("prune_rows keeps gates at or above eps") {
  std::mt19937_64 rng(3);
  auto t = random_tensor(2, 4, 1, 0.6, rng);
  std::vector<float> gate(t.rows());
  for (Index i = 0; i < t.rows(); ++i) gate[i] = static_cast<float>(i) / t.rows();
  auto p = prune_rows(t, std::span<const float>(gate), 0.5);
  Index expected = 0;
  for (float g : gate) expected += g >= 0.5f;
  CHECK(p.rows() == expected);
  CHECK_NOTHROW(p.validate());
  CHECK(prune_rows(t, std::span<const float>(gate), 0.0) == t);
}

TEST_CASE("dense round trip and text round trip") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto t = random_tensor(1 + trial % 3, 3, 2, 0.5, rng);
    CHECK(from_dense(densify(t)) == t);
    std::stringstream ss;
    write_text(ss, t);
    CHECK(read_text(ss) == t);
  }
}

TEST_CASE("text parser reports malformed input") {
  std::stringstream ss("2 3 1 1\n0 9 | 1\n");
  CHECK_THROWS(read_text(ss));
}

TEST_CASE("arity-0 tensor holds at most one row") {
  IndexTable idx(1, 0);
  ValueTable<float> v(1, 2);
  v << 1, 2;
  auto t = Tensor::from_rows(0, 5, idx, v);
  auto e = expand(t);
  CHECK(e.rows() == 5);
  CHECK(reduce_max(e) == t);
}
