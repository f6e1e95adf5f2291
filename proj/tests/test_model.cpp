#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "spaloc/dense_reference.hpp"
#include "spaloc/model.hpp"
#include "test_support.hpp"

#include <cstdio>
#include <filesystem>
#include <map>
#include <random>

using namespace spaloc;

namespace {

ModelConfig family_config() {
  ModelConfig cfg;
  cfg.input_channels = {0, 2, 4, 0};
  return cfg;
}

// Relabels every node id through pi.
ArityFamily<double> relabel(const ArityFamily<double>& f, const std::vector<Index>& pi) {
  ArityFamily<double> out;
  for (const auto& t : f.tensors) {
    IndexTable idx = t.indices();
    for (Index i = 0; i < idx.size(); ++i) idx.data()[i] = pi[idx.data()[i]];
    out.tensors.push_back(SparseFeatureTensor<double>::from_rows(t.arity(), t.node_count(), idx, t.values()));
  }
  return out;
}

std::map<std::vector<Index>, std::vector<double>> as_map(const ForwardResult<double>& r) {
  std::map<std::vector<Index>, std::vector<double>> m;
  const auto p = r.predictions();
  for (Index i = 0; i < r.logits.rows(); ++i) {
    std::vector<Index> key(r.logits.indices->row(i).data(), r.logits.indices->row(i).data() + r.logits.arity);
    m[key] = std::vector<double>(p.row(i).data(), p.row(i).data() + p.cols());
  }
  return m;
}

}  // namespace

TEST_CASE("config validation") {
  auto cfg = family_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.breadth = 5;
  CHECK_THROWS_AS(cfg.validate(), InvariantError);
  cfg = family_config();
  cfg.eps = 1.0;
  CHECK_THROWS_AS(cfg.validate(), InvariantError);
  cfg = family_config();
  cfg.depth = 0;
  CHECK_THROWS_AS(cfg.validate(), InvariantError);
  cfg = family_config();
  cfg.lambda = -1;
  CHECK_THROWS_AS(cfg.validate(), InvariantError);
}

TEST_CASE("son(x, y) from male(x) and parent(y, x) with hand-set weights") {
  // nodes: 0 father, 1 son, 2 daughter. parent(y, x): y is a parent of x.
  ModelConfig cfg;
  cfg.depth = 1;
  cfg.breadth = 2;
  cfg.hidden = 1;
  cfg.eps = 0.5;
  cfg.input_channels = {0, 1, 1};
  Model<double> model(cfg, 0);
  auto& b = model.layers()[0].blocks[2];
  // arity-2 concat = [parent(x,y), male(x)], permuted blocks [identity, swap]
  REQUIRE(b.in_width == 2);
  b.main.value.setZero();
  b.main.value(1, 0) = 1;  // male(x)
  b.main.value(2, 0) = 1;  // parent(y, x)
  // main has no bias, so the conjunction threshold lives in the gate
  b.gate.value = 10 * b.main.value;
  b.gate_bias.value(0, 0) = -15;

  ArityFamily<double> in;
  in.tensors.emplace_back(0, 3, 0);
  IndexTable male(1, 1);
  male << 1;
  in.tensors.push_back(SparseFeatureTensor<double>::from_rows(1, 3, male, ValueTable<double>::Ones(1, 1)));
  IndexTable parent(2, 2);
  parent << 0, 1, 0, 2;
  in.tensors.push_back(SparseFeatureTensor<double>::from_rows(2, 3, parent, ValueTable<double>::Ones(2, 1)));

  Tape<double> tape(false);
  std::vector<TapeTensor<double>> cur;
  for (const auto& t : in.tensors) cur.push_back(TapeTensor<double>::constant(tape, t));
  auto out = rrl_forward(tape, model.layers()[0], cur, Mode::Infer, cfg.eps);
  const auto& son = out.tensors[2];
  REQUIRE(son.rows() == 1);
  CHECK((*son.indices)(0, 0) == 1);
  CHECK((*son.indices)(0, 1) == 0);
  CHECK(son.values.value()(0, 0) > 1.9);
}

TEST_CASE("all-zero inputs give zero rows and gates of sigmoid(bias)") {
  auto cfg = family_config();
  cfg.depth = 1;
  Model<double> model(cfg, 3);
  std::mt19937_64 rng(1);
  auto in = testing::random_family<double>(3, 4, cfg.input_channels, 0.4, rng);
  for (auto& t : in.tensors) t.mutable_values().setZero();
  Tape<double> tape(false);
  auto out = model.forward(tape, in, Mode::Train);
  for (const auto& g : out.gates)
    for (Index i = 0; i < g.rows(); ++i) CHECK(g.value()(i, 0) == doctest::Approx(1 / (1 + std::exp(-1.0))));
}

TEST_CASE("eps = 0 inference equals training forward") {
  auto cfg = family_config();
  cfg.eps = 0;
  Model<double> model(cfg, 4);
  std::mt19937_64 rng(2);
  auto in = testing::random_family<double>(3, 5, cfg.input_channels, 0.3, rng);
  Tape<double> t1(false), t2(false);
  auto a = model.forward(t1, in, Mode::Train);
  auto b = model.forward(t2, in, Mode::Infer);
  CHECK(*a.logits.indices == *b.logits.indices);
  CHECK(a.logits.values.value() == b.logits.values.value());
}

TEST_CASE("sparse forward equals the dense reference") {
  std::mt19937_64 rng(99);
  double worst = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const int breadth = 1 + trial % 3;
    auto cfg = testing::random_config(breadth, rng);
    Model<double> model(cfg, trial);
    const Index n = 1 + trial % 6;
    auto in = testing::random_family<double>(breadth, n, cfg.input_channels, 0.3, rng);
    worst = std::max(worst, testing::dense_gap(model, in));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("empty graph predicts composed biases; N = 1 is finite") {
  auto cfg = family_config();
  Model<double> model(cfg, 5);
  std::mt19937_64 rng(3);
  auto empty = testing::random_family<double>(3, 4, cfg.input_channels, 0.0, rng);
  auto dense = dense_reference_forward(model, empty);
  for (Index i = 0; i < dense.predictions.rows(); ++i)
    CHECK(dense.predictions(i, 0) == doctest::Approx(model.absent_prediction()(0, 0)));
  auto one = testing::random_family<double>(3, 1, cfg.input_channels, 1.0, rng);
  auto r = model.infer(one);
  CHECK(r.logits.rows() <= 1);
  CHECK(r.predictions().allFinite());
  CHECK(testing::dense_gap(model, one) < 1e-9);
}

TEST_CASE("permutation equivariance") {
  auto cfg = family_config();
  cfg.eps = 0.3;
  Model<double> model(cfg, 6);
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    auto in = testing::random_family<double>(3, 6, cfg.input_channels, 0.25, rng);
    std::vector<Index> pi(6);
    std::iota(pi.begin(), pi.end(), 0);
    std::shuffle(pi.begin(), pi.end(), rng);
    auto a = as_map(model.infer(in));
    auto b = as_map(model.infer(relabel(in, pi)));
    std::map<std::vector<Index>, std::vector<double>> moved;
    for (auto& [k, v] : a) {
      auto key = k;
      for (auto& x : key) x = pi[x];
      moved[key] = v;
    }
    REQUIRE(moved.size() == b.size());
    for (auto& [k, v] : moved)
      for (std::size_t c = 0; c < v.size(); ++c) CHECK(b[k][c] == doctest::Approx(v[c]).epsilon(1e-12));
  }
}

TEST_CASE("raising eps never increases retained rows; gates lie in (0, 1)") {
  auto cfg = family_config();
  Model<double> model(cfg, 7);
  std::mt19937_64 rng(5);
  auto in = testing::random_family<double>(3, 6, cfg.input_channels, 0.2, rng);
  std::vector<std::int64_t> prev;
  for (double eps : {0.0, 0.2, 0.5, 0.7, 0.9}) {
    model.mutable_config().eps = eps;
    auto r = model.infer(in);
    std::vector<std::int64_t> kept;
    for (const auto& e : r.density.entries) kept.push_back(e.retained);
    if (!prev.empty())
      for (std::size_t i = 0; i < kept.size(); ++i) CHECK(kept[i] <= prev[i]);
    prev = kept;
    for (const auto& g : r.gates)
      for (Index i = 0; i < g.rows(); ++i) {
        CHECK(g.value()(i, 0) > 0);
        CHECK(g.value()(i, 0) < 1);
      }
  }
}

TEST_CASE("depth-5 breadth-3 model on a 20-node graph returns arity-2 predictions") {
  auto cfg = family_config();
  Model<float> model(cfg, 8);
  std::mt19937_64 rng(6);
  auto in = testing::random_family<float>(3, 20, cfg.input_channels, 0.05, rng);
  auto r = model.infer(in);
  CHECK(r.logits.arity == 2);
  CHECK(r.logits.rows() <= 400);
  CHECK(r.density.entries.size() == 5 * 4);
}

TEST_CASE("width mismatch is rejected") {
  auto cfg = family_config();
  Model<double> model(cfg, 9);
  std::mt19937_64 rng(7);
  auto in = testing::random_family<double>(3, 4, {0, 1, 4, 0}, 0.5, rng);
  Tape<double> tape(false);
  CHECK_THROWS_AS(model.forward(tape, in, Mode::Train), InvariantError);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  auto cfg = family_config();
  cfg.lambda = 0.02;
  Model<float> model(cfg, 10);
  const auto path = (std::filesystem::temp_directory_path() / "spaloc_ckpt_test.bin").string();
  save_checkpoint(model, path);
  auto loaded = load_checkpoint(path);
  CHECK(loaded.config() == model.config());
  auto a = model.parameters();
  auto b = loaded.parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i]->name == b[i]->name);
    CHECK(std::memcmp(a[i]->value.data(), b[i]->value.data(), sizeof(float) * a[i]->value.size()) == 0);
  }
  {
    std::FILE* f = std::fopen(path.c_str(), "r+b");
    std::fputc('X', f);
    std::fclose(f);
  }
  CHECK_THROWS(load_checkpoint(path));
  std::filesystem::remove(path);
}

TEST_CASE("screened arity-3 expansion keeps exactly the rows that survive pruning") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-3, 3);
  int screened_smaller = 0;
  for (int trial = 0; trial < 60; ++trial) {
    auto cfg = testing::random_config(3, rng);
    cfg.eps = std::uniform_real_distribution<double>(0.05, 0.8)(rng);
    const Index n = 3 + trial % 5;
    Model<double> model(cfg, static_cast<std::uint64_t>(trial));
    for (auto& l : model.layers())
      for (auto& b : l.blocks) b.gate_bias.value(0, 0) = u(rng);
    const auto inputs = testing::random_family<double>(3, n, cfg.input_channels, 0.4, rng);
    model.set_screen_rows(std::numeric_limits<std::int64_t>::max());
    const auto plain = model.infer(inputs);
    model.set_screen_rows(0);
    const auto screened = model.infer(inputs);
    REQUIRE(plain.logits.rows() == screened.logits.rows());
    CHECK(*plain.logits.indices == *screened.logits.indices);
    if (plain.logits.rows() > 0)
      CHECK((plain.logits.values.value() - screened.logits.values.value()).cwiseAbs().maxCoeff() < 1e-9);
    for (std::size_t i = 0; i < plain.density.entries.size(); ++i) {
      CHECK(plain.density.entries[i].retained == screened.density.entries[i].retained);
      CHECK(screened.density.entries[i].rows <= plain.density.entries[i].rows);
      if (screened.density.entries[i].rows < plain.density.entries[i].rows) ++screened_smaller;
    }
  }
  CHECK(screened_smaller > 0);
}
