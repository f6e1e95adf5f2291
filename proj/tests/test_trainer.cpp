#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "spaloc/dense_reference.hpp"
#include "spaloc/kg.hpp"
#include "spaloc/trainer.hpp"
#include "test_support.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace spaloc;

namespace {

RunConfig tiny(const std::string& task) {
  RunConfig cfg;
  cfg.task = task;
  cfg.epochs = 2;
  cfg.iters = 2;
  cfg.batch = 2;
  cfg.train_n = 8;
  cfg.train_worlds = 4;
  cfg.valid_n = 8;
  cfg.valid_worlds = 2;
  cfg.test_n = 10;
  cfg.test_worlds = 1;
  cfg.subgraph = 8;
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("config text round trip") {
  RunConfig cfg;
  cfg.task = "Uncle";
  cfg.lambda = 0.125;
  cfg.sparsity = SparsityLoss::L2;
  cfg.sampler = SamplerKind::Walk;
  cfg.label = LabelMode::LS;
  cfg.seed = 77;
  cfg.stop_at_perfect = false;
  cfg.out = "runs/x";
  std::stringstream s;
  cfg.write(s);
  const auto back = RunConfig::read(s);
  std::stringstream again;
  back.write(again);
  CHECK(again.str() == s.str());
  CHECK(back.sampler == SamplerKind::Walk);
  CHECK(back.lambda == 0.125);
}

TEST_CASE("config errors name the key and line") {
  std::istringstream bad("depth = 3\n# comment\nwidth = 4\n");
  try {
    RunConfig::read(bad);
    FAIL("accepted an unknown key");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("width") != std::string::npos);
  }
  RunConfig cfg;
  CHECK_THROWS_AS(cfg.apply_override("depth=three"), std::invalid_argument);
  CHECK_THROWS_AS(cfg.apply_override("depth"), std::invalid_argument);
  CHECK_THROWS_AS(cfg.apply_override("sampler=bfs"), std::invalid_argument);
  cfg.apply_override(" hidden = 16 ");
  CHECK(cfg.hidden == 16);
  CHECK(cfg.effective_tau() == 2);
  cfg.task = "HasFather";
  CHECK(cfg.effective_tau() == 1);
}

TEST_CASE("example loss equals mean BCE over every tuple of the dense reference") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 3 + trial % 3;
    ModelConfig mc;
    mc.depth = 2;
    mc.breadth = 2;
    mc.hidden = 3;
    mc.eps = 0;
    mc.input_channels = {0, 1, 2};
    mc.output_arity = 2;
    Model<float> model(mc, static_cast<std::uint64_t>(trial));
    Example ex;
    ex.arity = 2;
    ex.inputs = testing::random_family<float>(2, n, mc.input_channels, 0.3, rng);
    // labelled tuples, some of them absent from the sparse output
    std::uniform_real_distribution<float> u(0, 1);
    std::set<RowKey> used;
    for (int k = 0; k < 4; ++k) {
      std::vector<Index> t = {static_cast<Index>(rng() % n), static_cast<Index>(rng() % n)};
      if (!used.insert(row_key(t.data(), 2, n)).second) continue;
      ex.tuples.push_back(t);
      ex.labels.push_back(u(rng));
    }
    Tape<float> tape;
    const auto parts = example_loss(tape, model, ex, SparsityLoss::None, 0.0);

    const auto dense = dense_reference_forward(model, ex.inputs);
    std::vector<double> target(static_cast<std::size_t>(n * n), 0.0);
    for (std::size_t i = 0; i < ex.tuples.size(); ++i)
      target[static_cast<std::size_t>(row_key(ex.tuples[i].data(), 2, n))] = ex.labels[i];
    double sum = 0;
    for (Index row = 0; row < n * n; ++row) {
      const double p = dense.predictions(row, 0);
      const double t = target[static_cast<std::size_t>(row)];
      sum += -(t * std::log(p) + (1 - t) * std::log(1 - p));
    }
    CHECK(parts.task == doctest::Approx(sum / static_cast<double>(n * n)).epsilon(1e-4));
    CHECK(parts.total.scalar() == doctest::Approx(parts.task).epsilon(1e-5));
  }
}

TEST_CASE("unsupervised tuples stay out of the loss") {
  std::mt19937_64 rng(5);
  ModelConfig mc;
  mc.depth = 1;
  mc.breadth = 2;
  mc.hidden = 2;
  mc.input_channels = {0, 1, 2};
  mc.output_arity = 2;
  mc.output_channels = 3;
  Model<float> model(mc, 1);
  Example ex;
  ex.inputs = testing::random_family<float>(2, 4, mc.input_channels, 0.5, rng);
  ex.others_negative = false;
  ex.tuples = {{1, 2}};
  ex.labels = {1.0f};
  ex.channels = {2};
  Tape<float> tape;
  const auto parts = example_loss(tape, model, ex, SparsityLoss::None, 0.0);
  const auto dense = dense_reference_forward(model, ex.inputs);
  const double p = dense.predictions(1 * 4 + 2, 2);
  CHECK(parts.task == doctest::Approx(-std::log(p)).epsilon(1e-4));
  ex.channels = {3};
  Tape<float> tape2;
  CHECK_THROWS_AS(example_loss(tape2, model, ex, SparsityLoss::None, 0.0), InvariantError);
}

TEST_CASE("the sparsity term is added with weight lambda") {
  std::mt19937_64 rng(9);
  RunConfig cfg = tiny("HasSister");
  FamilySource src(cfg);
  Model<float> model(src.model_config(cfg), 2);
  const auto ex = src.sample(rng);
  for (auto s : {SparsityLoss::L1, SparsityLoss::L2, SparsityLoss::HS}) {
    Tape<float> tape;
    const auto parts = example_loss(tape, model, ex, s, 0.5);
    CHECK(parts.reg > 0);
    CHECK(parts.total.scalar() == doctest::Approx(parts.task + 0.5 * parts.reg).epsilon(1e-5));
  }
}

TEST_CASE("subgraph examples carry adjusted labels within range") {
  RunConfig cfg = tiny("Grandparent");
  cfg.train_n = 40;
  cfg.subgraph = 10;
  FamilySource src(cfg);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) {
    const auto ex = src.sample(rng);
    CHECK(ex.inputs.node_count() == 10);
    for (std::size_t k = 0; k < ex.tuples.size(); ++k) {
      CHECK(ex.labels[k] >= 0.0f);
      CHECK(ex.labels[k] <= 1.0f);
      for (Index v : ex.tuples[k]) CHECK(v < 10);
    }
  }
}

TEST_CASE("identical configs give bit-identical metrics and checkpoints") {
  const auto base = std::filesystem::temp_directory_path() / "spaloc_trainer_test";
  std::filesystem::remove_all(base);
  std::string metrics[2], ckpt[2];
  for (int k = 0; k < 2; ++k) {
    RunConfig cfg = tiny("HasFather");
    cfg.out = (base / std::to_string(k)).string();
    auto src = make_source(cfg);
    const auto result = train(cfg, *src);
    write_run(cfg, *src, result);
    metrics[k] = slurp(cfg.out + "/metrics.csv");
    ckpt[k] = slurp(cfg.out + "/model.ckpt");
    CHECK(std::filesystem::exists(cfg.out + "/timing.csv"));
    CHECK(slurp(cfg.out + "/config.txt").find("# input_hash = ") != std::string::npos);
  }
  CHECK(!metrics[0].empty());
  CHECK(metrics[0] == metrics[1]);
  CHECK(ckpt[0] == ckpt[1]);
  std::filesystem::remove_all(base);
}

TEST_CASE("metrics rows: train and valid per epoch, then test") {
  RunConfig cfg = tiny("HasFather");
  cfg.stop_at_perfect = false;
  auto src = make_source(cfg);
  const auto result = train(cfg, *src);
  REQUIRE(result.rows.size() == 5);
  CHECK(result.rows[0].split == "train");
  CHECK(result.rows[1].split == "valid");
  CHECK(result.rows[4].split == "test");
  for (const auto& r : result.rows) {
    if (!std::isnan(r.accuracy)) {
      CHECK(r.accuracy >= 0);
      CHECK(r.accuracy <= 100);
    }
    CHECK(r.peak_bytes >= 0);
    CHECK(r.seconds_per_sample >= 0);
  }
  CHECK(result.test.peak_bytes == result.test.peak_rows * cfg.hidden * 4);
  CHECK(result.test.materialised_rows >= result.test.peak_rows);
}

TEST_CASE("a diverging run reports the step") {
  RunConfig cfg = tiny("HasFather");
  cfg.lr = std::nan("");
  auto src = make_source(cfg);
  CHECK_THROWS_AS(train(cfg, *src), DivergenceError);
}

TEST_CASE("knowledge-graph query examples hide the queried triple") {
  auto kg = synthetic_family_kg(40, 1, 1, 3);
  KGView view(kg.train);
  std::mt19937_64 rng(4);
  for (int i = 0; i < 30; ++i) {
    const auto& q = kg.train.triples[static_cast<std::size_t>(rng() % kg.train.triples.size())];
    const auto ex = kg_query_example(view, q, 1.0f, 3, 4, 12, 3, rng);
    REQUIRE(ex.tuples.size() == 1);
    CHECK(ex.channels[0] == q.relation);
    CHECK_FALSE(ex.others_negative);
    CHECK(ex.inputs.node_count() <= 12);
    const auto& pairs = ex.inputs.tensors[2];
    const auto key = row_key(ex.tuples[0].data(), 2, ex.inputs.node_count());
    const auto keys = row_keys(pairs.indices(), ex.inputs.node_count());
    for (std::size_t r = 0; r < keys.size(); ++r)
      if (keys[r] == key) CHECK(pairs.values()(static_cast<Index>(r), q.relation) == 0.0f);
  }
}

TEST_CASE("corruptions are absent from the graph") {
  auto kg = synthetic_family_kg(30, 1, 1, 8);
  std::mt19937_64 rng(2);
  for (const auto& t : kg.train.triples) {
    const auto c = corrupt(kg.train, t, rng);
    CHECK(c.relation == t.relation);
    CHECK_FALSE(kg.train.contains(c));
  }
}
