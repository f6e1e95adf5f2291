#pragma once

#include "spaloc/family_tree.hpp"
#include "spaloc/metrics.hpp"
#include "spaloc/model.hpp"
#include "spaloc/sampling.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace spaloc {

enum class SparsityLoss { None, L1, L2, HS };
SparsityLoss parse_sparsity_loss(const std::string& name);
const char* sparsity_loss_name(SparsityLoss s);

/// Everything that determines a run. Text form is flat `key = value` lines;
/// '#' starts a comment.
struct RunConfig {
  std::string task = "Grandparent";  // a family task, or "kg"
  std::string train_triples;          // kg only
  std::string test_triples;           // kg only
  int depth = 5;
  int breadth = 3;
  int hidden = 8;
  double eps = 0.05;
  double lambda = 0.01;
  SparsityLoss sparsity = SparsityLoss::HS;
  SamplerKind sampler = SamplerKind::Neighbor;
  Index subgraph = 20;
  LabelMode label = LabelMode::IS;
  double alpha = 0.9;
  int tau = -1;  // -1: the task default
  int path_budget = 8;  // kg path sampler walks per query
  int epochs = 200;
  int iters = 20;  // optimiser steps per epoch
  int batch = 8;
  double lr = 0.005;
  std::uint64_t seed = 1;
  Index train_n = 20;
  int train_worlds = 64;
  Index valid_n = 20;
  int valid_worlds = 8;
  Index test_n = 100;
  int test_worlds = 4;
  double parent_prob = 0.85;
  int queries = 100;  // kg: test queries scored; a quarter of that for validation
  int patience = 0;  // >0: also stop after this many epochs without validation gain
  bool stop_at_perfect = true;
  std::string out;

  int effective_tau() const;
  ModelConfig model_config(std::vector<int> input_channels, int output_arity, int output_channels = 1) const;

  /// Throws std::invalid_argument naming the key on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  /// "key=value".
  void apply_override(const std::string& assignment);
  void write(std::ostream& os) const;
  static RunConfig read(std::istream& is);
  static RunConfig read_file(const std::string& path);
};

/// Knowledge-graph defaults: depth 6, hidden 64, tau 3.
RunConfig kg_defaults();

/// One supervised subgraph. Listed tuples carry (possibly soft) labels on
/// one output channel each (channel 0 when `channels` is empty); when
/// `others_negative` every unlisted (tuple, channel) of the target arity is
/// a negative, otherwise unlisted entries are unsupervised.
struct Example {
  ArityFamily<float> inputs;
  int arity = 2;
  std::vector<std::vector<Index>> tuples;
  std::vector<float> labels;
  std::vector<int> channels;
  bool others_negative = true;
};

struct LossParts {
  Var<float> total;
  double task = 0;
  double reg = 0;
};

/// BCE on logits over the output rows, plus lambda times the sparsity term
/// over every gate table. Tuples missing from the sparse output have the
/// head-bias logit and enter the loss through it.
LossParts example_loss(Tape<float>& tape, Model<float>& model, const Example& ex, SparsityLoss sparsity,
                       double lambda);

/// Results of evaluating a model on a set of graphs.
struct Evaluation {
  ClassCounts counts;
  double accuracy = 0;
  double auc_pr = 0;
  double hit10 = 0;
  double density_percent = 0;
  std::int64_t peak_rows = 0;          // max retained rows in any table
  std::int64_t materialised_rows = 0;  // max rows built before pruning
  std::int64_t peak_bytes = 0;         // peak_rows * hidden * 4
  double seconds_per_sample = 0;
};

/// Training data and evaluation sets behind a run.
class TaskSource {
 public:
  virtual ~TaskSource() = default;
  virtual ModelConfig model_config(const RunConfig& cfg) const = 0;
  virtual Example sample(std::mt19937_64& rng) = 0;
  virtual Evaluation validate(Model<float>& model) = 0;
  virtual Evaluation test(Model<float>& model) = 0;
  /// Content hash of the generated or loaded inputs.
  virtual std::uint64_t input_hash() const = 0;
  /// Extra files a run directory needs for later evaluation.
  virtual void write_artifacts(const std::string& /*dir*/) const {}
};

/// Family-tree task: a pool of training worlds of size train_n. When
/// train_n exceeds the subgraph size each example is a sampled subgraph with
/// adjusted labels, otherwise the whole world.
class FamilySource : public TaskSource {
 public:
  explicit FamilySource(const RunConfig& cfg);
  ModelConfig model_config(const RunConfig& cfg) const override;
  Example sample(std::mt19937_64& rng) override;
  Evaluation validate(Model<float>& model) override;
  Evaluation test(Model<float>& model) override;
  std::uint64_t input_hash() const override;

  const TaskSpec& spec() const { return spec_; }

 private:
  struct World {
    FamilyTree tree;
    Hypergraph graph;
    std::vector<std::vector<Index>> positives;
    std::unique_ptr<PathCounter> counter;
  };
  World& world(int i);

  RunConfig cfg_;
  TaskSpec spec_;
  std::vector<std::unique_ptr<World>> train_;
  std::vector<FamilyTree> valid_;
  std::vector<FamilyTree> test_;
};

/// Full-graph relation prediction of a family task on the given worlds.
Evaluation evaluate_family(Model<float>& model, const std::vector<FamilyTree>& worlds, Task task);

/// Worlds used for validation (split 1) and test (split 2); seeds never
/// overlap the training pool.
std::vector<FamilyTree> family_worlds(const RunConfig& cfg, int split, Index n, int count);

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainResult {
  Model<float> model;  // best on validation
  std::vector<MetricsRow> rows;
  Evaluation test;
  int epochs = 0;
  int best_epoch = 0;
  double best_valid = -1;
  double seconds = 0;
};

/// Adam on batches of examples. Stops when validation accuracy reaches 100,
/// after `epochs`, or after `patience` epochs without improvement. Throws
/// DivergenceError on a non-finite loss.
TrainResult train(const RunConfig& cfg, TaskSource& source, std::ostream* log = nullptr);

std::unique_ptr<TaskSource> make_source(const RunConfig& cfg);

/// Writes config.txt (with input hash), metrics.csv, timing.csv and
/// model.ckpt under cfg.out, plus whatever the source needs to evaluate later.
void write_run(const RunConfig& cfg, const TaskSource& source, const TrainResult& result);

}  // namespace spaloc
