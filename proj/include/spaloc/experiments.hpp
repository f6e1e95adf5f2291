#pragma once

#include "spaloc/trainer.hpp"

#include <cmath>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spaloc {

/// Least-squares slope of log(y) against log(x); needs two distinct x.
double loglog_slope(std::span<const double> x, std::span<const double> y);

struct ScalingPoint {
  std::string model;  // "sparse" or "dense"
  Index n = 0;
  std::int64_t peak_rows = 0;          // max rows kept by any table
  std::int64_t materialised_rows = 0;  // max rows built before pruning
  std::int64_t peak_bytes = 0;         // peak_rows * hidden * 4
  double seconds_per_sample = 0;
  std::string note;  // non-empty when the size was skipped

  bool skipped() const { return !note.empty(); }
};

struct ScalingReport {
  std::vector<ScalingPoint> points;
  std::optional<double> sparse_memory_exponent;
  std::optional<double> dense_memory_exponent;
  std::optional<double> sparse_time_exponent;
  std::optional<double> dense_time_exponent;
};

struct ScalingOptions {
  std::vector<Index> sizes = {50, 100, 200, 400, 800};
  std::vector<Index> dense_sizes = {20, 40, 60};
  int worlds = 2;  // averaged per size
  std::uint64_t seed = 7;
  double parent_prob = 0.85;
};

/// Inference cost of a trained model on fresh worlds of each size, for the
/// sparse model and the dense reference. Sizes beyond a capacity guard are
/// kept as skipped points and left out of the fits.
ScalingReport bench_scaling(Model<float>& model, const ScalingOptions& opt, std::ostream* log = nullptr);

/// Columns model,N,peak_rows,materialised_rows,peak_bytes,seconds_per_sample,note.
void write_scaling_csv(std::ostream& os, const ScalingReport& report);
/// Columns series,x,y with series memory_sparse, memory_dense, time_sparse, time_dense.
void write_scaling_plot(std::ostream& os, const ScalingReport& report);

/// Mean MIS (percent) of `samples` subgraphs of size ns drawn from fresh
/// family worlds of size n, with paths up to tau hops.
double sampler_mis(SamplerKind kind, Index n, Index ns, int tau, int samples, std::uint64_t seed,
                   double parent_prob = 0.85);

enum class AblationKind { Samplers, LabelAdjust, SparsityLoss };
AblationKind parse_ablation_kind(const std::string& name);
const char* ablation_kind_name(AblationKind kind);

struct AblationOptions {
  RunConfig base;  // shared settings and seed
  std::vector<std::string> tasks;
  std::vector<SamplerKind> samplers;
  std::vector<LabelMode> labels;
  std::vector<SparsityLoss> losses;
  std::vector<Index> sizes;  // training domain sizes (samplers)
  int mis_samples = 20;
  bool train = true;  // false: samplers ablation reports MIS only
};

/// The grid of the published tables for each kind, at desk-scale budgets.
AblationOptions default_ablation(AblationKind kind);

struct AblationCell {
  std::string task;
  SamplerKind sampler = SamplerKind::Neighbor;
  LabelMode label = LabelMode::IS;
  SparsityLoss sparsity = SparsityLoss::HS;
  Index n = 0;   // training domain size
  Index ns = 0;  // subgraph size
  double accuracy = std::nan("");
  double density_percent = std::nan("");
  double mis_percent = std::nan("");
  int epochs = 0;
};

/// Trains one model per grid cell; every cell uses base.seed.
std::vector<AblationCell> run_ablation(AblationKind kind, const AblationOptions& opt, std::ostream* log = nullptr);

/// Columns task,sampler,label,sparsity,N,accuracy,density_percent,mis_percent,epochs.
void write_ablation_csv(std::ostream& os, const std::vector<AblationCell>& cells);
/// Plain-text table laid out like the published one for the kind.
void write_ablation_table(std::ostream& os, AblationKind kind, const std::vector<AblationCell>& cells);

}  // namespace spaloc
