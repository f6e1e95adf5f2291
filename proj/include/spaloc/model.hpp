#pragma once

#include "spaloc/autodiff.hpp"
#include "spaloc/sparse_tensor.hpp"
#include "spaloc/sparsity.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace spaloc {

enum class Mode { Train, Infer };

struct ModelConfig {
  int depth = 5;
  int breadth = 3;
  int hidden = 8;
  double eps = 0.05;
  double lambda = 0.01;
  std::vector<int> input_channels;  // one width per arity 0..breadth
  int output_arity = 2;
  int output_channels = 1;

  /// Throws InvariantError on out-of-range fields.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Sparse tensor whose values live on a tape.
template <typename Scalar>
struct TapeTensor {
  int arity = 0;
  Index node_count = 0;
  std::shared_ptr<const IndexTable> indices;
  Var<Scalar> values;

  Index rows() const { return static_cast<Index>(indices->rows()); }
  Index channels() const { return values.cols(); }

  static TapeTensor constant(const Tape<Scalar>& tape, const SparseFeatureTensor<Scalar>& t) {
    return {t.arity(), t.node_count(), std::make_shared<const IndexTable>(t.indices()),
            tape.constant(t.values())};
  }

  SparseFeatureTensor<Scalar> detach() const {
    return SparseFeatureTensor<Scalar>::from_canonical(arity, node_count, *indices, values.value());
  }
};

/// Parameters of one arity inside a relational reasoning layer.
template <typename Scalar>
struct ArityBlock {
  Index in_width = 0;  // concatenated width before permutation
  Parameter<Scalar> main;       // (r! in_width) x hidden, no bias
  Parameter<Scalar> gate;       // (r! in_width) x 1
  Parameter<Scalar> gate_bias;  // 1 x 1
};

template <typename Scalar>
struct RRLayer {
  std::vector<ArityBlock<Scalar>> blocks;  // one per arity 0..R
};

template <typename Scalar>
struct LayerOutput {
  std::vector<TapeTensor<Scalar>> tensors;
  std::vector<Var<Scalar>> gates;
  std::vector<DensityEntry> stats;
};

/// Expanded rows above which an arity-3 top block is screened before it is
/// materialised (inference only).
inline constexpr std::int64_t kScreenRows = std::int64_t{1} << 16;

/// The rows of expand(low) that an arity-3 block without a higher arity can
/// still keep after inference pruning. For a tuple missing from the
/// same-arity input the gate logit is a sum of one term per ordered pair of
/// its nodes, so the pass test runs on scalars and only candidates (with a
/// small margin) and rows tied to the same-arity input are built. Every
/// permutation of a kept tuple whose leading pair is in `low` is listed, so
/// the permuted features of the kept tuples are exact.
template <typename Scalar>
GatherPlan plan_expand_screened(const TapeTensor<Scalar>& low, const TapeTensor<Scalar>& same,
                                const ArityBlock<Scalar>& block, double eps) {
  const Index n = low.node_count;
  const std::size_t nn = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
  const Index c_same = same.channels();
  const Index c_low = low.channels();
  const Index width = c_same + c_low;
  const auto& perms = permutations(3);
  const auto& lv = low.values.value();
  const auto& li = *low.indices;

  std::vector<Index> low_row(nn, -1);
  std::vector<char> linked(nn, 0);  // either order present
  for (Index i = 0; i < li.rows(); ++i) {
    const auto u = static_cast<std::size_t>(li(i, 0)), v = static_cast<std::size_t>(li(i, 1));
    low_row[u * n + v] = i;
    linked[u * n + v] = linked[v * n + u] = 1;
  }
  // term[i][j][u * n + v]: gate contribution of the block whose low pair sits at positions (i, j)
  std::vector<double> term[3][3];
  for (std::size_t k = 0; k < perms.size(); ++k) {
    const auto w = block.gate.value.col(0).segment(static_cast<Index>(k) * width + c_same, c_low).template cast<double>();
    auto& t = term[perms[k][0]][perms[k][1]];
    t.assign(nn, 0.0);
    for (Index i = 0; i < li.rows(); ++i)
      t[static_cast<std::size_t>(li(i, 0)) * n + li(i, 1)] = lv.row(i).template cast<double>().dot(w);
  }
  const double margin = 1e-3;
  const double cut = std::log(eps / (1 - eps)) - static_cast<double>(block.gate_bias.value(0, 0)) - margin;
  // logit - bias = base(x, y) + bx(x, z) + by(y, z)
  std::vector<double> bx(nn), by(nn);
  std::vector<double> bx_max(static_cast<std::size_t>(n), -HUGE_VAL), by_max(static_cast<std::size_t>(n), -HUGE_VAL);
  for (Index a = 0; a < n; ++a)
    for (Index z = 0; z < n; ++z) {
      const std::size_t az = static_cast<std::size_t>(a) * n + z, za = static_cast<std::size_t>(z) * n + a;
      bx[az] = term[0][2][az] + term[2][0][za];
      by[az] = term[1][2][az] + term[2][1][za];
      bx_max[a] = std::max(bx_max[a], bx[az]);
      by_max[a] = std::max(by_max[a], by[az]);
    }
  std::vector<RowKey> keys;
  std::array<Index, 3> t{}, q{};
  auto add_orbit = [&] {
    for (const auto& p : perms) {
      for (int j = 0; j < 3; ++j) q[j] = t[p[j]];
      if (low_row[static_cast<std::size_t>(q[0]) * n + q[1]] >= 0) keys.push_back(row_key(q.data(), 3, n));
    }
  };
  for (Index x = 0; x < n; ++x)
    for (Index y = 0; y < n; ++y) {
      const std::size_t xy = static_cast<std::size_t>(x) * n + y;
      const double base = term[0][1][xy] + term[1][0][static_cast<std::size_t>(y) * n + x];
      if (base + bx_max[x] + by_max[y] < cut) continue;
      const double* px = bx.data() + static_cast<std::size_t>(x) * n;
      const double* py = by.data() + static_cast<std::size_t>(y) * n;
      for (Index z = 0; z < n; ++z) {
        if (base + px[z] + py[z] < cut) continue;
        if (!linked[xy] && !linked[static_cast<std::size_t>(x) * n + z] && !linked[static_cast<std::size_t>(y) * n + z])
          continue;
        t = {x, y, z};
        add_orbit();
      }
      if (static_cast<std::int64_t>(keys.size()) > kRowCapacity)
        throw CapacityError("screened expand: candidates exceed the row capacity");
    }
  const auto& si = *same.indices;
  for (Index i = 0; i < si.rows(); ++i) {
    t = {si(i, 0), si(i, 1), si(i, 2)};
    add_orbit();
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

  GatherPlan plan;
  plan.arity = 3;
  plan.node_count = n;
  plan.indices.resize(static_cast<Index>(keys.size()), 3);
  plan.blocks.push_back({0, std::vector<Index>(keys.size())});
  for (std::size_t i = 0; i < keys.size(); ++i) {
    decode_key(keys[i], 3, n, plan.indices.row(static_cast<Index>(i)).data());
    plan.blocks[0].source[i] = low_row[static_cast<std::size_t>(plan.indices(static_cast<Index>(i), 0)) * n +
                                       plan.indices(static_cast<Index>(i), 1)];
  }
  return plan;
}

/// concat(same arity, expand(r-1), reduce(r+1)), permute, gated ReLU linear.
/// In Mode::Infer (eps > 0) rows of arity >= 1 whose gate is below eps or
/// whose features are all zero are pruned. A large arity-3 top expansion is
/// screened first (see plan_expand_screened); `screen_rows` sets the size
/// from which that happens.
template <typename Scalar>
LayerOutput<Scalar> rrl_forward(Tape<Scalar>& tape, RRLayer<Scalar>& layer,
                                const std::vector<TapeTensor<Scalar>>& in, Mode mode, double eps,
                                int layer_index = 0, std::int64_t screen_rows = kScreenRows) {
  const int R = static_cast<int>(in.size()) - 1;
  if (static_cast<int>(layer.blocks.size()) != R + 1) throw InvariantError("layer breadth differs from input");
  const Index n = in.front().node_count;
  LayerOutput<Scalar> out;
  for (int r = 0; r <= R; ++r) {
    auto& block = layer.blocks[r];
    std::vector<std::shared_ptr<const IndexTable>> part_idx;
    std::vector<Var<Scalar>> part_val;
    part_idx.push_back(in[r].indices);
    part_val.push_back(in[r].values);
    if (r >= 1) {
      const bool screen = mode == Mode::Infer && eps > 0 && r == 3 && r == R &&
                          static_cast<std::int64_t>(in[r - 1].rows()) * n > screen_rows;
      auto plan = std::make_shared<const GatherPlan>(screen ? plan_expand_screened(in[r - 1], in[r], block, eps)
                                                            : plan_expand(*in[r - 1].indices, r - 1, n));
      part_idx.push_back(std::shared_ptr<const IndexTable>(plan, &plan->indices));
      part_val.push_back(ops::gather<Scalar>(tape, plan, {in[r - 1].values}));
    }
    if (r < R) {
      auto plan = std::make_shared<const SegmentPlan>(plan_reduce(*in[r + 1].indices, r + 1, n));
      part_idx.push_back(std::shared_ptr<const IndexTable>(plan, &plan->indices));
      part_val.push_back(ops::segment_max<Scalar>(tape, plan, in[r + 1].values));
    }
    Index width = 0;
    for (const auto& v : part_val) width += v.cols();
    if (width != block.in_width) throw InvariantError("rrl: input width differs from layer configuration");

    std::vector<const IndexTable*> idx_ptrs;
    for (const auto& p : part_idx) idx_ptrs.push_back(p.get());
    auto cplan = std::make_shared<const GatherPlan>(plan_concat(idx_ptrs, r, n));
    auto concat = ops::gather<Scalar>(tape, cplan, part_val);
    auto pplan = std::make_shared<const GatherPlan>(plan_permute(cplan->indices, r, n));

    auto features = ops::relu(tape, ops::permuted_linear(tape, pplan, concat, block.main));
    auto gate = ops::sigmoid(tape, ops::permuted_linear(tape, pplan, concat, block.gate, &block.gate_bias));
    auto gated = ops::scale_rows(tape, features, gate);

    DensityEntry stat;
    stat.layer = layer_index;
    stat.arity = r;
    stat.rows = pplan->rows();
    stat.capacity = static_cast<std::int64_t>(tuple_count(r, n));
    stat.hs = hoyer_square(gate.value());

    TapeTensor<Scalar> result{r, n, std::shared_ptr<const IndexTable>(pplan, &pplan->indices), gated};
    if (mode == Mode::Infer && r >= 1 && eps > 0) {
      std::vector<Index> keep;
      keep.reserve(static_cast<std::size_t>(pplan->rows()));
      // a row of zeros is the same as an absent row, so it goes too
      const auto& gv = gated.value();
      for (Index i = 0; i < pplan->rows(); ++i)
        if (!(static_cast<double>(gate.value()(i, 0)) < eps) && (gv.row(i).array() != Scalar(0)).any())
          keep.push_back(i);
      if (static_cast<Index>(keep.size()) != pplan->rows()) {
        auto splan = std::make_shared<GatherPlan>(plan_select(*result.indices, keep));
        splan->arity = r;
        splan->node_count = n;
        std::shared_ptr<const GatherPlan> sp = splan;
        result.values = ops::gather<Scalar>(tape, sp, {gated});
        result.indices = std::shared_ptr<const IndexTable>(sp, &sp->indices);
      }
    }
    stat.retained = result.rows();
    out.stats.push_back(stat);
    out.tensors.push_back(std::move(result));
    out.gates.push_back(gate);
  }
  return out;
}

template <typename Scalar>
struct ForwardResult {
  TapeTensor<Scalar> logits;  // output head at the target arity, over retained rows
  std::vector<Var<Scalar>> gates;  // every gate table, layer-major
  DensityReport density;

  /// sigmoid of the logits.
  ValueTable<Scalar> predictions() const {
    return (Scalar(1) + (-logits.values.value().array()).exp()).inverse().matrix();
  }
};

/// Stack of relational reasoning layers plus a sigmoid output head.
template <typename Scalar>
class Model {
 public:
  Model() = default;

  Model(const ModelConfig& config, std::uint64_t seed) : config_(config) {
    config_.validate();
    std::mt19937_64 rng(seed);
    const int R = config_.breadth;
    std::vector<int> widths = config_.input_channels;
    for (int i = 0; i < config_.depth; ++i) {
      RRLayer<Scalar> layer;
      for (int r = 0; r <= R; ++r) {
        ArityBlock<Scalar> b;
        b.in_width = widths[r] + (r >= 1 ? widths[r - 1] : 0) + (r < R ? widths[r + 1] : 0);
        const Index fused = factorial(r) * b.in_width;
        const std::string prefix = "layer" + std::to_string(i) + ".arity" + std::to_string(r);
        b.main = Parameter<Scalar>(prefix + ".main", fused, config_.hidden);
        b.gate = Parameter<Scalar>(prefix + ".gate", fused, 1);
        b.gate_bias = Parameter<Scalar>(prefix + ".gate_bias", 1, 1);
        b.main.init_uniform(rng);
        b.gate.init_uniform(rng);
        b.gate_bias.value.setConstant(Scalar(1));
        layer.blocks.push_back(std::move(b));
      }
      layers_.push_back(std::move(layer));
      widths.assign(R + 1, config_.hidden);
    }
    head_ = Parameter<Scalar>("head", config_.hidden, config_.output_channels);
    head_bias_ = Parameter<Scalar>("head_bias", 1, config_.output_channels);
    head_.init_uniform(rng);
  }

  const ModelConfig& config() const { return config_; }
  /// Expanded-row count above which inference screens arity-3 expansions.
  void set_screen_rows(std::int64_t rows) { screen_rows_ = rows; }
  ModelConfig& mutable_config() { return config_; }
  std::vector<RRLayer<Scalar>>& layers() { return layers_; }
  const std::vector<RRLayer<Scalar>>& layers() const { return layers_; }
  Parameter<Scalar>& head() { return head_; }
  Parameter<Scalar>& head_bias() { return head_bias_; }
  const Parameter<Scalar>& head() const { return head_; }
  const Parameter<Scalar>& head_bias() const { return head_bias_; }

  /// Prediction for a tuple absent from the last layer (all-zero features).
  ValueTable<Scalar> absent_prediction() const {
    return (Scalar(1) + (-head_bias_.value.array()).exp()).inverse().matrix();
  }

  std::vector<Parameter<Scalar>*> parameters() {
    std::vector<Parameter<Scalar>*> ps;
    for (auto& l : layers_)
      for (auto& b : l.blocks) {
        ps.push_back(&b.main);
        ps.push_back(&b.gate);
        ps.push_back(&b.gate_bias);
      }
    ps.push_back(&head_);
    ps.push_back(&head_bias_);
    return ps;
  }

  std::vector<const Parameter<Scalar>*> parameters() const {
    std::vector<const Parameter<Scalar>*> ps;
    for (auto* p : const_cast<Model*>(this)->parameters()) ps.push_back(p);
    return ps;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto* p : parameters()) n += static_cast<std::size_t>(p->value.size());
    return n;
  }

  ForwardResult<Scalar> forward(Tape<Scalar>& tape, const ArityFamily<Scalar>& inputs, Mode mode) {
    if (inputs.breadth() != config_.breadth) throw InvariantError("input breadth differs from model breadth");
    for (int r = 0; r <= config_.breadth; ++r)
      if (inputs.tensors[r].channels() != config_.input_channels[r])
        throw InvariantError("input channels differ from model configuration");
    std::vector<TapeTensor<Scalar>> current;
    for (const auto& t : inputs.tensors) current.push_back(TapeTensor<Scalar>::constant(tape, t));
    ForwardResult<Scalar> result;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      auto out = rrl_forward(tape, layers_[i], current, mode, config_.eps, static_cast<int>(i), screen_rows_);
      for (auto& g : out.gates) result.gates.push_back(std::move(g));
      for (auto& s : out.stats) result.density.entries.push_back(s);
      current = std::move(out.tensors);
    }
    const auto& last = current[config_.output_arity];
    result.logits = {last.arity, last.node_count, last.indices,
                     ops::linear(tape, last.values, head_, &head_bias_)};
    return result;
  }

  /// Inference without recording, for evaluation.
  ForwardResult<Scalar> infer(const ArityFamily<Scalar>& inputs, Mode mode = Mode::Infer) {
    Tape<Scalar> tape(false);
    return forward(tape, inputs, mode);
  }

  template <typename To>
  Model<To> cast() const {
    Model<To> m;
    m.mutable_config() = config_;
    for (const auto& l : layers_) {
      RRLayer<To> nl;
      for (const auto& b : l.blocks)
        nl.blocks.push_back({b.in_width, b.main.template cast<To>(), b.gate.template cast<To>(),
                             b.gate_bias.template cast<To>()});
      m.layers().push_back(std::move(nl));
    }
    m.head() = head_.template cast<To>();
    m.head_bias() = head_bias_.template cast<To>();
    return m;
  }

 private:
  ModelConfig config_;
  std::int64_t screen_rows_ = kScreenRows;
  std::vector<RRLayer<Scalar>> layers_;
  Parameter<Scalar> head_;
  Parameter<Scalar> head_bias_;
};

/// Versioned binary checkpoint: "SPALOC1\0", config block, shape-tagged float blobs.
void save_checkpoint(const Model<float>& model, const std::string& path);
Model<float> load_checkpoint(const std::string& path);

}  // namespace spaloc
