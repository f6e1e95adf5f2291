#pragma once

#include "spaloc/sparse_tensor.hpp"

#include <cmath>
#include <functional>
#include <iostream>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace spaloc {

/// A trainable weight matrix with its gradient accumulator and Adam moments.
template <typename Scalar>
struct Parameter {
  std::string name;
  ValueTable<Scalar> value;
  ValueTable<Scalar> grad;
  ValueTable<Scalar> m;
  ValueTable<Scalar> v;
  bool has_grad = false;

  Parameter() = default;
  Parameter(std::string n, Index rows, Index cols)
      : name(std::move(n)),
        value(ValueTable<Scalar>::Zero(rows, cols)),
        grad(ValueTable<Scalar>::Zero(rows, cols)),
        m(ValueTable<Scalar>::Zero(rows, cols)),
        v(ValueTable<Scalar>::Zero(rows, cols)) {}

  Index rows() const { return static_cast<Index>(value.rows()); }
  Index cols() const { return static_cast<Index>(value.cols()); }

  void zero_grad() {
    grad.setZero();
    has_grad = false;
  }

  /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] with fan_in = rows.
  void init_uniform(std::mt19937_64& rng) {
    const double bound = rows() > 0 ? 1.0 / std::sqrt(static_cast<double>(rows())) : 0.0;
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Index i = 0; i < value.size(); ++i) value.data()[i] = static_cast<Scalar>(dist(rng));
  }

  template <typename To>
  Parameter<To> cast() const {
    Parameter<To> p;
    p.name = name;
    p.value = value.template cast<To>();
    p.grad = grad.template cast<To>();
    p.m = m.template cast<To>();
    p.v = v.template cast<To>();
    p.has_grad = has_grad;
    return p;
  }
};

template <typename Scalar>
struct TapeNode {
  ValueTable<Scalar> value;
  ValueTable<Scalar> grad;
  std::function<void(TapeNode&)> backward;

  /// Zero-initialised gradient of this node's shape.
  ValueTable<Scalar>& grad_buffer() {
    if (grad.rows() != value.rows() || grad.cols() != value.cols())
      grad = ValueTable<Scalar>::Zero(value.rows(), value.cols());
    return grad;
  }
};

/// Handle to a recorded value table.
template <typename Scalar>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<TapeNode<Scalar>> node) : node_(std::move(node)) {}

  const ValueTable<Scalar>& value() const { return node_->value; }
  const ValueTable<Scalar>& grad() const { return node_->grad; }
  Index rows() const { return static_cast<Index>(node_->value.rows()); }
  Index cols() const { return static_cast<Index>(node_->value.cols()); }
  Scalar scalar() const { return node_->value(0, 0); }
  const std::shared_ptr<TapeNode<Scalar>>& node() const { return node_; }
  bool valid() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<TapeNode<Scalar>> node_;
};

/// Ordered record of value-table ops. When not recording, ops compute values
/// only and hold no references to their inputs.
template <typename Scalar>
class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}

  bool recording() const { return record_; }

  Var<Scalar> constant(ValueTable<Scalar> value) const {
    auto node = std::make_shared<TapeNode<Scalar>>();
    node->value = std::move(value);
    return Var<Scalar>(std::move(node));
  }

  /// `backward` reads the node's gradient and accumulates into its inputs.
  Var<Scalar> push(ValueTable<Scalar> value, std::function<void(TapeNode<Scalar>&)> backward) {
    auto node = std::make_shared<TapeNode<Scalar>>();
    node->value = std::move(value);
    if (record_) {
      node->backward = std::move(backward);
      nodes_.push_back(node);
    }
    return Var<Scalar>(std::move(node));
  }

  /// Seeds d(loss)=1 and runs every recorded backward in reverse order.
  void backward(const Var<Scalar>& loss) {
    if (loss.rows() != 1 || loss.cols() != 1) throw InvariantError("backward needs a scalar loss");
    loss.node()->grad_buffer().setOnes();
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      TapeNode<Scalar>& n = **it;
      if (n.grad.size() == 0 || !n.backward) continue;
      n.backward(n);
    }
  }

  std::size_t size() const { return nodes_.size(); }

  void clear() { nodes_.clear(); }

 private:
  bool record_;
  std::vector<std::shared_ptr<TapeNode<Scalar>>> nodes_;
};

namespace ops {

template <typename Scalar>
using NodePtr = std::shared_ptr<TapeNode<Scalar>>;

/// Gathers channel blocks from several inputs into one table.
template <typename Scalar>
Var<Scalar> gather(Tape<Scalar>& tape, std::shared_ptr<const GatherPlan> plan,
                   const std::vector<Var<Scalar>>& inputs) {
  std::vector<const ValueTable<Scalar>*> vals;
  for (const auto& in : inputs) vals.push_back(&in.value());
  auto out = apply_gather<Scalar>(*plan, vals);
  if (!tape.recording()) return tape.constant(std::move(out));
  std::vector<NodePtr<Scalar>> parents;
  for (const auto& in : inputs) parents.push_back(in.node());
  return tape.push(std::move(out), [plan, parents](TapeNode<Scalar>& self) {
    Index offset = 0;
    for (const auto& b : plan->blocks) {
      auto& p = *parents[b.input];
      const Index w = static_cast<Index>(p.value.cols());
      if (w > 0 && p.value.rows() > 0) {
        auto& g = p.grad_buffer();
        for (Index i = 0; i < plan->rows(); ++i) {
          const Index s = b.source[i];
          if (s >= 0) g.row(s) += self.grad.row(i).segment(offset, w);
        }
      }
      offset += w;
    }
  });
}

/// Segment max; the subgradient goes to the first maximal row.
template <typename Scalar>
Var<Scalar> segment_max(Tape<Scalar>& tape, std::shared_ptr<const SegmentPlan> plan,
                        const Var<Scalar>& x) {
  if (!tape.recording()) return tape.constant(apply_segment_max(*plan, x.value()));
  auto argmax = std::make_shared<IndexTable>();
  auto out = apply_segment_max(*plan, x.value(), argmax.get());
  auto parent = x.node();
  return tape.push(std::move(out), [argmax, parent](TapeNode<Scalar>& self) {
    auto& g = parent->grad_buffer();
    for (Index s = 0; s < argmax->rows(); ++s)
      for (Index c = 0; c < argmax->cols(); ++c) g((*argmax)(s, c), c) += self.grad(s, c);
  });
}

/// x W (+ b). `bias` may be null.
template <typename Scalar>
Var<Scalar> linear(Tape<Scalar>& tape, const Var<Scalar>& x, Parameter<Scalar>& weight,
                   Parameter<Scalar>* bias = nullptr) {
  if (x.cols() != weight.rows()) throw InvariantError("linear: input width differs from weight rows");
  ValueTable<Scalar> out(x.rows(), weight.cols());
  if (x.cols() == 0 || x.rows() == 0) out.setZero();
  else out.noalias() = x.value() * weight.value;
  if (bias) out.rowwise() += bias->value.row(0);
  if (!tape.recording()) return tape.constant(std::move(out));
  auto parent = x.node();
  Parameter<Scalar>* w = &weight;
  return tape.push(std::move(out), [parent, w, bias](TapeNode<Scalar>& self) {
    if (parent->value.rows() > 0 && parent->value.cols() > 0) {
      w->grad.noalias() += parent->value.transpose() * self.grad;
      parent->grad_buffer().noalias() += self.grad * w->value.transpose();
    }
    w->has_grad = true;
    if (bias) {
      bias->grad.row(0) += self.grad.colwise().sum();
      bias->has_grad = true;
    }
  });
}

template <typename Scalar>
Var<Scalar> relu(Tape<Scalar>& tape, const Var<Scalar>& x) {
  ValueTable<Scalar> out = x.value().cwiseMax(Scalar(0));
  if (!tape.recording()) return tape.constant(std::move(out));
  auto parent = x.node();
  return tape.push(std::move(out), [parent](TapeNode<Scalar>& self) {
    auto& g = parent->grad_buffer();
    g.array() += (parent->value.array() > Scalar(0)).template cast<Scalar>() * self.grad.array();
  });
}

template <typename Scalar>
Var<Scalar> sigmoid(Tape<Scalar>& tape, const Var<Scalar>& x) {
  ValueTable<Scalar> out = (Scalar(1) + (-x.value().array()).exp()).inverse().matrix();
  if (!tape.recording()) return tape.constant(std::move(out));
  auto parent = x.node();
  return tape.push(std::move(out), [parent](TapeNode<Scalar>& self) {
    auto& g = parent->grad_buffer();
    g.array() += self.grad.array() * self.value.array() * (Scalar(1) - self.value.array());
  });
}

/// Multiplies every row of x by the matching entry of the column g.
template <typename Scalar>
Var<Scalar> scale_rows(Tape<Scalar>& tape, const Var<Scalar>& x, const Var<Scalar>& g) {
  if (g.cols() != 1 || g.rows() != x.rows()) throw InvariantError("scale_rows: gate shape mismatch");
  ValueTable<Scalar> out = (x.value().array().colwise() * g.value().col(0).array()).matrix();
  if (!tape.recording()) return tape.constant(std::move(out));
  auto px = x.node();
  auto pg = g.node();
  return tape.push(std::move(out), [px, pg](TapeNode<Scalar>& self) {
    if (px->value.cols() > 0) {
      px->grad_buffer().array() += self.grad.array().colwise() * pg->value.col(0).array();
      pg->grad_buffer().col(0).array() += (self.grad.array() * px->value.array()).rowwise().sum();
    } else {
      pg->grad_buffer();
    }
  });
}

/// Columns [begin, begin+count) of x.
template <typename Scalar>
Var<Scalar> slice_cols(Tape<Scalar>& tape, const Var<Scalar>& x, Index begin, Index count) {
  ValueTable<Scalar> out = x.value().middleCols(begin, count);
  if (!tape.recording()) return tape.constant(std::move(out));
  auto parent = x.node();
  return tape.push(std::move(out), [parent, begin, count](TapeNode<Scalar>& self) {
    parent->grad_buffer().middleCols(begin, count) += self.grad;
  });
}

/// Fused permute + linear: out[i] = sum_k x[src_k(i)] W_k, where W_k is the
/// k-th row block of `weight` (one block per gather block of `plan`).
/// Equivalent to linear(gather(plan, {x}), weight) without materialising the
/// r!-wide intermediate.
template <typename Scalar>
Var<Scalar> permuted_linear(Tape<Scalar>& tape, std::shared_ptr<const GatherPlan> plan,
                            const Var<Scalar>& x, Parameter<Scalar>& weight,
                            Parameter<Scalar>* bias = nullptr) {
  const Index w = x.cols();
  const Index out_cols = weight.cols();
  const Index nblocks = static_cast<Index>(plan->blocks.size());
  if (weight.rows() != w * nblocks) throw InvariantError("permuted_linear: weight rows mismatch");
  ValueTable<Scalar> out = ValueTable<Scalar>::Zero(plan->rows(), out_cols);
  // all blocks side by side, so one product serves every permutation
  ValueTable<Scalar> wcat(w, nblocks * out_cols);
  for (Index k = 0; k < nblocks; ++k) wcat.middleCols(k * out_cols, out_cols) = weight.value.middleRows(k * w, w);
  if (w > 0 && x.rows() > 0) {
    ValueTable<Scalar> z;
    z.noalias() = x.value() * wcat;
    for (Index k = 0; k < nblocks; ++k) {
      const auto& src = plan->blocks[k].source;
      for (Index i = 0; i < plan->rows(); ++i)
        if (src[i] >= 0) out.row(i) += z.row(src[i]).segment(k * out_cols, out_cols);
    }
  }
  if (bias) out.rowwise() += bias->value.row(0);
  if (!tape.recording()) return tape.constant(std::move(out));
  auto parent = x.node();
  Parameter<Scalar>* wp = &weight;
  return tape.push(std::move(out), [plan, parent, wp, bias, w, nblocks, wcat = std::move(wcat)](TapeNode<Scalar>& self) {
    wp->has_grad = true;
    if (bias) {
      bias->grad.row(0) += self.grad.colwise().sum();
      bias->has_grad = true;
    }
    if (w == 0 || parent->value.rows() == 0) return;
    const Index oc = self.grad.cols();
    ValueTable<Scalar> dz = ValueTable<Scalar>::Zero(parent->value.rows(), nblocks * oc);
    for (Index k = 0; k < nblocks; ++k) {
      const auto& src = plan->blocks[k].source;
      for (Index i = 0; i < plan->rows(); ++i)
        if (src[i] >= 0) dz.row(src[i]).segment(k * oc, oc) += self.grad.row(i);
    }
    ValueTable<Scalar> gw;
    gw.noalias() = parent->value.transpose() * dz;
    for (Index k = 0; k < nblocks; ++k) wp->grad.middleRows(k * w, w) += gw.middleCols(k * oc, oc);
    parent->grad_buffer().noalias() += dz * wcat.transpose();
  });
}

/// a + c * b for 1x1 values.
template <typename Scalar>
Var<Scalar> add_scaled(Tape<Scalar>& tape, const Var<Scalar>& a, const Var<Scalar>& b, Scalar c) {
  ValueTable<Scalar> out(1, 1);
  out(0, 0) = a.scalar() + c * b.scalar();
  if (!tape.recording()) return tape.constant(std::move(out));
  auto pa = a.node();
  auto pb = b.node();
  return tape.push(std::move(out), [pa, pb, c](TapeNode<Scalar>& self) {
    pa->grad_buffer()(0, 0) += self.grad(0, 0);
    pb->grad_buffer()(0, 0) += c * self.grad(0, 0);
  });
}

/// Mean binary cross-entropy on probabilities clamped to [1e-7, 1-1e-7].
/// Empty input gives 0.
template <typename Scalar>
Var<Scalar> bce(Tape<Scalar>& tape, const Var<Scalar>& pred, std::shared_ptr<const ValueTable<Scalar>> target) {
  constexpr double kClamp = 1e-7;
  const Index n = pred.rows();
  if (target->rows() != n || pred.cols() != target->cols()) throw InvariantError("bce: shape mismatch");
  const Index count = n * pred.cols();
  ValueTable<Scalar> out = ValueTable<Scalar>::Zero(1, 1);
  if (count == 0) return tape.constant(std::move(out));
  double sum = 0;
  for (Index i = 0; i < count; ++i) {
    const double p = std::clamp(static_cast<double>(pred.value().data()[i]), kClamp, 1 - kClamp);
    const double t = static_cast<double>(target->data()[i]);
    sum -= t * std::log(p) + (1 - t) * std::log(1 - p);
  }
  out(0, 0) = static_cast<Scalar>(sum / count);
  if (!tape.recording()) return tape.constant(std::move(out));
  auto parent = pred.node();
  return tape.push(std::move(out), [parent, target, count](TapeNode<Scalar>& self) {
    auto& g = parent->grad_buffer();
    const double scale = static_cast<double>(self.grad(0, 0)) / count;
    for (Index i = 0; i < count; ++i) {
      const double raw = static_cast<double>(parent->value.data()[i]);
      if (raw < kClamp || raw > 1 - kClamp) continue;
      const double t = static_cast<double>(target->data()[i]);
      g.data()[i] += static_cast<Scalar>(scale * (raw - t) / (raw * (1 - raw)));
    }
  });
}

/// Mean binary cross-entropy computed from logits: softplus(z) - t z.
/// Same value as bce(sigmoid(z), t) without saturation.
template <typename Scalar>
Var<Scalar> bce_with_logits(Tape<Scalar>& tape, const Var<Scalar>& logits,
                            std::shared_ptr<const ValueTable<Scalar>> target,
                            std::shared_ptr<const ValueTable<Scalar>> weight = nullptr) {
  const Index count = logits.rows() * logits.cols();
  if (target->rows() != logits.rows() || target->cols() != logits.cols())
    throw InvariantError("bce_with_logits: shape mismatch");
  ValueTable<Scalar> out = ValueTable<Scalar>::Zero(1, 1);
  if (count == 0) return tape.constant(std::move(out));
  double sum = 0;
  double total_weight = 0;
  for (Index i = 0; i < count; ++i) {
    const double z = static_cast<double>(logits.value().data()[i]);
    const double t = static_cast<double>(target->data()[i]);
    const double wgt = weight ? static_cast<double>(weight->data()[i]) : 1.0;
    sum += wgt * (std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z))));
    total_weight += wgt;
  }
  if (total_weight <= 0) return tape.constant(std::move(out));
  out(0, 0) = static_cast<Scalar>(sum / total_weight);
  if (!tape.recording()) return tape.constant(std::move(out));
  auto parent = logits.node();
  return tape.push(std::move(out), [parent, target, weight, count, total_weight](TapeNode<Scalar>& self) {
    auto& g = parent->grad_buffer();
    const double scale = static_cast<double>(self.grad(0, 0)) / total_weight;
    for (Index i = 0; i < count; ++i) {
      const double z = static_cast<double>(parent->value.data()[i]);
      const double p = 1.0 / (1.0 + std::exp(-z));
      const double wgt = weight ? static_cast<double>(weight->data()[i]) : 1.0;
      g.data()[i] += static_cast<Scalar>(scale * wgt * (p - static_cast<double>(target->data()[i])));
    }
  });
}

/// Sum over gate tables of H_S, divided by the total number of entries.
/// All-zero tables count as H_S = 1; empty tables contribute nothing.
template <typename Scalar>
Var<Scalar> hoyer_square_density(Tape<Scalar>& tape, const std::vector<Var<Scalar>>& gates) {
  double hs_sum = 0;
  double size_sum = 0;
  std::vector<std::pair<double, double>> moments;  // (sum |x|, sum x^2)
  for (const auto& g : gates) {
    const auto& v = g.value();
    const double s1 = v.template cast<double>().cwiseAbs().sum();
    const double s2 = v.template cast<double>().squaredNorm();
    moments.emplace_back(s1, s2);
    if (v.size() == 0) continue;
    size_sum += static_cast<double>(v.size());
    hs_sum += s2 > 0 ? s1 * s1 / s2 : 1.0;
  }
  ValueTable<Scalar> out = ValueTable<Scalar>::Zero(1, 1);
  if (size_sum == 0) return tape.constant(std::move(out));
  out(0, 0) = static_cast<Scalar>(hs_sum / size_sum);
  if (!tape.recording()) return tape.constant(std::move(out));
  std::vector<NodePtr<Scalar>> parents;
  for (const auto& g : gates) parents.push_back(g.node());
  return tape.push(std::move(out), [parents, moments, size_sum](TapeNode<Scalar>& self) {
    const double scale = static_cast<double>(self.grad(0, 0)) / size_sum;
    for (std::size_t t = 0; t < parents.size(); ++t) {
      auto& p = *parents[t];
      const auto [s1, s2] = moments[t];
      if (p.value.size() == 0 || s2 <= 0) continue;
      auto& g = p.grad_buffer();
      // d/dx_i (s1^2 / s2) = 2 s1 sign(x_i) / s2 - 2 s1^2 x_i / s2^2
      for (Index i = 0; i < p.value.size(); ++i) {
        const double x = static_cast<double>(p.value.data()[i]);
        const double sign = x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0);
        g.data()[i] += static_cast<Scalar>(scale * (2 * s1 * sign / s2 - 2 * s1 * s1 * x / (s2 * s2)));
      }
    }
  });
}

/// Mean |x| (power 1) or mean x^2 (power 2) over all entries of all tables.
template <typename Scalar>
Var<Scalar> mean_power(Tape<Scalar>& tape, const std::vector<Var<Scalar>>& xs, int power) {
  double sum = 0;
  double count = 0;
  for (const auto& x : xs) {
    const auto v = x.value().template cast<double>();
    sum += power == 1 ? v.cwiseAbs().sum() : v.squaredNorm();
    count += static_cast<double>(v.size());
  }
  ValueTable<Scalar> out = ValueTable<Scalar>::Zero(1, 1);
  if (count == 0) return tape.constant(std::move(out));
  out(0, 0) = static_cast<Scalar>(sum / count);
  if (!tape.recording()) return tape.constant(std::move(out));
  std::vector<NodePtr<Scalar>> parents;
  for (const auto& x : xs) parents.push_back(x.node());
  return tape.push(std::move(out), [parents, count, power](TapeNode<Scalar>& self) {
    const Scalar scale = static_cast<Scalar>(self.grad(0, 0) / count);
    for (auto& p : parents) {
      if (p->value.size() == 0) continue;
      if (power == 1) p->grad_buffer().array() += scale * p->value.array().sign();
      else p->grad_buffer().array() += Scalar(2) * scale * p->value.array();
    }
  });
}

}  // namespace ops

struct AdamOptions {
  double lr = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over a fixed parameter set.
template <typename Scalar>
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  /// Applies one update to every parameter that received a gradient, then
  /// clears gradients. Parameters without a gradient are left untouched.
  void step(const std::vector<Parameter<Scalar>*>& params) {
    bool any = false;
    for (auto* p : params) any = any || p->has_grad;
    if (!any) {
      std::cerr << "warning: adam step without gradients; skipped\n";
      return;
    }
    ++t_;
    const double c1 = 1 - std::pow(options_.beta1, t_);
    const double c2 = 1 - std::pow(options_.beta2, t_);
    const Scalar b1 = static_cast<Scalar>(options_.beta1);
    const Scalar b2 = static_cast<Scalar>(options_.beta2);
    for (auto* p : params) {
      if (!p->has_grad) continue;
      p->m = b1 * p->m + (Scalar(1) - b1) * p->grad;
      p->v = b2 * p->v + (Scalar(1) - b2) * p->grad.cwiseAbs2();
      const auto mhat = p->m.array() / static_cast<Scalar>(c1);
      const auto vhat = p->v.array() / static_cast<Scalar>(c2);
      p->value.array() -= static_cast<Scalar>(options_.lr) * mhat / (vhat.sqrt() + static_cast<Scalar>(options_.eps));
      p->zero_grad();
    }
  }

  long steps() const { return t_; }
  AdamOptions& options() { return options_; }

 private:
  AdamOptions options_;
  long t_ = 0;
};

/// Result of comparing tape gradients against central differences.
struct GradientCheck {
  double max_relative_error = 0;
  std::size_t checked = 0;
  std::size_t skipped_nonsmooth = 0;
};

/// Central-difference check of d(loss)/d(param) for every parameter entry.
/// Entries whose central difference changes between `epsilon` and `epsilon/2`
/// by more than the tolerance sit on a kink (ReLU or max tie) and are skipped.
template <typename Scalar>
GradientCheck finite_diff_check(const std::vector<Parameter<Scalar>*>& params,
                                const std::function<Var<Scalar>(Tape<Scalar>&)>& loss_fn,
                                double epsilon = 1e-3, double tolerance = 1e-3) {
  for (auto* p : params) p->zero_grad();
  {
    Tape<Scalar> tape;
    auto loss = loss_fn(tape);
    tape.backward(loss);
  }
  auto eval = [&]() {
    Tape<Scalar> tape(false);
    return static_cast<double>(loss_fn(tape).scalar());
  };
  auto central = [&](Scalar& w, double h) {
    const Scalar saved = w;
    w = static_cast<Scalar>(static_cast<double>(saved) + h);
    const double up = eval();
    w = static_cast<Scalar>(static_cast<double>(saved) - h);
    const double down = eval();
    w = saved;
    return (up - down) / (2 * h);
  };
  GradientCheck result;
  for (auto* p : params) {
    for (Index i = 0; i < p->value.size(); ++i) {
      const double analytic = static_cast<double>(p->grad.data()[i]);
      const double numeric = central(p->value.data()[i], epsilon);
      const double numeric_half = central(p->value.data()[i], epsilon / 2);
      const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      if (std::abs(numeric - numeric_half) / scale > tolerance) {
        ++result.skipped_nonsmooth;
        continue;
      }
      result.max_relative_error = std::max(result.max_relative_error, std::abs(analytic - numeric) / scale);
      ++result.checked;
    }
  }
  for (auto* p : params) p->zero_grad();
  return result;
}

}  // namespace spaloc
