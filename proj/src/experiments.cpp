#include "spaloc/experiments.hpp"

#include "spaloc/dense_reference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

namespace spaloc {

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("loglog_slope: length mismatch");
  const auto n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0) || !(y[i] > 0)) throw std::invalid_argument("loglog_slope: values must be positive");
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double den = n * sxx - sx * sx;
  if (x.size() < 2 || std::abs(den) < 1e-12) throw std::invalid_argument("loglog_slope: needs two distinct sizes");
  return (n * sxy - sx * sy) / den;
}

namespace {

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::uint64_t bench_seed(std::uint64_t seed, Index n, int i) {
  return seed * 1000003ULL + static_cast<std::uint64_t>(n) * 101ULL + static_cast<std::uint64_t>(i);
}

std::optional<double> fit(const std::vector<ScalingPoint>& pts, const std::string& model, bool memory) {
  std::vector<double> x, y;
  for (const auto& p : pts) {
    if (p.model != model || p.skipped()) continue;
    const double v = memory ? static_cast<double>(p.peak_bytes) : p.seconds_per_sample;
    if (v <= 0) continue;
    x.push_back(static_cast<double>(p.n));
    y.push_back(v);
  }
  if (x.size() < 2) return std::nullopt;
  return loglog_slope(x, y);
}

}  // namespace

ScalingReport bench_scaling(Model<float>& model, const ScalingOptions& opt, std::ostream* log) {
  ScalingReport report;
  const std::int64_t width = model.config().hidden * static_cast<std::int64_t>(sizeof(float));
  FamilyOptions fo;
  fo.parent_prob = opt.parent_prob;
  const int worlds = std::max(1, opt.worlds);

  auto run = [&](const std::string& kind, Index n, bool& over) {
    ScalingPoint p;
    p.model = kind;
    p.n = n;
    if (over) {
      p.note = "skipped: a smaller size exceeded capacity";
    } else {
      double seconds = 0;
      try {
        for (int i = 0; i < worlds; ++i) {
          const auto tree = generate_family_tree(n, bench_seed(opt.seed, n, i), fo);
          const auto inputs = encode_inputs(tree, model.config().breadth);
          const auto t0 = std::chrono::steady_clock::now();
          if (kind == "sparse") {
            const auto fr = model.infer(inputs);
            seconds += elapsed(t0);
            p.peak_rows = std::max(p.peak_rows, fr.density.peak_retained());
            p.materialised_rows = std::max(p.materialised_rows, fr.density.peak_rows());
          } else {
            const auto dense = dense_reference_forward(model, inputs);
            seconds += elapsed(t0);
            p.peak_rows = std::max(p.peak_rows, dense.peak_rows);
            p.materialised_rows = p.peak_rows;
          }
        }
        p.peak_bytes = p.peak_rows * width;
        p.seconds_per_sample = seconds / worlds;
      } catch (const CapacityError& e) {
        p.note = std::string("skipped: ") + e.what();
        p.peak_rows = p.materialised_rows = p.peak_bytes = 0;
        over = true;
      }
    }
    if (log) {
      *log << kind << " N=" << n;
      if (p.skipped()) *log << " " << p.note << '\n';
      else *log << " peak_rows " << p.peak_rows << " bytes " << p.peak_bytes << " s " << p.seconds_per_sample << '\n';
    }
    report.points.push_back(p);
  };
  bool over = false;
  for (Index n : opt.sizes) run("sparse", n, over);
  over = false;
  for (Index n : opt.dense_sizes) run("dense", n, over);
  report.sparse_memory_exponent = fit(report.points, "sparse", true);
  report.dense_memory_exponent = fit(report.points, "dense", true);
  report.sparse_time_exponent = fit(report.points, "sparse", false);
  report.dense_time_exponent = fit(report.points, "dense", false);
  return report;
}

void write_scaling_csv(std::ostream& os, const ScalingReport& report) {
  os << "model,N,peak_rows,materialised_rows,peak_bytes,seconds_per_sample,note\n";
  for (const auto& p : report.points)
    os << p.model << ',' << p.n << ',' << p.peak_rows << ',' << p.materialised_rows << ',' << p.peak_bytes << ','
       << std::scientific << std::setprecision(4) << p.seconds_per_sample << std::defaultfloat << ",\"" << p.note
       << "\"\n";
}

void write_scaling_plot(std::ostream& os, const ScalingReport& report) {
  os << "series,x,y\n";
  for (const char* what : {"memory", "time"})
    for (const char* model : {"sparse", "dense"})
      for (const auto& p : report.points) {
        if (p.model != model || p.skipped()) continue;
        os << what << '_' << model << ',' << p.n << ',';
        if (std::string(what) == "memory") os << p.peak_bytes;
        else os << std::scientific << std::setprecision(4) << p.seconds_per_sample << std::defaultfloat;
        os << '\n';
      }
}

double sampler_mis(SamplerKind kind, Index n, Index ns, int tau, int samples, std::uint64_t seed,
                   double parent_prob) {
  FamilyOptions fo;
  fo.parent_prob = parent_prob;
  const int worlds = std::clamp(samples / 5, 1, 4);
  std::mt19937_64 rng(seed);
  double sum = 0;
  int count = 0;
  for (int w = 0; w < worlds; ++w) {
    const auto graph = family_hypergraph(generate_family_tree(n, bench_seed(seed, n, w), fo));
    const PathCounter full(graph, tau);
    const int here = samples / worlds + (w < samples % worlds ? 1 : 0);
    for (int s = 0; s < here; ++s) {
      const auto nodes = sample_nodes(kind, graph, ns, rng);
      sum += mean_information_sufficiency(induce_subgraph(graph, nodes), full, tau);
      ++count;
    }
  }
  return count > 0 ? sum / count : 100.0;
}

AblationKind parse_ablation_kind(const std::string& name) {
  if (name == "samplers") return AblationKind::Samplers;
  if (name == "label_adjust") return AblationKind::LabelAdjust;
  if (name == "sparsity_loss") return AblationKind::SparsityLoss;
  throw std::invalid_argument("unknown ablation '" + name + "' (samplers, label_adjust, sparsity_loss)");
}

const char* ablation_kind_name(AblationKind kind) {
  switch (kind) {
    case AblationKind::Samplers: return "samplers";
    case AblationKind::LabelAdjust: return "label_adjust";
    case AblationKind::SparsityLoss: return "sparsity_loss";
  }
  return "?";
}

AblationOptions default_ablation(AblationKind kind) {
  AblationOptions o;
  o.base.epochs = 60;
  o.base.test_worlds = 2;
  switch (kind) {
    case AblationKind::Samplers:
      o.tasks = {"Grandparent"};
      o.samplers = {SamplerKind::Node, SamplerKind::Walk, SamplerKind::Neighbor};
      o.labels = {LabelMode::IS};
      o.sizes = {50, 200, 500, 1000, 2000};
      o.base.train_worlds = 4;
      break;
    case AblationKind::LabelAdjust:
      o.tasks = {"HasFather", "HasSister"};
      o.samplers = {SamplerKind::Node, SamplerKind::Walk, SamplerKind::Neighbor};
      o.labels = {LabelMode::NC, LabelMode::LS, LabelMode::IS};
      o.base.train_n = 200;
      o.base.train_worlds = 8;
      break;
    case AblationKind::SparsityLoss:
      o.tasks = {"HasSister", "Grandparent", "Uncle"};
      o.losses = {SparsityLoss::L1, SparsityLoss::L2, SparsityLoss::HS};
      o.base.lambda = 1;
      o.base.epochs = 100;
      o.base.stop_at_perfect = false;
      o.base.test_worlds = 1;
      break;
  }
  return o;
}

namespace {

AblationCell run_cell(RunConfig cfg, AblationCell cell, std::ostream* log) {
  cfg.task = cell.task;
  cfg.sampler = cell.sampler;
  cfg.label = cell.label;
  cfg.sparsity = cell.sparsity;
  if (cell.n > 0) cfg.train_n = cell.n;
  cell.n = cfg.train_n;
  cell.ns = cfg.subgraph;
  cfg.out.clear();
  auto source = make_source(cfg);
  const auto r = train(cfg, *source);
  cell.accuracy = r.test.accuracy;
  cell.density_percent = r.test.density_percent;
  cell.epochs = r.epochs;
  if (log)
    *log << cell.task << ' ' << sampler_name(cell.sampler) << ' ' << label_mode_name(cell.label) << ' '
         << sparsity_loss_name(cell.sparsity) << " N=" << cell.n << " acc " << cell.accuracy << " density "
         << cell.density_percent << "% epochs " << cell.epochs << std::endl;
  return cell;
}

}  // namespace

std::vector<AblationCell> run_ablation(AblationKind kind, const AblationOptions& opt, std::ostream* log) {
  std::vector<AblationCell> out;
  const auto& base = opt.base;
  for (const auto& task : opt.tasks) {
    AblationCell c;
    c.task = task;
    c.sampler = base.sampler;
    c.label = base.label;
    c.sparsity = base.sparsity;
    switch (kind) {
      case AblationKind::Samplers:
        for (Index n : opt.sizes)
          for (auto s : opt.samplers) {
            c.sampler = s;
            c.n = n;
            RunConfig cfg = base;
            cfg.task = task;
            const double mis = sampler_mis(s, n, base.subgraph, cfg.effective_tau(), opt.mis_samples, base.seed,
                                           base.parent_prob);
            AblationCell cell = c;
            if (opt.train) cell = run_cell(base, c, log);
            cell.n = n;
            cell.ns = base.subgraph;
            cell.mis_percent = mis;
            out.push_back(cell);
          }
        break;
      case AblationKind::LabelAdjust:
        for (auto s : opt.samplers)
          for (auto l : opt.labels) {
            c.sampler = s;
            c.label = l;
            out.push_back(run_cell(base, c, log));
          }
        break;
      case AblationKind::SparsityLoss:
        for (auto l : opt.losses) {
          c.sparsity = l;
          out.push_back(run_cell(base, c, log));
        }
        break;
    }
  }
  return out;
}

void write_ablation_csv(std::ostream& os, const std::vector<AblationCell>& cells) {
  os << "task,sampler,label,sparsity,N,accuracy,density_percent,mis_percent,epochs\n";
  auto num = [&](double v) {
    if (!std::isnan(v)) os << std::fixed << std::setprecision(2) << v << std::defaultfloat;
  };
  for (const auto& c : cells) {
    os << c.task << ',' << sampler_name(c.sampler) << ',' << label_mode_name(c.label) << ','
       << sparsity_loss_name(c.sparsity) << ',' << c.n << ',';
    num(c.accuracy);
    os << ',';
    num(c.density_percent);
    os << ',';
    num(c.mis_percent);
    os << ',' << c.epochs << '\n';
  }
}

namespace {

std::string fmt(double v, const char* suffix = "") {
  if (std::isnan(v)) return "-";
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << v << suffix;
  return s.str();
}

}  // namespace

void write_ablation_table(std::ostream& os, AblationKind kind, const std::vector<AblationCell>& cells) {
  auto col = [&](const std::string& s, int w = 10) { os << std::setw(w) << s; };
  switch (kind) {
    case AblationKind::Samplers: {
      std::vector<SamplerKind> samplers;
      std::vector<Index> sizes;
      for (const auto& c : cells) {
        if (std::find(samplers.begin(), samplers.end(), c.sampler) == samplers.end()) samplers.push_back(c.sampler);
        if (std::find(sizes.begin(), sizes.end(), c.n) == sizes.end()) sizes.push_back(c.n);
      }
      col("Ns / N", 12);
      for (auto s : samplers) {
        col(std::string(sampler_name(s)) + " Acc", 14);
        col("MIS");
      }
      os << '\n';
      for (Index n : sizes) {
        Index ns = 0;
        for (const auto& c : cells)
          if (c.n == n) ns = c.ns;
        std::ostringstream head;
        head << ns << " / " << n;
        col(head.str(), 12);
        for (auto s : samplers)
          for (const auto& c : cells)
            if (c.sampler == s && c.n == n) {
              col(fmt(c.accuracy), 14);
              col(fmt(c.mis_percent));
            }
        os << '\n';
      }
      break;
    }
    case AblationKind::LabelAdjust: {
      std::vector<std::string> tasks;
      std::vector<SamplerKind> samplers;
      std::vector<LabelMode> labels;
      for (const auto& c : cells) {
        if (std::find(tasks.begin(), tasks.end(), c.task) == tasks.end()) tasks.push_back(c.task);
        if (std::find(samplers.begin(), samplers.end(), c.sampler) == samplers.end()) samplers.push_back(c.sampler);
        if (std::find(labels.begin(), labels.end(), c.label) == labels.end()) labels.push_back(c.label);
      }
      col("Sampler", 10);
      for (const auto& t : tasks)
        for (auto l : labels) col(t.substr(0, 6) + " " + label_mode_name(l), 12);
      os << '\n';
      for (auto s : samplers) {
        col(sampler_name(s), 10);
        for (const auto& t : tasks)
          for (auto l : labels)
            for (const auto& c : cells)
              if (c.task == t && c.sampler == s && c.label == l) col(fmt(c.accuracy), 12);
        os << '\n';
      }
      break;
    }
    case AblationKind::SparsityLoss: {
      std::vector<std::string> tasks;
      std::vector<SparsityLoss> losses;
      for (const auto& c : cells) {
        if (std::find(tasks.begin(), tasks.end(), c.task) == tasks.end()) tasks.push_back(c.task);
        if (std::find(losses.begin(), losses.end(), c.sparsity) == losses.end()) losses.push_back(c.sparsity);
      }
      col("Loss", 6);
      for (const auto& t : tasks) {
        col(t + " Acc", 16);
        col("Density");
      }
      os << '\n';
      for (auto l : losses) {
        col(sparsity_loss_name(l), 6);
        for (const auto& t : tasks)
          for (const auto& c : cells)
            if (c.task == t && c.sparsity == l) {
              col(fmt(c.accuracy), 16);
              col(fmt(c.density_percent, "%"));
            }
        os << '\n';
      }
      break;
    }
  }
}

}  // namespace spaloc
