#include "spaloc/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>
#include <unordered_map>

namespace spaloc {

SparsityLoss parse_sparsity_loss(const std::string& name) {
  if (name == "none") return SparsityLoss::None;
  if (name == "L1" || name == "l1") return SparsityLoss::L1;
  if (name == "L2" || name == "l2") return SparsityLoss::L2;
  if (name == "HS" || name == "hs") return SparsityLoss::HS;
  throw std::invalid_argument("unknown sparsity loss '" + name + "' (none, L1, L2, HS)");
}

const char* sparsity_loss_name(SparsityLoss s) {
  switch (s) {
    case SparsityLoss::None: return "none";
    case SparsityLoss::L1: return "L1";
    case SparsityLoss::L2: return "L2";
    case SparsityLoss::HS: return "HS";
  }
  return "?";
}

int RunConfig::effective_tau() const {
  if (tau >= 0) return tau;
  if (task == "kg") return 3;
  return task_spec(parse_task(task)).tau;
}

ModelConfig RunConfig::model_config(std::vector<int> input_channels, int output_arity, int output_channels) const {
  ModelConfig m;
  m.depth = depth;
  m.breadth = breadth;
  m.hidden = hidden;
  m.eps = eps;
  m.lambda = lambda;
  input_channels.resize(static_cast<std::size_t>(breadth) + 1, 0);
  m.input_channels = std::move(input_channels);
  m.output_arity = output_arity;
  m.output_channels = output_channels;
  m.validate();
  return m;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T out{};
  in >> out;
  if (in.fail() || !in.eof()) throw std::invalid_argument("config: bad value '" + value + "' for " + key);
  return out;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  auto i32 = [&] { return parse_number<int>(key, value); };
  auto i64 = [&] { return parse_number<Index>(key, value); };
  auto f64 = [&] { return parse_number<double>(key, value); };
  if (key == "task") task = value;
  else if (key == "train_triples") train_triples = value;
  else if (key == "test_triples") test_triples = value;
  else if (key == "depth") depth = i32();
  else if (key == "breadth") breadth = i32();
  else if (key == "hidden") hidden = i32();
  else if (key == "eps") eps = f64();
  else if (key == "lambda") lambda = f64();
  else if (key == "sparsity") sparsity = parse_sparsity_loss(value);
  else if (key == "sampler") sampler = parse_sampler(value);
  else if (key == "subgraph") subgraph = i64();
  else if (key == "label") label = parse_label_mode(value);
  else if (key == "alpha") alpha = f64();
  else if (key == "tau") tau = i32();
  else if (key == "path_budget") path_budget = i32();
  else if (key == "epochs") epochs = i32();
  else if (key == "iters") iters = i32();
  else if (key == "batch") batch = i32();
  else if (key == "lr") lr = f64();
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "train_n") train_n = i64();
  else if (key == "train_worlds") train_worlds = i32();
  else if (key == "valid_n") valid_n = i64();
  else if (key == "valid_worlds") valid_worlds = i32();
  else if (key == "test_n") test_n = i64();
  else if (key == "test_worlds") test_worlds = i32();
  else if (key == "parent_prob") parent_prob = f64();
  else if (key == "queries") queries = i32();
  else if (key == "patience") patience = i32();
  else if (key == "stop_at_perfect") stop_at_perfect = parse_number<int>(key, value) != 0;
  else if (key == "out") out = value;
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw std::invalid_argument("override '" + assignment + "' is not key=value");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

namespace {
// Shortest text that reads back to the same double.
std::string num(double v) {
  char buf[32];
  return std::string(buf, std::to_chars(buf, buf + sizeof buf, v).ptr);
}
}  // namespace

void RunConfig::write(std::ostream& os) const {
  os << "task = " << task << '\n';
  if (!train_triples.empty()) os << "train_triples = " << train_triples << '\n';
  if (!test_triples.empty()) os << "test_triples = " << test_triples << '\n';
  os << "depth = " << depth << "\nbreadth = " << breadth << "\nhidden = " << hidden << "\neps = " << num(eps)
     << "\nlambda = " << num(lambda) << "\nsparsity = " << sparsity_loss_name(sparsity)
     << "\nsampler = " << sampler_name(sampler) << "\nsubgraph = " << subgraph
     << "\nlabel = " << label_mode_name(label) << "\nalpha = " << num(alpha) << "\ntau = " << tau
     << "\npath_budget = " << path_budget << "\nepochs = " << epochs << "\niters = " << iters
     << "\nbatch = " << batch << "\nlr = " << num(lr) << "\nseed = " << seed << "\ntrain_n = " << train_n
     << "\ntrain_worlds = " << train_worlds << "\nvalid_n = " << valid_n << "\nvalid_worlds = " << valid_worlds
     << "\ntest_n = " << test_n << "\ntest_worlds = " << test_worlds << "\nparent_prob = " << num(parent_prob)
     << "\nqueries = " << queries << "\npatience = " << patience << "\nstop_at_perfect = " << (stop_at_perfect ? 1 : 0) << '\n';
  if (!out.empty()) os << "out = " << out << '\n';
}

RunConfig RunConfig::read(std::istream& is) {
  RunConfig cfg;
  std::string line;
  int number = 0;
  while (std::getline(is, line)) {
    ++number;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    try {
      cfg.apply_override(line);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("line " + std::to_string(number) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig RunConfig::read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  return read(in);
}

RunConfig kg_defaults() {
  RunConfig cfg;
  cfg.task = "kg";
  cfg.depth = 6;
  cfg.hidden = 64;
  cfg.tau = 3;
  cfg.sampler = SamplerKind::Neighbor;
  return cfg;
}

LossParts example_loss(Tape<float>& tape, Model<float>& model, const Example& ex, SparsityLoss sparsity,
                       double lambda) {
  if (ex.tuples.size() != ex.labels.size() || (!ex.channels.empty() && ex.channels.size() != ex.tuples.size()))
    throw InvariantError("example: one label and channel per tuple");
  const Index channels = model.config().output_channels;
  auto fr = model.forward(tape, ex.inputs, Mode::Train);
  const Index n = ex.inputs.node_count();
  const auto keys = row_keys(*fr.logits.indices, n);
  std::unordered_map<RowKey, Index> row_of;
  row_of.reserve(keys.size() * 2);
  for (std::size_t i = 0; i < keys.size(); ++i) row_of.emplace(keys[i], static_cast<Index>(i));

  const Index rows = static_cast<Index>(keys.size());
  const float base = ex.others_negative ? 1.0f : 0.0f;
  auto target = std::make_shared<ValueTable<float>>(ValueTable<float>::Zero(rows, channels));
  auto weight = std::make_shared<ValueTable<float>>(ValueTable<float>::Constant(rows, channels, base));
  // absent tuples: one row each for labelled ones, one shared row for the rest
  std::vector<RowKey> absent_keys;
  std::unordered_map<RowKey, Index> absent_row;
  std::vector<std::pair<Index, Index>> absent_entries;  // (absent row, channel)
  std::vector<float> absent_targets;
  for (std::size_t i = 0; i < ex.tuples.size(); ++i) {
    if (static_cast<int>(ex.tuples[i].size()) != ex.arity) throw InvariantError("example: tuple arity");
    const Index c = ex.channels.empty() ? 0 : ex.channels[i];
    if (c < 0 || c >= channels) throw InvariantError("example: channel out of range");
    const auto key = row_key(ex.tuples[i].data(), ex.arity, n);
    auto it = row_of.find(key);
    if (it != row_of.end()) {
      (*target)(it->second, c) = ex.labels[i];
      (*weight)(it->second, c) = 1.0f;
      continue;
    }
    auto [slot, fresh] = absent_row.emplace(key, static_cast<Index>(absent_keys.size()));
    if (fresh) absent_keys.push_back(key);
    absent_entries.emplace_back(slot->second, c);
    absent_targets.push_back(ex.labels[i]);
  }
  const Index labelled_absent = static_cast<Index>(absent_keys.size());
  double rest = 0;
  if (ex.others_negative)
    rest = static_cast<double>(tuple_count(ex.arity, n)) - static_cast<double>(rows) -
           static_cast<double>(labelled_absent);
  const Index m = labelled_absent + (rest > 0 ? 1 : 0);
  auto at = std::make_shared<ValueTable<float>>(ValueTable<float>::Zero(m, channels));
  auto aw = std::make_shared<ValueTable<float>>(ValueTable<float>::Constant(m, channels, base));
  if (rest > 0) aw->row(m - 1).setConstant(static_cast<float>(rest));
  for (std::size_t i = 0; i < absent_entries.size(); ++i) {
    const auto [r, c] = absent_entries[i];
    (*at)(r, c) = absent_targets[i];
    (*aw)(r, c) = 1.0f;
  }

  const double wp = weight->sum();
  const double wa = aw->sum();
  auto zero = tape.constant(ValueTable<float>::Zero(1, 1));
  Var<float> task = zero;
  if (wp > 0)
    task = ops::add_scaled(tape, task, ops::bce_with_logits<float>(tape, fr.logits.values, target, weight),
                           static_cast<float>(wp / (wp + wa)));
  if (wa > 0) {
    auto blank = tape.constant(ValueTable<float>::Zero(m, model.config().hidden));
    auto logits = ops::linear(tape, blank, model.head(), &model.head_bias());
    task = ops::add_scaled(tape, task, ops::bce_with_logits<float>(tape, logits, at, aw),
                           static_cast<float>(wa / (wp + wa)));
  }

  Var<float> reg = zero;
  switch (sparsity) {
    case SparsityLoss::None: break;
    case SparsityLoss::L1: reg = ops::mean_power(tape, fr.gates, 1); break;
    case SparsityLoss::L2: reg = ops::mean_power(tape, fr.gates, 2); break;
    case SparsityLoss::HS: reg = ops::hoyer_square_density(tape, fr.gates); break;
  }
  LossParts out;
  out.task = task.scalar();
  out.reg = reg.scalar();
  out.total = ops::add_scaled(tape, task, reg, static_cast<float>(lambda));
  return out;
}

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t world_seed(std::uint64_t seed, int split, int i) {
  return mix(mix(mix(seed) ^ static_cast<std::uint64_t>(split)) ^ static_cast<std::uint64_t>(i));
}

std::uint64_t fnv(const std::string& s, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<int> family_channels(int breadth) {
  auto c = family_input_channels();
  c.resize(static_cast<std::size_t>(breadth) + 1, 0);
  return c;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::vector<FamilyTree> family_worlds(const RunConfig& cfg, int split, Index n, int count) {
  FamilyOptions opts;
  opts.parent_prob = cfg.parent_prob;
  std::vector<FamilyTree> out;
  for (int i = 0; i < count; ++i) out.push_back(generate_family_tree(n, world_seed(cfg.seed, split, i), opts));
  return out;
}

FamilySource::FamilySource(const RunConfig& cfg) : cfg_(cfg), spec_(task_spec(parse_task(cfg.task))) {
  if (spec_.arity > cfg.breadth) throw std::invalid_argument("task arity exceeds model breadth");
  for (auto& t : family_worlds(cfg, 0, cfg.train_n, cfg.train_worlds)) {
    auto w = std::make_unique<World>();
    w->graph = family_hypergraph(t);
    w->positives = eval_target(t, spec_.task);
    w->tree = std::move(t);
    train_.push_back(std::move(w));
  }
  valid_ = family_worlds(cfg, 1, cfg.valid_n, cfg.valid_worlds);
  test_ = family_worlds(cfg, 2, cfg.test_n, cfg.test_worlds);
}

ModelConfig FamilySource::model_config(const RunConfig& cfg) const {
  return cfg.model_config(family_channels(cfg.breadth), spec_.arity);
}

FamilySource::World& FamilySource::world(int i) {
  auto& w = *train_[static_cast<std::size_t>(i)];
  if (!w.counter && cfg_.label == LabelMode::IS)
    w.counter = std::make_unique<PathCounter>(w.graph, cfg_.effective_tau());
  return w;
}

Example FamilySource::sample(std::mt19937_64& rng) {
  const int i = std::uniform_int_distribution<int>(0, static_cast<int>(train_.size()) - 1)(rng);
  Example ex;
  ex.arity = spec_.arity;
  ex.others_negative = true;
  if (cfg_.train_n <= cfg_.subgraph) {
    auto& w = *train_[static_cast<std::size_t>(i)];
    ex.inputs = encode_inputs(w.tree, cfg_.breadth);
    ex.tuples = w.positives;
    ex.labels.assign(ex.tuples.size(), 1.0f);
    return ex;
  }
  auto& w = world(i);
  const auto nodes = sample_nodes(cfg_.sampler, w.graph, cfg_.subgraph, rng);
  ex.inputs = encode_inputs(restrict_family(w.tree, nodes), cfg_.breadth);
  auto s = restrict_labels(induce_subgraph(w.graph, nodes), spec_.arity, w.positives);
  if (cfg_.label != LabelMode::NC)
    adjust_labels(s, w.counter ? *w.counter : PathCounter(), cfg_.effective_tau(), cfg_.label, cfg_.alpha);
  ex.tuples = std::move(s.tuples);
  ex.labels = std::move(s.adjusted);
  return ex;
}

Evaluation evaluate_family(Model<float>& model, const std::vector<FamilyTree>& worlds, Task task) {
  const int arity = task_spec(task).arity;
  if (model.config().output_arity != arity) throw std::invalid_argument("model output arity differs from task");
  Evaluation ev;
  std::vector<Scored> scored;
  double seconds = 0;
  double density_kept = 0;
  double density_slots = 0;
  const double absent = model.absent_prediction()(0, 0);
  for (const auto& w : worlds) {
    const auto inputs = encode_inputs(w, model.config().breadth);
    const auto t0 = std::chrono::steady_clock::now();
    auto fr = model.infer(inputs);
    seconds += seconds_since(t0);
    const Index n = w.size();
    std::unordered_map<RowKey, char> positive;
    for (const auto& t : eval_target(w, task)) positive.emplace(row_key(t.data(), arity, n), 0);
    const auto keys = row_keys(*fr.logits.indices, n);
    const auto pred = fr.predictions();
    std::size_t present_pos = 0;
    for (std::size_t i = 0; i < keys.size(); ++i) {
      auto it = positive.find(keys[i]);
      const bool pos = it != positive.end();
      if (pos) {
        it->second = 1;
        ++present_pos;
      }
      scored.push_back({static_cast<double>(pred(static_cast<Index>(i), 0)), pos, 1.0});
    }
    const double absent_pos = static_cast<double>(positive.size() - present_pos);
    const double absent_neg = static_cast<double>(tuple_count(arity, n)) - static_cast<double>(keys.size()) - absent_pos;
    if (absent_pos > 0) scored.push_back({absent, true, absent_pos});
    if (absent_neg > 0) scored.push_back({absent, false, absent_neg});
    for (const auto& e : fr.density.entries) {
      if (e.arity < 1) continue;
      density_kept += static_cast<double>(e.retained);
      density_slots += static_cast<double>(e.capacity);
    }
    ev.peak_rows = std::max(ev.peak_rows, fr.density.peak_retained());
    ev.materialised_rows = std::max(ev.materialised_rows, fr.density.peak_rows());
  }
  for (const auto& s : scored) ev.counts.add(s);
  ev.accuracy = ev.counts.balanced_accuracy();
  ev.auc_pr = ev.counts.positives > 0 ? auc_pr(scored) : std::numeric_limits<double>::quiet_NaN();
  ev.hit10 = std::numeric_limits<double>::quiet_NaN();
  ev.density_percent = density_slots > 0 ? 100.0 * density_kept / density_slots : 0.0;
  ev.peak_bytes = ev.peak_rows * model.config().hidden * static_cast<std::int64_t>(sizeof(float));
  ev.seconds_per_sample = worlds.empty() ? 0.0 : seconds / static_cast<double>(worlds.size());
  return ev;
}

Evaluation FamilySource::validate(Model<float>& model) { return evaluate_family(model, valid_, spec_.task); }
Evaluation FamilySource::test(Model<float>& model) { return evaluate_family(model, test_, spec_.task); }

std::uint64_t FamilySource::input_hash() const {
  std::ostringstream os;
  for (const auto& w : train_) write_world(os, w->tree);
  for (const auto& t : valid_) write_world(os, t);
  for (const auto& t : test_) write_world(os, t);
  return fnv(os.str());
}

TrainResult train(const RunConfig& cfg, TaskSource& source, std::ostream* log) {
  const auto start = std::chrono::steady_clock::now();
  TrainResult result;
  Model<float> model(source.model_config(cfg), cfg.seed);
  AdamOptions opts;
  opts.lr = cfg.lr;
  Adam<float> adam(opts);
  std::mt19937_64 rng(mix(cfg.seed ^ 0x5a5a));
  result.model = model;
  int stale = 0;
  double best_density = std::numeric_limits<double>::infinity();
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double loss_sum = 0, reg_sum = 0;
    long samples = 0;
    const auto t0 = std::chrono::steady_clock::now();
    for (int it = 0; it < cfg.iters; ++it) {
      for (int b = 0; b < cfg.batch; ++b) {
        const auto ex = source.sample(rng);
        Tape<float> tape;
        auto parts = example_loss(tape, model, ex, cfg.sparsity, cfg.lambda);
        const double total = parts.total.scalar();
        if (!std::isfinite(total))
          throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + " step " +
                                std::to_string(it) + " (task " + std::to_string(parts.task) + ", reg " +
                                std::to_string(parts.reg) + ")");
        auto scaled = ops::add_scaled(tape, tape.constant(ValueTable<float>::Zero(1, 1)), parts.total,
                                      1.0f / static_cast<float>(cfg.batch));
        tape.backward(scaled);
        loss_sum += total;
        reg_sum += parts.reg;
        ++samples;
      }
      adam.step(model.parameters());
    }
    MetricsRow train_row;
    train_row.epoch = epoch;
    train_row.split = "train";
    train_row.loss = samples > 0 ? loss_sum / static_cast<double>(samples) : 0.0;
    train_row.accuracy = train_row.auc_pr = train_row.hit10 = std::numeric_limits<double>::quiet_NaN();
    train_row.density_percent = std::numeric_limits<double>::quiet_NaN();
    train_row.seconds_per_sample = samples > 0 ? seconds_since(t0) / static_cast<double>(samples) : 0.0;
    result.rows.push_back(train_row);

    const auto valid = source.validate(model);
    MetricsRow row;
    row.epoch = epoch;
    row.split = "valid";
    row.loss = std::numeric_limits<double>::quiet_NaN();
    row.accuracy = valid.accuracy;
    row.auc_pr = valid.auc_pr;
    row.hit10 = valid.hit10;
    row.density_percent = valid.density_percent;
    row.peak_bytes = valid.peak_bytes;
    row.seconds_per_sample = valid.seconds_per_sample;
    result.rows.push_back(row);
    result.epochs = epoch;
    if (log)
      *log << "epoch " << epoch << " loss " << train_row.loss << " reg " << reg_sum / std::max<long>(1, samples)
           << " valid acc " << valid.accuracy << " density " << valid.density_percent << "%\n";
    // ties on accuracy go to the sparser model
    if (valid.accuracy > result.best_valid ||
        (valid.accuracy == result.best_valid && valid.density_percent < best_density)) {
      result.best_valid = valid.accuracy;
      best_density = valid.density_percent;
      result.best_epoch = epoch;
      result.model = model;
      stale = 0;
    } else if (cfg.patience > 0 && ++stale >= cfg.patience) {
      break;
    }
    if (cfg.stop_at_perfect && valid.accuracy >= 100.0) break;
  }
  result.test = source.test(result.model);
  MetricsRow row;
  row.epoch = result.best_epoch;
  row.split = "test";
  row.loss = std::numeric_limits<double>::quiet_NaN();
  row.accuracy = result.test.accuracy;
  row.auc_pr = result.test.auc_pr;
  row.hit10 = result.test.hit10;
  row.density_percent = result.test.density_percent;
  row.peak_bytes = result.test.peak_bytes;
  row.seconds_per_sample = result.test.seconds_per_sample;
  result.rows.push_back(row);
  result.seconds = seconds_since(start);
  return result;
}

void write_run(const RunConfig& cfg, const TaskSource& source, const TrainResult& result) {
  if (cfg.out.empty()) return;
  std::filesystem::create_directories(cfg.out);
  {
    std::ofstream os(cfg.out + "/config.txt");
    cfg.write(os);
    os << "# input_hash = " << std::hex << std::setw(16) << std::setfill('0') << source.input_hash() << '\n';
  }
  {
    std::ofstream os(cfg.out + "/metrics.csv");
    write_metrics_header(os);
    for (const auto& r : result.rows) write_metrics_row(os, r);
  }
  {
    std::ofstream os(cfg.out + "/timing.csv");
    os << "epoch,split,seconds_per_sample\n";
    for (const auto& r : result.rows)
      os << r.epoch << ',' << r.split << ',' << std::scientific << std::setprecision(4) << r.seconds_per_sample
         << std::defaultfloat << '\n';
  }
  save_checkpoint(result.model, cfg.out + "/model.ckpt");
  source.write_artifacts(cfg.out);
}

std::unique_ptr<TaskSource> make_kg_source(const RunConfig& cfg);

std::unique_ptr<TaskSource> make_source(const RunConfig& cfg) {
  if (cfg.task == "kg") return make_kg_source(cfg);
  return std::make_unique<FamilySource>(cfg);
}

}  // namespace spaloc
