#include "spaloc/kg.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>

namespace spaloc {

namespace {

Index pick(Index n, std::mt19937_64& rng) { return std::uniform_int_distribution<Index>(0, n - 1)(rng); }

}  // namespace

Triple corrupt(const TripleGraph& g, const Triple& t, std::mt19937_64& rng) {
  const Index n = g.entity_count();
  for (int tries = 0; tries < 64 && n > 1; ++tries) {
    Triple c = t;
    if (std::bernoulli_distribution(0.5)(rng)) c.tail = pick(n, rng);
    else c.head = pick(n, rng);
    if (c != t && !g.contains(c)) return c;
  }
  return t;
}

Example kg_query_example(const KGView& view, const Triple& query, float label, int tau, int budget, Index size,
                         int breadth, std::mt19937_64& rng) {
  const auto& g = *view.graph;
  const Index h = query.head, t = query.tail;
  auto nodes = path_sampler(view.hyper, h, t, tau, budget, rng);
  size = std::max<Index>(size, h == t ? 1 : 2);
  if (static_cast<Index>(nodes.size()) > size) {
    std::vector<Index> others;
    for (Index v : nodes)
      if (v != h && v != t) others.push_back(v);
    std::shuffle(others.begin(), others.end(), rng);
    others.resize(static_cast<std::size_t>(size - (h == t ? 1 : 2)));
    nodes = std::move(others);
    nodes.push_back(h);
    if (t != h) nodes.push_back(t);
  }
  // pad with a randomised breadth-first ring around the two ends
  std::vector<char> taken(static_cast<std::size_t>(g.entity_count()), 0);
  for (Index v : nodes) taken[v] = 1;
  std::vector<Index> frontier = {h, t};
  while (static_cast<Index>(nodes.size()) < size && !frontier.empty()) {
    std::vector<Index> next;
    for (Index v : frontier)
      for (Index u : view.hyper.neighbors()[v])
        if (!taken[u]) {
          taken[u] = 1;
          next.push_back(u);
        }
    std::shuffle(next.begin(), next.end(), rng);
    for (Index u : next) {
      if (static_cast<Index>(nodes.size()) >= size) break;
      nodes.push_back(u);
    }
    frontier = std::move(next);
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());

  const Index m = static_cast<Index>(nodes.size());
  std::unordered_map<Index, Index> local;
  for (Index i = 0; i < m; ++i) local.emplace(nodes[i], i);
  const Index relations = g.relations.size();
  std::map<std::pair<Index, Index>, std::vector<Index>> pairs;
  for (Index v : nodes)
    for (Index e : view.incident[v]) {
      const auto& tr = g.triples[e];
      if (tr == query) continue;
      auto a = local.find(tr.head), b = local.find(tr.tail);
      if (a == local.end() || b == local.end()) continue;
      auto& rels = pairs[{a->second, b->second}];
      if (std::find(rels.begin(), rels.end(), tr.relation) == rels.end()) rels.push_back(tr.relation);
    }

  Example ex;
  ex.arity = 2;
  ex.others_negative = false;
  ex.inputs.tensors.emplace_back(0, m, 0);
  IndexTable ones_idx(m, 1);
  for (Index i = 0; i < m; ++i) ones_idx(i, 0) = i;
  ex.inputs.tensors.push_back(Tensor::from_canonical(1, m, std::move(ones_idx), ValueTable<float>::Ones(m, 1)));
  IndexTable idx(static_cast<Index>(pairs.size()), 2);
  ValueTable<float> val = ValueTable<float>::Zero(static_cast<Index>(pairs.size()), relations);
  Index row = 0;
  for (const auto& [p, rels] : pairs) {
    idx(row, 0) = p.first;
    idx(row, 1) = p.second;
    for (Index r : rels) val(row, r) = 1;
    ++row;
  }
  ex.inputs.tensors.push_back(Tensor::from_canonical(2, m, std::move(idx), std::move(val)));
  for (int r = 3; r <= breadth; ++r) ex.inputs.tensors.emplace_back(r, m, 0);
  ex.tuples.push_back({local.at(h), local.at(t)});
  ex.labels.push_back(label);
  ex.channels.push_back(static_cast<int>(query.relation));
  return ex;
}

namespace {

double score(Model<float>& model, const Example& ex, double& seconds) {
  const auto t0 = std::chrono::steady_clock::now();
  auto fr = model.infer(ex.inputs);
  seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const Index n = ex.inputs.node_count();
  const auto key = row_key(ex.tuples[0].data(), 2, n);
  const auto keys = row_keys(*fr.logits.indices, n);
  const auto it = std::lower_bound(keys.begin(), keys.end(), key);
  const Index c = ex.channels[0];
  if (it != keys.end() && *it == key) {
    const Index row = static_cast<Index>(it - keys.begin());
    return 1.0 / (1.0 + std::exp(-static_cast<double>(fr.logits.values.value()(row, c))));
  }
  return model.absent_prediction()(0, c);
}

}  // namespace

Evaluation evaluate_edges(Model<float>& model, const KGView& view, std::span<const Triple> queries,
                          const RunConfig& cfg, int hit_negatives, std::uint64_t seed) {
  if (queries.empty()) throw EmptyEvaluationError("no evaluation queries");
  std::mt19937_64 rng(seed);
  Evaluation ev;
  std::vector<Scored> scored;
  std::vector<double> pos_scores;
  std::vector<std::vector<double>> neg_scores;
  double seconds = 0;
  long passes = 0;
  const int tau = cfg.effective_tau();
  auto run = [&](const Triple& q, float label) {
    auto ex = kg_query_example(view, q, label, tau, cfg.path_budget, cfg.subgraph, cfg.breadth, rng);
    ++passes;
    return score(model, ex, seconds);
  };
  for (const auto& q : queries) {
    const double p = run(q, 1.0f);
    scored.push_back({p, true, 1.0});
    const auto neg = corrupt(*view.graph, q, rng);
    if (neg != q) scored.push_back({run(neg, 0.0f), false, 1.0});
    if (hit_negatives > 0) {
      pos_scores.push_back(p);
      neg_scores.emplace_back();
      for (int k = 0; k < hit_negatives; ++k) {
        const auto c = corrupt(*view.graph, q, rng);
        if (c != q) neg_scores.back().push_back(run(c, 0.0f));
      }
    }
  }
  for (const auto& s : scored) ev.counts.add(s);
  ev.accuracy = ev.counts.balanced_accuracy();
  ev.auc_pr = auc_pr(scored);
  ev.hit10 = hit_negatives > 0 ? hit_at_k(pos_scores, neg_scores, 10) : std::numeric_limits<double>::quiet_NaN();
  ev.density_percent = std::numeric_limits<double>::quiet_NaN();
  ev.seconds_per_sample = passes > 0 ? seconds / static_cast<double>(passes) : 0.0;
  return ev;
}

KGSource::KGSource(const RunConfig& cfg) : cfg_(cfg) {
  if (cfg.train_triples.empty() || cfg.test_triples.empty())
    throw std::invalid_argument("kg task needs train_triples and test_triples");
  data_ = load_inductive_pair(cfg.train_triples, cfg.test_triples);
  init();
}

KGSource::KGSource(const RunConfig& cfg, KGPair data) : cfg_(cfg), data_(std::move(data)) { init(); }

void KGSource::init() {
  if (data_.train.triples.empty()) throw EmptyEvaluationError("train graph has no triples");
  if (data_.test.triples.empty()) throw EmptyEvaluationError("test graph has no triples");
  train_view_ = std::make_unique<KGView>(data_.train);
  test_view_ = std::make_unique<KGView>(data_.test);
  std::mt19937_64 rng(cfg_.seed * 0x9e3779b97f4a7c15ULL + 17);
  auto all = data_.train.triples;
  std::shuffle(all.begin(), all.end(), rng);
  const std::size_t valid = std::min<std::size_t>(all.size() / 10, static_cast<std::size_t>(std::max(1, cfg_.queries / 4)));
  valid_queries_.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(valid));
  train_queries_.assign(all.begin() + static_cast<std::ptrdiff_t>(valid), all.end());
  test_queries_ = data_.test.triples;
  std::shuffle(test_queries_.begin(), test_queries_.end(), rng);
  if (static_cast<int>(test_queries_.size()) > cfg_.queries) test_queries_.resize(static_cast<std::size_t>(cfg_.queries));
  if (train_queries_.empty()) train_queries_ = valid_queries_;
}

ModelConfig KGSource::model_config(const RunConfig& cfg) const {
  const int relations = static_cast<int>(data_.test.relations.size());
  return cfg.model_config({0, 1, relations}, 2, relations);
}

Example KGSource::sample(std::mt19937_64& rng) {
  const auto& q = train_queries_[static_cast<std::size_t>(pick(static_cast<Index>(train_queries_.size()), rng))];
  const bool positive = std::bernoulli_distribution(0.5)(rng);
  Triple t = q;
  if (!positive) t = corrupt(data_.train, q, rng);
  return kg_query_example(*train_view_, t, t == q ? 1.0f : 0.0f, cfg_.effective_tau(), cfg_.path_budget,
                          cfg_.subgraph, cfg_.breadth, rng);
}

Evaluation KGSource::validate(Model<float>& model) {
  return evaluate_edges(model, *train_view_, valid_queries_, cfg_, 0, cfg_.seed + 1);
}

Evaluation KGSource::test(Model<float>& model) {
  return evaluate_edges(model, *test_view_, test_queries_, cfg_, 50, cfg_.seed + 2);
}

std::uint64_t KGSource::input_hash() const {
  std::ostringstream os;
  write_triples(os, data_.train);
  os << "--\n";
  write_triples(os, data_.test);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : os.str()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void KGSource::write_artifacts(const std::string& dir) const {
  std::ofstream os(dir + "/relations.txt");
  data_.train.relations.write(os);
}

std::unique_ptr<TaskSource> make_kg_source(const RunConfig& cfg) { return std::make_unique<KGSource>(cfg); }

}  // namespace spaloc
