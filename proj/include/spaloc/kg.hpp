#pragma once

#include "spaloc/trainer.hpp"
#include "spaloc/triples.hpp"

#include <random>
#include <span>
#include <vector>

namespace spaloc {

/// A triple graph with the derived structures the samplers need.
struct KGView {
  const TripleGraph* graph = nullptr;
  Hypergraph hyper;
  std::vector<std::vector<Index>> incident;

  explicit KGView(const TripleGraph& g) : graph(&g), hyper(g.graph()), incident(g.incident()) {}
};

/// Subgraph around the query pair: nodes on connecting walks of at most tau
/// hops drawn by the path sampler, trimmed or padded with breadth-first
/// neighbours of the two ends to `size` nodes. The query triple itself is
/// hidden from the inputs. Inputs: one constant channel per node and one
/// channel per relation on related ordered pairs.
Example kg_query_example(const KGView& view, const Triple& query, float label, int tau, int budget, Index size,
                         int breadth, std::mt19937_64& rng);

/// A triple (h, r, t') or (h', r, t) that is not in the graph; the same
/// triple back if no corruption is found.
Triple corrupt(const TripleGraph& g, const Triple& t, std::mt19937_64& rng);

/// Single-edge evaluation: every query against one corruption for accuracy
/// and AUC-PR, and against `hit_negatives` corruptions for Hit@10 when > 0.
Evaluation evaluate_edges(Model<float>& model, const KGView& view, std::span<const Triple> queries,
                          const RunConfig& cfg, int hit_negatives, std::uint64_t seed);

/// Triple-file task: training queries from the train graph, test queries
/// from the (entity-disjoint) test graph. Validation uses train-graph
/// triples that are never drawn as training queries.
class KGSource : public TaskSource {
 public:
  explicit KGSource(const RunConfig& cfg);
  KGSource(const RunConfig& cfg, KGPair data);

  ModelConfig model_config(const RunConfig& cfg) const override;
  Example sample(std::mt19937_64& rng) override;
  Evaluation validate(Model<float>& model) override;
  Evaluation test(Model<float>& model) override;
  std::uint64_t input_hash() const override;
  /// relations.txt, the relation vocabulary in channel order.
  void write_artifacts(const std::string& dir) const override;

  const KGPair& data() const { return data_; }

 private:
  void init();

  RunConfig cfg_;
  KGPair data_;
  std::unique_ptr<KGView> train_view_;
  std::unique_ptr<KGView> test_view_;
  std::vector<Triple> train_queries_;
  std::vector<Triple> valid_queries_;
  std::vector<Triple> test_queries_;
};

}  // namespace spaloc
