#include "spaloc/experiments.hpp"
#include "spaloc/kg.hpp"
#include "spaloc/trainer.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

namespace fs = std::filesystem;
using namespace spaloc;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

std::vector<fs::path> world_files(const std::string& data) {
  std::vector<fs::path> files;
  if (fs::is_directory(data)) {
    for (const auto& e : fs::directory_iterator(data))
      if (e.path().filename().string().rfind("world_", 0) == 0) files.push_back(e.path());
    std::sort(files.begin(), files.end());
  } else {
    files.emplace_back(data);
  }
  if (files.empty()) throw std::runtime_error("no world files under " + data);
  return files;
}

void print_evaluation(const Evaluation& ev, const std::string& split) {
  MetricsRow row;
  row.split = split;
  row.loss = std::nan("");
  row.accuracy = ev.accuracy;
  row.auc_pr = ev.auc_pr;
  row.hit10 = ev.hit10;
  row.density_percent = ev.density_percent;
  row.peak_bytes = ev.peak_bytes;
  row.seconds_per_sample = ev.seconds_per_sample;
  write_metrics_header(std::cout, true);
  write_metrics_row(std::cout, row, true);
}

std::vector<Index> parse_sizes(const std::string& text) {
  std::vector<Index> out;
  std::stringstream s(text);
  std::string item;
  while (std::getline(s, item, ','))
    if (!item.empty()) out.push_back(static_cast<Index>(std::stol(item)));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse hypergraph reasoning: data generation, training, evaluation and benchmarks"};
  app.require_subcommand(1);

  // gen-family
  auto* gen = app.add_subcommand("gen-family", "Generate family-tree worlds and their targets");
  std::string gen_task = "Grandparent", gen_out;
  Index gen_n = 20;
  int gen_count = 1;
  std::uint64_t gen_seed = 1;
  double gen_parent = 0.85;
  gen->add_option("--task", gen_task, "Target relation")->capture_default_str();
  gen->add_option("--n", gen_n, "Persons per world")->capture_default_str();
  gen->add_option("--count", gen_count, "Number of worlds")->capture_default_str();
  gen->add_option("--seed", gen_seed, "Seed of the first world")->capture_default_str();
  gen->add_option("--parent-prob", gen_parent, "Probability that a person gets parents")->capture_default_str();
  gen->add_option("--out", gen_out, "Output directory")->required();

  // gen-kg
  auto* genkg = app.add_subcommand("gen-kg", "Write a synthetic inductive triple split (train.tsv, test.tsv)");
  Index kg_persons = 60;
  int kg_train = 4, kg_test = 2;
  std::uint64_t kg_seed = 1;
  std::string kg_out;
  genkg->add_option("--persons", kg_persons, "Persons per family world")->capture_default_str();
  genkg->add_option("--train-worlds", kg_train)->capture_default_str();
  genkg->add_option("--test-worlds", kg_test)->capture_default_str();
  genkg->add_option("--seed", kg_seed)->capture_default_str();
  genkg->add_option("--out", kg_out, "Output directory")->required();

  // train
  auto* tr = app.add_subcommand("train", "Train a model from a key = value config");
  std::string tr_config;
  std::vector<std::string> tr_overrides;
  bool tr_quiet = false;
  tr->add_option("--config", tr_config, "Config file");
  tr->add_option("--override", tr_overrides, "key=value, applied after the file")->allow_extra_args(false);
  tr->add_flag("--quiet", tr_quiet, "No per-epoch log");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string ev_ckpt, ev_data, ev_mode = "graph", ev_task, ev_relations, ev_config;
  ev->add_option("--ckpt", ev_ckpt)->required();
  ev->add_option("--data", ev_data, "graph: world file or directory; edge: triple TSV")->required();
  ev->add_option("--mode", ev_mode)->check(CLI::IsMember({"graph", "edge"}))->capture_default_str();
  ev->add_option("--task", ev_task, "graph mode target relation");
  ev->add_option("--relations", ev_relations, "edge mode relation vocabulary (relations.txt of the run)");
  ev->add_option("--config", ev_config, "edge mode sampler settings (config.txt of the run)");

  // bench
  auto* be = app.add_subcommand("bench", "Inference memory and time against domain size");
  std::string be_ckpt, be_sizes = "50,100,200,400,800", be_dense = "20,40,60", be_out;
  int be_worlds = 2;
  be->add_option("--ckpt", be_ckpt)->required();
  be->add_option("--sizes", be_sizes, "Sparse model sizes")->capture_default_str();
  be->add_option("--dense-sizes", be_dense, "Dense reference sizes")->capture_default_str();
  be->add_option("--worlds", be_worlds, "Worlds per size")->capture_default_str();
  be->add_option("--out", be_out, "Directory for scaling.csv and scaling_plot.csv");

  // ablate
  auto* ab = app.add_subcommand("ablate", "Run an ablation grid");
  std::string ab_kind, ab_out, ab_tasks, ab_sizes;
  std::vector<std::string> ab_overrides;
  bool ab_mis_only = false;
  ab->add_option("--kind", ab_kind)->required()->check(CLI::IsMember({"samplers", "label_adjust", "sparsity_loss"}));
  ab->add_option("--override", ab_overrides, "key=value for every cell")->allow_extra_args(false);
  ab->add_option("--tasks", ab_tasks, "Comma-separated task list");
  ab->add_option("--sizes", ab_sizes, "samplers: comma-separated training sizes");
  ab->add_flag("--mis-only", ab_mis_only, "samplers: skip training, report MIS");
  ab->add_option("--out", ab_out, "Directory for ablation.csv and ablation.txt");

  // sample-stats
  auto* ss = app.add_subcommand("sample-stats", "Mean information sufficiency of a sampler");
  std::string ss_sampler = "neighbor";
  Index ss_n = 1000, ss_ns = 20;
  int ss_tau = 2, ss_samples = 20;
  std::uint64_t ss_seed = 1;
  ss->add_option("--sampler", ss_sampler)->check(CLI::IsMember({"node", "walk", "neighbor"}))->capture_default_str();
  ss->add_option("--n", ss_n)->capture_default_str();
  ss->add_option("--ns", ss_ns)->capture_default_str();
  ss->add_option("--tau", ss_tau)->capture_default_str();
  ss->add_option("--samples", ss_samples)->capture_default_str();
  ss->add_option("--seed", ss_seed)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const Task task = parse_task(gen_task);
      fs::create_directories(gen_out);
      FamilyOptions opts;
      opts.parent_prob = gen_parent;
      for (int i = 0; i < gen_count; ++i) {
        const auto t = generate_family_tree(gen_n, gen_seed + static_cast<std::uint64_t>(i), opts);
        std::ostringstream name;
        name << std::setw(4) << std::setfill('0') << i;
        auto os = open_out(fs::path(gen_out) / ("world_" + name.str() + ".txt"));
        write_world(os, t);
        auto ts = open_out(fs::path(gen_out) / ("targets_" + name.str() + ".tsv"));
        for (const auto& tuple : eval_target(t, task)) {
          for (std::size_t k = 0; k < tuple.size(); ++k) ts << (k ? "\t" : "") << tuple[k];
          ts << '\n';
        }
      }
      std::cout << "wrote " << gen_count << " worlds to " << gen_out << '\n';
    } else if (*genkg) {
      const auto kg = synthetic_family_kg(kg_persons, kg_train, kg_test, kg_seed);
      fs::create_directories(kg_out);
      auto a = open_out(fs::path(kg_out) / "train.tsv");
      write_triples(a, kg.train);
      auto b = open_out(fs::path(kg_out) / "test.tsv");
      write_triples(b, kg.test);
      std::cout << "train: " << kg.train.entity_count() << " entities, " << kg.train.triples.size()
                << " triples; test: " << kg.test.entity_count() << " entities, " << kg.test.triples.size()
                << " triples\n";
    } else if (*tr) {
      RunConfig cfg;
      if (!tr_config.empty()) cfg = RunConfig::read_file(tr_config);
      else if (std::find(tr_overrides.begin(), tr_overrides.end(), "task=kg") != tr_overrides.end())
        cfg = kg_defaults();
      for (const auto& o : tr_overrides) cfg.apply_override(o);
      auto source = make_source(cfg);
      const auto result = train(cfg, *source, tr_quiet ? nullptr : &std::cerr);
      write_run(cfg, *source, result);
      std::cout << "test accuracy " << result.test.accuracy << " auc_pr " << result.test.auc_pr;
      if (!std::isnan(result.test.hit10)) std::cout << " hit@10 " << result.test.hit10;
      if (!std::isnan(result.test.density_percent)) std::cout << " density " << result.test.density_percent << '%';
      std::cout << " epochs " << result.epochs << " best " << result.best_epoch << " seconds " << result.seconds
                << '\n';
      if (!cfg.out.empty()) std::cout << "run written to " << cfg.out << '\n';
    } else if (*ev) {
      auto model = load_checkpoint(ev_ckpt);
      if (ev_mode == "graph") {
        if (ev_task.empty()) throw std::invalid_argument("graph mode needs --task");
        std::vector<FamilyTree> worlds;
        for (const auto& f : world_files(ev_data)) {
          std::ifstream in(f);
          worlds.push_back(read_world(in));
        }
        print_evaluation(evaluate_family(model, worlds, parse_task(ev_task)), "eval");
      } else {
        if (ev_relations.empty()) throw std::invalid_argument("edge mode needs --relations");
        std::ifstream rin(ev_relations);
        if (!rin) throw std::runtime_error("cannot open " + ev_relations);
        auto relations = Vocabulary::read(rin);
        RunConfig cfg = ev_config.empty() ? kg_defaults() : RunConfig::read_file(ev_config);
        const auto graph = load_triples(ev_data, relations);
        if (graph.relations.size() != model.config().output_channels)
          throw std::invalid_argument("data has relations the model was not trained on");
        KGView view(graph);
        std::vector<Triple> queries = graph.triples;
        std::mt19937_64 rng(cfg.seed);
        std::shuffle(queries.begin(), queries.end(), rng);
        if (static_cast<int>(queries.size()) > cfg.queries) queries.resize(static_cast<std::size_t>(cfg.queries));
        print_evaluation(evaluate_edges(model, view, queries, cfg, 50, cfg.seed + 2), "eval");
      }
    } else if (*be) {
      auto model = load_checkpoint(be_ckpt);
      ScalingOptions opt;
      opt.sizes = parse_sizes(be_sizes);
      opt.dense_sizes = parse_sizes(be_dense);
      opt.worlds = be_worlds;
      const auto report = bench_scaling(model, opt, &std::cerr);
      write_scaling_csv(std::cout, report);
      auto exponent = [](const std::optional<double>& e) {
        std::ostringstream s;
        if (e) s << std::fixed << std::setprecision(3) << *e;
        else s << "n/a";
        return s.str();
      };
      std::cout << "memory exponent: sparse " << exponent(report.sparse_memory_exponent) << ", dense "
                << exponent(report.dense_memory_exponent) << "\ntime exponent: sparse "
                << exponent(report.sparse_time_exponent) << ", dense " << exponent(report.dense_time_exponent)
                << '\n';
      if (!be_out.empty()) {
        fs::create_directories(be_out);
        auto a = open_out(fs::path(be_out) / "scaling.csv");
        write_scaling_csv(a, report);
        auto b = open_out(fs::path(be_out) / "scaling_plot.csv");
        write_scaling_plot(b, report);
      }
    } else if (*ab) {
      const auto kind = parse_ablation_kind(ab_kind);
      auto opt = default_ablation(kind);
      for (const auto& o : ab_overrides) opt.base.apply_override(o);
      if (!ab_tasks.empty()) {
        opt.tasks.clear();
        std::stringstream s(ab_tasks);
        std::string t;
        while (std::getline(s, t, ','))
          if (!t.empty()) opt.tasks.push_back(t);
      }
      if (!ab_sizes.empty()) opt.sizes = parse_sizes(ab_sizes);
      opt.train = !ab_mis_only;
      const auto cells = run_ablation(kind, opt, &std::cerr);
      write_ablation_table(std::cout, kind, cells);
      if (!ab_out.empty()) {
        fs::create_directories(ab_out);
        auto a = open_out(fs::path(ab_out) / "ablation.csv");
        write_ablation_csv(a, cells);
        auto b = open_out(fs::path(ab_out) / "ablation.txt");
        write_ablation_table(b, kind, cells);
      }
    } else if (*ss) {
      const auto kind = parse_sampler(ss_sampler);
      SamplerStat st;
      st.sampler = ss_sampler;
      st.n = ss_n;
      st.ns = ss_ns;
      st.seed = ss_seed;
      st.mis_percent = sampler_mis(kind, ss_n, ss_ns, ss_tau, ss_samples, ss_seed);
      write_sampler_stats(std::cout, {st});
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
