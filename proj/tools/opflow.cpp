// opflow command-line interface.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "opflow/baselines.hpp"
#include "opflow/checkpoint.hpp"
#include "opflow/datagen.hpp"
#include "opflow/errors.hpp"
#include "opflow/experiment.hpp"
#include "opflow/metrics.hpp"
#include "opflow/rng.hpp"
#include "opflow/trainer.hpp"

namespace fs = std::filesystem;
using namespace opflow;

namespace {

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  return nlohmann::json::parse(in);
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct GenerateArgs {
  fs::path edges, out;
  std::size_t realizations = 100, window = 38, sample_nodes = 0, exploration_steps = 1000;
  std::uint64_t seed = 0;
};

int cmd_generate(const GenerateArgs& a) {
  Graph trust = read_edge_list(a.edges, true).graph;
  if (a.sample_nodes > 0) trust = sample_subnetwork(trust, a.sample_nodes, substream_seed(a.seed, "datagen", 2)).graph;
  SimConfig sim;
  sim.realizations = a.realizations;
  sim.exploration_steps = a.exploration_steps;
  sim.seed = substream_seed(a.seed, "datagen", 0);
  const Dataset data = generate_dataset(trust, sim, a.window);
  save_dataset(a.out, data);
  std::cout << "wrote " << a.out.string() << ": " << data.truth.nodes() << " nodes, " << data.truth.times()
            << " snapshots, " << data.truth.observed_count() << " observed entries\n";
  return 0;
}

struct MakeGraphArgs {
  std::size_t arcs = 500;
  double avg_out_degree = 4.0, preferential = 0.5;
  std::uint64_t seed = 0;
  fs::path out;
};

int cmd_make_graph(const MakeGraphArgs& a) {
  const Graph g = synthetic_trust_graph(a.arcs, a.avg_out_degree, a.preferential, a.seed);
  write_edge_list(a.out, g);
  std::cout << "wrote " << a.out.string() << ": " << g.num_nodes() << " nodes, " << g.num_edges() << " arcs\n";
  return 0;
}

struct TrainArgs {
  fs::path data, out;
  std::string method = "gcn-gru";
  double test_ratio = 0.3, conflict_ratio = 0.0;
  std::string objective = "per-node";
  TrainConfig cfg;
};

// Training view of a dataset under a split plan, with its injections applied.
DynamicOpinionField prepared_view(const Dataset& data, const SplitPlan& plan) {
  DynamicOpinionField view = training_view(data.truth, plan);
  apply_injections(view, plan.injections);
  return view;
}

int cmd_train(TrainArgs a) {
  const Dataset data = load_dataset(a.data);
  a.cfg.method = parse_method(a.method);
  a.cfg.objective = parse_objective(a.objective);
  SplitPlan plan = make_split(data.truth, a.test_ratio, substream_seed(a.cfg.seed, "split"));
  plan.conflict_ratio = a.conflict_ratio;
  if (a.conflict_ratio > 0.0) {
    plan.injections = inject_conflicts(training_view(data.truth, plan), data.model_graph, a.conflict_ratio,
                                       substream_seed(a.cfg.seed, "conflicts"))
                          .log;
  }
  const DynamicOpinionField view = prepared_view(data, plan);
  TrainResult result = train(data.model_graph, view, a.cfg);

  fs::create_directories(a.out);
  const nlohmann::json meta = {{"train", to_json(a.cfg)},
                               {"split", to_json(plan)},
                               {"data", fs::absolute(a.data).string()},
                               {"nodes", data.truth.nodes()},
                               {"times", data.truth.times()}};
  save_checkpoint(a.out / "checkpoint.ckpt", result.model->parameters(), meta);
  write_run_log(a.out / "run_log.json", a.cfg, result.report);
  write_json(a.out / "manifest.json", {{"split", to_json(plan)}, {"checkpoint", "checkpoint.ckpt"}});
  write_mask_csv(a.out / "mask.csv", test_mask(data.truth, plan));
  const auto& hist = result.report.loss_history;
  std::cout << "trained " << a.method << ": " << result.report.iterations_run << " iterations ("
            << result.report.convergence_reason << "), loss " << hist.front() << " -> " << hist.back() << '\n';
  return 0;
}

struct PredictArgs {
  fs::path data, checkpoint, out;
};

int cmd_predict(const PredictArgs& a) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const Dataset data = load_dataset(a.data);
  const TrainConfig cfg = train_config_from_json(ckpt.meta.at("train"));
  const SplitPlan plan = split_plan_from_json(ckpt.meta.at("split"));
  const DynamicOpinionField view = prepared_view(data, plan);
  auto model = make_model(data.model_graph, cfg);
  restore_parameters(ckpt, model->parameters());
  write_opinion_csv(a.out, predict(*model, view));
  std::cout << "wrote " << a.out.string() << '\n';
  return 0;
}

struct EvaluateArgs {
  fs::path pred, truth, mask, out;
};

int cmd_evaluate(const EvaluateArgs& a) {
  const DynamicOpinionField pred = read_opinion_csv(a.pred);
  const DynamicOpinionField truth = read_opinion_csv(a.truth);
  const BoolArray mask = read_mask_csv(a.mask, truth.times(), truth.nodes());
  const double b = b_mae(pred, truth, mask);
  const double u = u_mae(pred, truth, mask);
  const MaeCurves curves = snapshot_mae(pred, truth, mask);
  std::cout << "b_mae=" << fmt17(b) << " u_mae=" << fmt17(u) << '\n';
  nlohmann::json j = {{"schema", kResultSchema},
                      {"pred", a.pred.string()},
                      {"truth", a.truth.string()},
                      {"mask", a.mask.string()},
                      {"test_entries", mask.count()},
                      {"b_mae", b},
                      {"u_mae", u},
                      {"b_mae_per_snapshot", curves.b},
                      {"u_mae_per_snapshot", curves.u}};
  const fs::path out = a.out.empty() ? fs::path(a.pred.string() + ".eval.json") : a.out;
  write_json(out, j);
  return 0;
}

struct BenchArgs {
  std::vector<std::size_t> sizes{500, 1000, 2000, 4000};
  std::vector<std::string> methods{"gcn-gru"};
  ScalingConfig cfg;
  fs::path out;
};

int cmd_bench(BenchArgs a) {
  a.cfg.sizes = a.sizes;
  fs::create_directories(a.out);
  std::ofstream csv(a.out / "scaling.csv");
  csv << "method,nodes,edges,seconds\n";
  nlohmann::json summary = nlohmann::json::object();
  for (const auto& method : a.methods) {
    const auto points = scaling_sweep(method, a.cfg);
    std::vector<double> x, y;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& p : points) {
      csv << p.method << ',' << p.nodes << ',' << p.edges << ',' << fmt17(p.seconds) << '\n';
      rows.push_back({{"nodes", p.nodes}, {"edges", p.edges}, {"seconds", p.seconds}});
      x.push_back(static_cast<double>(p.nodes));
      y.push_back(p.seconds);
    }
    const double slope = points.size() >= 2 ? loglog_slope(x, y) : 0.0;
    summary[method] = {{"points", rows}, {"loglog_slope", slope}};
    std::cout << method << ": log-log slope " << slope << '\n';
  }
  write_json(a.out / "scaling.json", summary);
  return 0;
}

int cmd_run(const fs::path& config) {
  const auto results = run_matrix(load_experiment_config(config));
  std::size_t failed = 0;
  for (const auto& r : results) failed += r.ok ? 0 : 1;
  std::cout << results.size() - failed << " cells ok, " << failed << " failed\n";
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Opinion inference on dynamic networks"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Simulate trust observations and build ground truth");
  generate->add_option("--edges", gen.edges, "Directed trust edge list")->required()->check(CLI::ExistingFile);
  generate->add_option("--realizations", gen.realizations, "Number of realizations T")->required();
  generate->add_option("--window", gen.window, "Window size K")->required();
  generate->add_option("--seed", gen.seed, "Root seed")->required();
  generate->add_option("--out", gen.out, "Output directory")->required();
  generate->add_option("--sample-nodes", gen.sample_nodes, "Sample a connected subnetwork of this many nodes first");
  generate->add_option("--exploration-steps", gen.exploration_steps, "Exploration steps per realization");

  MakeGraphArgs mg;
  auto* make_graph = app.add_subcommand("make-graph", "Write a synthetic directed trust graph");
  make_graph->add_option("--arcs", mg.arcs, "Number of arcs")->required();
  make_graph->add_option("--avg-out-degree", mg.avg_out_degree, "Average out-degree");
  make_graph->add_option("--preferential", mg.preferential, "Probability of in-degree-proportional heads");
  make_graph->add_option("--seed", mg.seed, "Seed");
  make_graph->add_option("--out", mg.out, "Output edge list")->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a generated dataset");
  train_cmd->add_option("--data", tr.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--method", tr.method, "gcn-gru or gru-only")->check(CLI::IsMember({"gcn-gru", "gru-only"}));
  train_cmd->add_option("--test-ratio", tr.test_ratio, "Fraction of nodes hidden for testing");
  train_cmd->add_option("--conflict-ratio", tr.conflict_ratio, "Fraction of entries given conflicting opinions");
  train_cmd->add_option("--lambda", tr.cfg.lambda, "Weight of the uncertainty loss");
  train_cmd->add_option("--eta", tr.cfg.eta, "Learning rate");
  train_cmd->add_option("--hidden", tr.cfg.hidden, "Hidden channels P");
  train_cmd->add_option("--max-iters", tr.cfg.max_iters, "Iteration cap");
  train_cmd->add_option("--seed", tr.cfg.seed, "Root seed");
  train_cmd->add_option("--dropout", tr.cfg.dropout, "Input dropout rate");
  train_cmd->add_option("--order", tr.cfg.cheb_order, "Chebyshev order");
  train_cmd->add_option("--objective", tr.objective, "Loss scaling for the gradient: sum, mean or per-node")
      ->check(CLI::IsMember({"sum", "mean", "per-node"}));
  train_cmd->add_option("--bias", tr.cfg.bias, "Add bias terms to every convolution");
  train_cmd->add_option("--out", tr.out, "Output directory")->required();

  PredictArgs pr;
  auto* predict_cmd = app.add_subcommand("predict", "Complete a dataset with a trained model");
  predict_cmd->add_option("--data", pr.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  predict_cmd->add_option("--checkpoint", pr.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--out", pr.out, "Prediction CSV")->required();

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against ground truth");
  evaluate->add_option("--pred", ev.pred, "Prediction CSV")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--truth", ev.truth, "Ground-truth CSV")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--mask", ev.mask, "Test-entry CSV")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--out", ev.out, "Result JSON (default PRED.eval.json)");

  BenchArgs be;
  auto* bench = app.add_subcommand("bench", "Runtime scaling sweep");
  bench->add_option("--sizes", be.sizes, "Node counts")->delimiter(',');
  bench->add_option("--methods", be.methods, "gcn-gru, gru-only, sl")->delimiter(',');
  bench->add_option("--avg-degree", be.cfg.avg_degree, "Average degree");
  bench->add_option("--times", be.cfg.times, "Snapshots");
  bench->add_option("--iterations", be.cfg.iterations, "Timed iterations per size");
  bench->add_option("--seed", be.cfg.seed, "Seed");
  bench->add_option("--out", be.out, "Output directory")->required();

  fs::path run_config;
  auto* run = app.add_subcommand("run", "Run an experiment matrix");
  run->add_option("--config", run_config, "Experiment JSON")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*generate) return cmd_generate(gen);
    if (*make_graph) return cmd_make_graph(mg);
    if (*train_cmd) return cmd_train(tr);
    if (*predict_cmd) return cmd_predict(pr);
    if (*evaluate) return cmd_evaluate(ev);
    if (*bench) return cmd_bench(be);
    if (*run) return cmd_run(run_config);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
