#include "opflow/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <set>
#include <thread>

#include "opflow/errors.hpp"
#include "opflow/rng.hpp"

namespace opflow {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

const std::set<std::string>& known_methods() {
  static const std::set<std::string> names{"gcn-gru", "gru-only", "sl"};
  return names;
}

std::string ratio_tag(double r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", r);
  return buf;
}

nlohmann::json nan_to_null(const std::vector<double>& v) {
  nlohmann::json out = nlohmann::json::array();
  for (double x : v) {
    if (std::isnan(x)) {
      out.push_back(nullptr);
    } else {
      out.push_back(x);
    }
  }
  return out;
}

}  // namespace

nlohmann::json to_json(const DatasetSpec& spec) {
  nlohmann::json j = {{"nodes", spec.nodes},
                      {"avg_out_degree", spec.avg_out_degree},
                      {"preferential", spec.preferential},
                      {"sim", to_json(spec.sim)},
                      {"window", spec.window}};
  if (!spec.data_dir.empty()) j["data_dir"] = spec.data_dir.string();
  return j;
}

DatasetSpec dataset_spec_from_json(const nlohmann::json& j) {
  DatasetSpec spec;
  spec.data_dir = j.value("data_dir", std::string());
  spec.nodes = j.value("nodes", spec.nodes);
  spec.avg_out_degree = j.value("avg_out_degree", spec.avg_out_degree);
  spec.preferential = j.value("preferential", spec.preferential);
  if (j.contains("sim")) spec.sim = sim_config_from_json(j.at("sim"));
  spec.window = j.value("window", spec.window);
  return spec;
}

Dataset make_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  if (!spec.data_dir.empty()) return load_dataset(spec.data_dir);
  const Graph trust = synthetic_trust_graph(spec.nodes, spec.avg_out_degree, spec.preferential,
                                            substream_seed(seed, "datagen", 1));
  SimConfig sim = spec.sim;
  sim.seed = substream_seed(seed, "datagen", 0);
  return generate_dataset(trust, sim, spec.window);
}

void ExperimentConfig::validate() const {
  if (methods.empty()) throw Error(ErrorCode::invalid_argument, "no methods given");
  if (test_ratios.empty()) throw Error(ErrorCode::invalid_argument, "no test ratios given");
  if (conflict_ratios.empty()) throw Error(ErrorCode::invalid_argument, "no conflict ratios given");
  if (seeds.empty()) throw Error(ErrorCode::invalid_argument, "no seeds given");
  for (const auto& m : methods) {
    if (!known_methods().count(m)) throw Error(ErrorCode::invalid_argument, "unknown method " + m);
  }
  for (double r : test_ratios) {
    if (!(r > 0.0 && r < 1.0)) throw Error(ErrorCode::invalid_argument, "test ratio must be in (0, 1)");
  }
  for (double r : conflict_ratios) {
    if (!(r >= 0.0 && r < 1.0)) throw Error(ErrorCode::invalid_argument, "conflict ratio must be in [0, 1)");
  }
  train.validate();
  sl.validate();
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
  return {{"dataset", to_json(cfg.dataset)},
          {"methods", cfg.methods},
          {"test_ratios", cfg.test_ratios},
          {"conflict_ratios", cfg.conflict_ratios},
          {"seeds", cfg.seeds},
          {"train", to_json(cfg.train)},
          {"sl", to_json(cfg.sl)},
          {"out_dir", cfg.out_dir.string()},
          {"workers", cfg.workers},
          {"save_predictions", cfg.save_predictions}};
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  if (j.contains("dataset")) cfg.dataset = dataset_spec_from_json(j.at("dataset"));
  cfg.methods = j.at("methods").get<std::vector<std::string>>();
  cfg.test_ratios = j.at("test_ratios").get<std::vector<double>>();
  cfg.conflict_ratios = j.value("conflict_ratios", cfg.conflict_ratios);
  cfg.seeds = j.value("seeds", cfg.seeds);
  if (j.contains("train")) cfg.train = train_config_from_json(j.at("train"));
  if (j.contains("sl")) cfg.sl = sl_config_from_json(j.at("sl"));
  cfg.out_dir = j.value("out_dir", std::string("results"));
  cfg.workers = j.value("workers", cfg.workers);
  cfg.save_predictions = j.value("save_predictions", cfg.save_predictions);
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  try {
    return experiment_config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::format_error, path.string() + ": " + e.what());
  }
}

std::string CellSpec::name() const {
  return method + "_tr" + ratio_tag(test_ratio) + "_cr" + ratio_tag(conflict_ratio) + "_s" + std::to_string(seed);
}

nlohmann::json to_json(const RunResult& r) {
  nlohmann::json j = {{"schema", kResultSchema},
                      {"method", r.cell.method},
                      {"test_ratio", r.cell.test_ratio},
                      {"conflict_ratio", r.cell.conflict_ratio},
                      {"seed", r.cell.seed},
                      {"ok", r.ok},
                      {"config", r.config}};
  if (!r.ok) {
    j["error"] = r.error;
    return j;
  }
  j["b_mae"] = r.b_mae;
  j["u_mae"] = r.u_mae;
  j["b_mae_per_snapshot"] = nan_to_null(r.curves.b);
  j["u_mae_per_snapshot"] = nan_to_null(r.curves.u);
  j["train_seconds"] = r.train_seconds;
  j["predict_seconds"] = r.predict_seconds;
  j["iterations"] = r.iterations;
  j["convergence"] = r.convergence;
  return j;
}

RunResult run_cell(const Dataset& data, const CellSpec& cell, const ExperimentConfig& cfg, CellArtifacts* artifacts) {
  RunResult result;
  result.cell = cell;
  result.config = {{"dataset", to_json(cfg.dataset)}, {"window", data.window}};
  try {
    SplitPlan plan = make_split(data.truth, cell.test_ratio, substream_seed(cell.seed, "split"));
    plan.conflict_ratio = cell.conflict_ratio;
    DynamicOpinionField view = training_view(data.truth, plan);
    if (cell.conflict_ratio > 0.0) {
      auto injected =
          inject_conflicts(view, data.model_graph, cell.conflict_ratio, substream_seed(cell.seed, "conflicts"));
      view = std::move(injected.field);
      plan.injections = std::move(injected.log);
    }

    DynamicOpinionField pred;
    if (cell.method == "sl") {
      result.config["sl"] = to_json(cfg.sl);
      const auto t0 = Clock::now();
      pred = sl_predict(data.model_graph, view, cfg.sl);
      result.predict_seconds = seconds_since(t0);
    } else {
      TrainConfig tc = cfg.train;
      tc.method = parse_method(cell.method);
      tc.seed = cell.seed;
      result.config["train"] = to_json(tc);
      auto t0 = Clock::now();
      TrainResult trained = train(data.model_graph, view, tc);
      result.train_seconds = seconds_since(t0);
      result.iterations = trained.report.iterations_run;
      result.convergence = trained.report.convergence_reason;
      t0 = Clock::now();
      pred = predict(*trained.model, view);
      result.predict_seconds = seconds_since(t0);
    }

    const BoolArray mask = test_mask(data.truth, plan);
    const DynamicOpinionField stored_pred = round_to_csv_precision(pred);
    const DynamicOpinionField stored_truth = round_to_csv_precision(data.truth);
    result.b_mae = b_mae(stored_pred, stored_truth, mask);
    result.u_mae = u_mae(stored_pred, stored_truth, mask);
    result.curves = snapshot_mae(stored_pred, stored_truth, mask);
    result.ok = true;
    if (artifacts) *artifacts = {std::move(plan), std::move(pred), mask};
  } catch (const std::exception& e) {
    result.ok = false;
    result.error = e.what();
  }
  return result;
}

std::size_t worker_count(std::size_t configured) {
  if (const char* env = std::getenv("OPFLOW_WORKERS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    std::clog << "warning: ignoring OPFLOW_WORKERS=" << env << '\n';
  }
  return std::max<std::size_t>(configured, 1);
}

void write_results_csv(const std::filesystem::path& path, const std::vector<RunResult>& results) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  out << "method,test_ratio,conflict_ratio,seed,b_mae,u_mae,train_seconds,predict_seconds,iterations\n";
  char buf[512];
  for (const auto& r : results) {
    if (!r.ok) continue;
    std::snprintf(buf, sizeof buf, "%s,%g,%g,%llu,%.17g,%.17g,%.6f,%.6f,%zu\n", r.cell.method.c_str(),
                  r.cell.test_ratio, r.cell.conflict_ratio, static_cast<unsigned long long>(r.cell.seed), r.b_mae,
                  r.u_mae, r.train_seconds, r.predict_seconds, r.iterations);
    out << buf;
  }
}

std::vector<RunResult> run_matrix(const ExperimentConfig& cfg) {
  cfg.validate();
  std::filesystem::create_directories(cfg.out_dir / "cells");
  {
    std::ofstream out(cfg.out_dir / "config.json");
    out << to_json(cfg).dump(2) << '\n';
  }

  // One dataset per seed, shared by that seed's cells.
  std::map<std::uint64_t, std::filesystem::path> data_dirs;
  std::map<std::uint64_t, std::shared_ptr<const Dataset>> datasets;
  std::map<std::uint64_t, std::string> data_errors;
  for (std::uint64_t seed : cfg.seeds) {
    if (datasets.count(seed) || data_errors.count(seed)) continue;
    try {
      auto data = std::make_shared<const Dataset>(make_dataset(cfg.dataset, seed));
      if (cfg.dataset.data_dir.empty()) {
        data_dirs[seed] = cfg.out_dir / "data" / ("seed-" + std::to_string(seed));
        save_dataset(data_dirs[seed], *data);
      } else {
        data_dirs[seed] = cfg.dataset.data_dir;
      }
      datasets[seed] = std::move(data);
    } catch (const std::exception& e) {
      data_errors[seed] = e.what();
    }
  }

  std::vector<CellSpec> cells;
  for (const auto& m : cfg.methods)
    for (double tr : cfg.test_ratios)
      for (double cr : cfg.conflict_ratios)
        for (std::uint64_t s : cfg.seeds) cells.push_back({m, tr, cr, s});

  std::vector<RunResult> results(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto work = [&] {
    for (std::size_t k = next++; k < cells.size(); k = next++) {
      const CellSpec& cell = cells[k];
      RunResult r;
      const auto cell_dir = cfg.out_dir / "cells" / cell.name();
      std::filesystem::create_directories(cell_dir);
      if (auto it = data_errors.find(cell.seed); it != data_errors.end()) {
        r.cell = cell;
        r.error = it->second;
      } else {
        CellArtifacts art;
        r = run_cell(*datasets.at(cell.seed), cell, cfg, &art);
        if (r.ok) {
          r.config["truth"] = std::filesystem::absolute(data_dirs.at(cell.seed) / "opinions.csv").string();
          r.config["split"] = to_json(art.plan);
          if (cfg.save_predictions) {
            write_opinion_csv(cell_dir / "pred.csv", art.prediction);
            write_mask_csv(cell_dir / "mask.csv", art.mask);
          }
        }
      }
      std::ofstream(cell_dir / "result.json") << to_json(r).dump(2) << '\n';
      {
        std::lock_guard lock(log_mutex);
        if (r.ok) {
          std::clog << cell.name() << ": b_mae=" << r.b_mae << " u_mae=" << r.u_mae << '\n';
        } else {
          std::clog << cell.name() << ": failed: " << r.error << '\n';
        }
      }
      results[k] = std::move(r);
    }
  };
  const std::size_t workers = std::min(worker_count(cfg.workers), std::max<std::size_t>(cells.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();

  write_results_csv(cfg.out_dir / "results.csv", results);
  return results;
}

DynamicOpinionField random_field(std::size_t times, std::size_t nodes, double observed, std::uint64_t seed) {
  Rng rng(seed, "random-field");
  auto field = DynamicOpinionField::unobserved(times, nodes);
  for (std::size_t t = 0; t < times; ++t) {
    for (std::size_t i = 0; i < nodes; ++i) {
      const double u = rng.uniform(0.05, 1.0);
      const double b = rng.uniform() * (1.0 - u);
      const bool seen = rng.bernoulli(observed);
      if (seen) field.set(t, i, Opinion::make(b, 1.0 - u - b, u));
    }
  }
  return field;
}

std::vector<ScalingPoint> scaling_sweep(const std::string& method, const ScalingConfig& cfg) {
  if (!known_methods().count(method)) throw Error(ErrorCode::invalid_argument, "unknown method " + method);
  std::vector<ScalingPoint> points;
  for (std::size_t n : cfg.sizes) {
    const Graph graph = random_graph(n, cfg.avg_degree, substream_seed(cfg.seed, "bench-graph", n));
    DynamicOpinionField field = random_field(cfg.times, n, 1.0, substream_seed(cfg.seed, "bench-field", n));
    const SplitPlan plan = make_split(field, cfg.test_ratio, substream_seed(cfg.seed, "split", n));
    field = training_view(field, plan);

    ScalingPoint p{method, n, graph.num_edges(), 0.0};
    if (method == "sl") {
      const auto t0 = Clock::now();
      (void)sl_predict(graph, field, cfg.sl);
      p.seconds = seconds_since(t0);
    } else {
      TrainConfig tc;
      tc.method = parse_method(method);
      tc.seed = cfg.seed;
      tc.max_iters = 1;
      tc.tol = 0.0;
      auto model = make_model(graph, tc);
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < std::max<std::size_t>(cfg.iterations, 1); ++k) {
        const auto t0 = Clock::now();
        (void)fit(*model, field, tc);
        best = std::min(best, seconds_since(t0));
      }
      p.seconds = best;
    }
    points.push_back(p);
  }
  return points;
}

}  // namespace opflow
