#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "opflow/baselines.hpp"
#include "opflow/datagen.hpp"
#include "opflow/metrics.hpp"
#include "opflow/trainer.hpp"

namespace opflow {

inline constexpr const char* kResultSchema = "opflow-result-1";

/// Where the data of a cell comes from: a saved dataset directory, or a
/// synthetic trust graph with `nodes` arcs (the prediction targets) simulated
/// under `sim`.
struct DatasetSpec {
  std::filesystem::path data_dir;
  std::size_t nodes = 500;
  double avg_out_degree = 4.0;
  double preferential = 0.5;
  SimConfig sim;
  std::size_t window = 38;
};

nlohmann::json to_json(const DatasetSpec& spec);
DatasetSpec dataset_spec_from_json(const nlohmann::json& j);

/// Dataset for a root seed. A saved directory is loaded as is; otherwise the
/// graph and simulation seeds are drawn from the "datagen" substream.
Dataset make_dataset(const DatasetSpec& spec, std::uint64_t seed);

struct ExperimentConfig {
  DatasetSpec dataset;
  /// "gcn-gru", "gru-only", "sl".
  std::vector<std::string> methods;
  std::vector<double> test_ratios;
  std::vector<double> conflict_ratios{0.0};
  std::vector<std::uint64_t> seeds{0};
  TrainConfig train;
  SlBaselineConfig sl;
  std::filesystem::path out_dir;
  std::size_t workers = 1;
  /// Write pred.csv / mask.csv next to each result.
  bool save_predictions = true;

  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct CellSpec {
  std::string method;
  double test_ratio = 0.3;
  double conflict_ratio = 0.0;
  std::uint64_t seed = 0;

  std::string name() const;
};

struct RunResult {
  CellSpec cell;
  bool ok = false;
  std::string error;
  double b_mae = 0.0;
  double u_mae = 0.0;
  MaeCurves curves;
  double train_seconds = 0.0;
  double predict_seconds = 0.0;
  std::size_t iterations = 0;
  std::string convergence;
  nlohmann::json config;
};

nlohmann::json to_json(const RunResult& r);

/// Everything a cell produces besides its metrics.
struct CellArtifacts {
  SplitPlan plan;
  DynamicOpinionField prediction;
  BoolArray mask;
};

/// Split, inject, train (for learned methods), predict, and score one cell.
/// Metrics are computed on the values as they would be stored in CSV.
RunResult run_cell(const Dataset& data, const CellSpec& cell, const ExperimentConfig& cfg,
                   CellArtifacts* artifacts = nullptr);

/// Runs every (method, test ratio, conflict ratio, seed) cell. Each cell writes
/// OUT/cells/<name>/result.json; OUT/results.csv aggregates the successful ones.
/// A failing cell is recorded and the matrix continues. The worker count is
/// cfg.workers unless OPFLOW_WORKERS is set.
std::vector<RunResult> run_matrix(const ExperimentConfig& cfg);

std::size_t worker_count(std::size_t configured);

void write_results_csv(const std::filesystem::path& path, const std::vector<RunResult>& results);

/// Random opinion field with every entry observed with probability `observed`.
DynamicOpinionField random_field(std::size_t times, std::size_t nodes, double observed, std::uint64_t seed);

struct ScalingPoint {
  std::string method;
  std::size_t nodes = 0;
  std::size_t edges = 0;
  double seconds = 0.0;
};

struct ScalingConfig {
  std::vector<std::size_t> sizes;
  double avg_degree = 10.0;
  std::size_t times = 10;
  /// Training iterations timed per size; the per-iteration minimum is kept.
  std::size_t iterations = 3;
  double test_ratio = 0.3;
  std::uint64_t seed = 0;
  SlBaselineConfig sl;
};

/// GCN-GRU (or GRU-only): seconds per training iteration, excluding setup.
/// SL: seconds for one full completion.
std::vector<ScalingPoint> scaling_sweep(const std::string& method, const ScalingConfig& cfg);

}  // namespace opflow
