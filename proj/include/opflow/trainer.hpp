#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "opflow/graph.hpp"
#include "opflow/opinion_model.hpp"

namespace opflow {

enum class Method { gcn_gru, gru_only };

std::string to_string(Method m);
/// Accepts "gcn-gru" and "gru-only".
Method parse_method(const std::string& name);

/// How the summed L1 objective is scaled for the gradient step.
enum class ObjectiveScale {
  sum,       ///< raw sum over observed entries
  mean,      ///< divided by the number of observed entries
  per_node,  ///< divided by the number of nodes
};

std::string to_string(ObjectiveScale s);
/// Accepts "sum", "mean" and "per-node".
ObjectiveScale parse_objective(const std::string& name);

/// Consecutive iterations whose relative loss change must stay below tol.
inline constexpr std::size_t kTolerancePatience = 5;

struct TrainConfig {
  Method method = Method::gcn_gru;
  double eta = 0.01;
  double lambda = 1.0;
  std::size_t hidden = 16;
  std::size_t max_iters = 500;
  double tol = 1e-5;
  std::uint64_t seed = 0;
  double dropout = 0.2;
  std::size_t cheb_order = 1;
  bool bias = false;
  LaplacianKind laplacian = LaplacianKind::normalized;
  ObjectiveScale objective = ObjectiveScale::per_node;

  /// Throws Error(invalid_argument) when a field is out of range.
  void validate() const;
  ModelConfig model_config() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct TrainReport {
  /// Summed loss (before scaling) of each iteration's forward pass.
  std::vector<double> loss_history;
  std::size_t iterations_run = 0;
  double forward_seconds = 0.0;
  double backward_seconds = 0.0;
  /// "tolerance", "max_iters".
  std::string convergence_reason;
};

struct TrainResult {
  std::unique_ptr<OpinionModel> model;
  TrainReport report;
};

/// Builds the untrained model the given config describes.
std::unique_ptr<OpinionModel> make_model(const Graph& graph, const TrainConfig& cfg);
std::unique_ptr<OpinionModel> make_model(std::shared_ptr<const Laplacian> lap, const TrainConfig& cfg);

/// Alternating optimization: each iteration replays the whole sequence from a
/// zero state (forward), backpropagates the L1 objective over observed entries,
/// and takes a subgradient step. Stops when the relative loss change stays
/// below cfg.tol for kTolerancePatience iterations, or after cfg.max_iters.
/// Throws Error(divergence) when the loss turns non-finite or exceeds 10x its
/// initial value.
TrainResult train(const Graph& graph, const DynamicOpinionField& field, const TrainConfig& cfg);
TrainResult train(std::shared_ptr<const Laplacian> lap, const DynamicOpinionField& field, const TrainConfig& cfg);
/// True for a non-finite loss or one above 10x the first entry of `history`.
bool diverged(double loss, const std::vector<double>& history);

/// Continues training an existing model.
TrainReport fit(OpinionModel& model, const DynamicOpinionField& field, const TrainConfig& cfg);

/// Completion of `field`: observed entries pass through, every unobserved
/// entry is filled from the inference-mode forward pass. All entries of the
/// result are marked observed.
DynamicOpinionField predict(OpinionModel& model, const DynamicOpinionField& field);
DynamicOpinionField complete(const DynamicOpinionField& field, const Estimates& est);

using Entry = std::pair<std::size_t, std::size_t>;  // (t, node)

struct ConflictThresholds {
  double delta_b = 0.0;
  double delta_u = 0.0;
};

/// Nearest-rank quantile of the belief and uncertainty residuals over observed
/// entries.
ConflictThresholds residual_quantile_thresholds(const DynamicOpinionField& field, const Estimates& est,
                                                double quantile = 0.95);

/// Observed entries with |b - b_hat| > delta_b or |u - u_hat| > delta_u, in
/// (t, node) order.
std::vector<Entry> detect_conflicts(const DynamicOpinionField& field, const Estimates& est, double delta_b,
                                    double delta_u);

struct DetectionScore {
  std::size_t flagged = 0;
  std::size_t injected = 0;
  std::size_t hits = 0;
  double precision = 0.0;
  double recall = 0.0;
};

DetectionScore score_detection(const std::vector<Entry>& flagged, const std::vector<Entry>& injected);

/// JSON run log: config echo, per-iteration loss, timings, convergence reason.
nlohmann::json run_log(const TrainConfig& cfg, const TrainReport& report);
void write_run_log(const std::filesystem::path& path, const TrainConfig& cfg, const TrainReport& report);

}  // namespace opflow
