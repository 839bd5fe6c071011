#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "opflow/graph.hpp"
#include "opflow/opinion_field.hpp"

namespace opflow {

/// Trust-propagation simulation constants.
struct SimConfig {
  double init_fraction = 0.10;
  std::size_t exploration_steps = 1000;
  double swap_fraction = 0.05;
  std::size_t realizations = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const SimConfig& cfg);
SimConfig sim_config_from_json(const nlohmann::json& j);

/// Per-realization, per-edge trust observations (1 trust, 0 distrust, missing).
/// A realization keeps the last observation made of each edge.
class ObservationLog {
 public:
  ObservationLog(std::size_t edges, std::size_t realizations);

  std::size_t edges() const noexcept { return edges_; }
  std::size_t realizations() const noexcept { return realizations_; }

  std::optional<bool> at(std::size_t realization, std::size_t edge) const;
  void record(std::size_t realization, std::size_t edge, bool trust);

  /// Exploration steps performed in each realization.
  std::vector<std::size_t> steps_per_realization;
  /// Edges whose most recent observation was flipped at the start of each
  /// realization (empty for the first).
  std::vector<std::vector<std::size_t>> swapped;

 private:
  std::size_t edges_, realizations_;
  std::vector<std::int8_t> values_;  // -1 missing
};

/// Simulates trust observations on the arcs of a directed graph.
///
/// init_fraction of the arcs start trusted. Each exploration step picks an arc
/// (b, c) uniformly; its rule instances are the arcs (a, b) with a != c, and
/// the step observes trust with probability equal to the fraction of instances
/// whose most recent state is trusted (0.5 when there are none). Before every
/// realization after the first, swap_fraction of the arcs have their most
/// recent state flipped, which counts as their observation in that realization.
ObservationLog simulate_trust(const Graph& graph, const SimConfig& cfg);

/// Windowed ground truth: entry (tau, e) of the result is estimated from the
/// observations of edge e in realizations tau .. tau + K - 1, so the field has
/// T - K + 1 time stamps. Entries whose window holds no observation stay
/// unobserved. Throws Error(window_too_large) when K > T or K == 0.
DynamicOpinionField ground_truth_field(const ObservationLog& log, std::size_t window, double prior_weight = 2.0,
                                       double base_rate = 0.5);

struct Injection {
  std::size_t t = 0;
  std::size_t node = 0;
  double original_b = 0.0;
  double original_d = 0.0;
  double new_b = 0.0;
  double new_d = 0.0;
};

struct InjectionResult {
  DynamicOpinionField field;
  std::vector<Injection> log;
};

/// Tolerance for "consistent with its neighbors": |b - mean_b| and |d - mean_d|
/// both at most this.
inline constexpr double kConsistencyTolerance = 0.2;

/// Replaces round(N * T * ratio) observed entries by opinions conflicting with
/// their neighborhood: (b, d) becomes the swapped neighbor means (mean_d,
/// mean_b) rescaled to 1 - u, with u unchanged. Only entries consistent with
/// their observed neighbors at the same time are eligible, each at most once.
/// Throws Error(insufficient_candidates) if the eligible set runs out.
InjectionResult inject_conflicts(const DynamicOpinionField& field, const Graph& graph, double ratio,
                                 std::uint64_t seed);

/// Re-applies a recorded injection log to `field`.
void apply_injections(DynamicOpinionField& field, const std::vector<Injection>& log);

/// Breadth-first expansion from a random node (restarting from another random
/// unvisited node if a component is exhausted) until n_target nodes are
/// collected; returns the induced subgraph and the chosen original ids.
struct Subnetwork {
  Graph graph;
  std::vector<std::size_t> nodes;
};
Subnetwork sample_subnetwork(const Graph& graph, std::size_t n_target, std::uint64_t seed);

struct SplitPlan {
  double test_ratio = 0.3;
  double conflict_ratio = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> train_nodes;
  std::vector<std::size_t> test_nodes;
  std::vector<Injection> injections;
};

nlohmann::json to_json(const SplitPlan& plan);
SplitPlan split_plan_from_json(const nlohmann::json& j);

/// Samples round(test_ratio * N) test nodes uniformly.
SplitPlan make_split(const DynamicOpinionField& field, double test_ratio, std::uint64_t seed);

/// Copy of `field` with every test node hidden at every time.
DynamicOpinionField training_view(const DynamicOpinionField& field, const SplitPlan& plan);

/// Test entries that have a ground-truth opinion.
BoolArray test_mask(const DynamicOpinionField& truth, const SplitPlan& plan);

/// Directed random "who-trusts-whom" graph with exactly `arcs` arcs over
/// ceil(arcs / avg_out_degree) + 1 nodes. With probability `preferential` the head
/// of an arc is drawn proportionally to current in-degree + 1, otherwise
/// uniformly.
Graph synthetic_trust_graph(std::size_t arcs, double avg_out_degree, double preferential, std::uint64_t seed);

/// Undirected random graph with n nodes and round(n * avg_degree / 2) edges.
Graph random_graph(std::size_t n, double avg_degree, std::uint64_t seed);

/// A generated benchmark: a directed trust graph, its line graph (the model
/// graph; node e is arc e of the trust graph), and the windowed ground truth.
struct Dataset {
  Graph trust_graph;
  Graph model_graph;
  SimConfig sim;
  std::size_t window = 38;
  double prior_weight = 2.0;
  double base_rate = 0.5;
  DynamicOpinionField truth;
};

Dataset generate_dataset(const Graph& trust_graph, const SimConfig& sim, std::size_t window,
                         double prior_weight = 2.0, double base_rate = 0.5);

/// DIR/edges.tsv, DIR/graph.tsv, DIR/opinions.csv, DIR/manifest.json.
void save_dataset(const std::filesystem::path& dir, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace opflow
