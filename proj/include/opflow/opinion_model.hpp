#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "opflow/laplacian.hpp"
#include "opflow/neural.hpp"
#include "opflow/opinion_field.hpp"

namespace opflow {

/// How each gate/candidate bank mixes information across nodes.
enum class Propagation {
  graph,      ///< Chebyshev graph convolution (GCN-GRU)
  node_wise,  ///< shared dense map per node, no neighbor mixing (GRU-only)
};

struct ModelConfig {
  Propagation propagation = Propagation::graph;
  std::size_t hidden = 16;
  std::size_t cheb_order = 1;
  bool bias = false;
};

struct LossConfig {
  double lambda = 1.0;
};

/// Which inputs a dropout draw hides.
enum class DropoutUnit {
  node,   ///< a node's features at every time of the sequence
  entry,  ///< each (time, node) row independently
};

/// Dropout on the feature matrix: a dropped node's (b, u) row is zeroed, as if
/// unobserved. The mask is a pure function of (seed, iteration, t).
struct DropoutPlan {
  double rate = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t iteration = 0;
  DropoutUnit unit = DropoutUnit::node;

  Eigen::VectorXd keep_mask(std::size_t t, std::size_t nodes) const;
};

/// X^(t): column 0 holds b, column 1 holds u for nodes observed at t, zeros
/// elsewhere. Throws Error(index_out_of_range) for t >= T.
Matrix build_features(const DynamicOpinionField& field, std::size_t t);

/// One bank: input -> graph conv (P channels) -> tanh -> 1-channel readout.
class GateBank {
 public:
  GateBank(const std::string& name, const Laplacian* lap, const ModelConfig& cfg, std::uint64_t seed);

  /// Pre-activation n x 1 output.
  nn::Var forward(nn::Tape& tape, nn::Var input);

  std::vector<nn::Parameter*> parameters();

 private:
  nn::GraphConvLayer conv_;
  nn::Parameter readout_;
  std::optional<nn::Parameter> readout_bias_;
};

/// Taped values of one recurrence step.
struct StepTrace {
  nn::Var b_hat, u_hat;
  nn::Var z_b, z_u;          // update gates
  nn::Var s_b, s_u;          // reset gates
  nn::Var b_cand, u_cand;    // candidates
};

struct History {
  std::vector<StepTrace> steps;
};

/// Latent beliefs and uncertainties for every (t, node), T x n each.
struct Estimates {
  Eigen::MatrixXd b_hat;
  Eigen::MatrixXd u_hat;
};

/// Graph-convolutional GRU over node-level beliefs and uncertainties.
///
/// Parameters: update-gate bank (shared by the belief and uncertainty
/// branches), reset-gate bank (shared likewise), and separate candidate banks
/// for beliefs and uncertainties. Each bank reads the 3-column input
/// [state, X^(t)].
class OpinionModel {
 public:
  /// `lap` may be null only for Propagation::node_wise.
  OpinionModel(std::shared_ptr<const Laplacian> lap, ModelConfig cfg, std::uint64_t seed);

  OpinionModel(const OpinionModel&) = delete;
  OpinionModel& operator=(const OpinionModel&) = delete;
  OpinionModel(OpinionModel&&) = delete;

  const ModelConfig& config() const noexcept { return cfg_; }
  const Laplacian* laplacian() const noexcept { return lap_.get(); }
  std::size_t nodes() const noexcept { return nodes_; }

  std::vector<nn::Parameter*> parameters();

  /// One step from (b_prev, u_prev) given features x (n x 2).
  StepTrace step(nn::Tape& tape, nn::Var b_prev, nn::Var u_prev, nn::Var x);

  /// Runs step for t = 0..T-1 from zero initial state.
  History forward(nn::Tape& tape, const DynamicOpinionField& field, const DropoutPlan& dropout = {});

  /// Inference-mode forward pass (no dropout, nothing recorded for backward).
  Estimates infer(const DynamicOpinionField& field);

 private:
  std::shared_ptr<const Laplacian> lap_;
  ModelConfig cfg_;
  std::size_t nodes_ = 0;
  GateBank update_, reset_, cand_b_, cand_u_;
};

/// Collects the taped history into plain matrices.
Estimates collect(const nn::Tape& tape, const History& history);

/// Sum over t and observed i of |b - b_hat| + lambda |u - u_hat|, recorded on
/// the tape. Every term is multiplied by `scale`.
nn::Var loss(nn::Tape& tape, const DynamicOpinionField& field, const History& history, const LossConfig& cfg,
             double scale = 1.0);

/// Same objective evaluated on plain estimates.
double loss_value(const DynamicOpinionField& field, const Estimates& est, const LossConfig& cfg);

/// Maps raw model outputs to a valid opinion: b_hat and u_hat are clamped to
/// [0, 1]; if their sum exceeds 1 both are divided by it (disbelief 0).
Opinion opinion_from_estimate(double b_hat, double u_hat);

/// Opinions for every node unobserved at time t.
std::vector<std::pair<std::size_t, Opinion>> extract_opinions(const Estimates& est, const DynamicOpinionField& field,
                                                              std::size_t t);

}  // namespace opflow
