#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "opflow/graph.hpp"
#include "opflow/opinion.hpp"
#include "opflow/opinion_field.hpp"
#include "opflow/trainer.hpp"

namespace opflow {

/// Path-based subjective-logic inference.
struct SlBaselineConfig {
  std::size_t max_path_length = 18;
  std::size_t max_paths_per_target = 64;
  /// Opinion applied at every hop of a path.
  Opinion referral = Opinion::make(0.9, 0.0, 0.1);

  void validate() const;
};

nlohmann::json to_json(const SlBaselineConfig& cfg);
SlBaselineConfig sl_config_from_json(const nlohmann::json& j);

/// One path from an observed source to the target; nodes[0] is the source and
/// nodes.back() the target.
struct SlPath {
  std::vector<std::size_t> nodes;
  std::size_t hops() const noexcept { return nodes.empty() ? 0 : nodes.size() - 1; }
};

/// Edge-disjoint paths from observed nodes to `target` in snapshot t, found by
/// repeated breadth-first search over the unused edges. Each round takes the
/// nearest unused source. Observed nodes end a path; they are never passed
/// through.
std::vector<SlPath> sl_paths(const Graph& graph, const DynamicOpinionField& field, std::size_t t, std::size_t target,
                             const SlBaselineConfig& cfg);

/// Source opinion discounted hop by hop along each path, fused by consensus.
/// Vacuous when no path exists.
Opinion sl_infer(const Graph& graph, const DynamicOpinionField& field, std::size_t t, std::size_t target,
                 const SlBaselineConfig& cfg);

/// Completion of `field`: observed entries pass through, every unobserved
/// entry comes from sl_infer.
DynamicOpinionField sl_predict(const Graph& graph, const DynamicOpinionField& field, const SlBaselineConfig& cfg);

/// The recurrent model with every graph convolution replaced by a node-wise
/// linear map. cfg.method is ignored.
TrainResult gru_only_train(const DynamicOpinionField& field, TrainConfig cfg);
DynamicOpinionField gru_only_predict(OpinionModel& model, const DynamicOpinionField& field);

}  // namespace opflow
