#include "opflow/baselines.hpp"

#include <limits>

#include "opflow/errors.hpp"

namespace opflow {

void SlBaselineConfig::validate() const {
  if (max_path_length < 1) throw Error(ErrorCode::invalid_argument, "max_path_length must be >= 1");
  if (max_paths_per_target < 1) throw Error(ErrorCode::invalid_argument, "max_paths_per_target must be >= 1");
}

nlohmann::json to_json(const SlBaselineConfig& cfg) {
  return {{"max_path_length", cfg.max_path_length},
          {"max_paths_per_target", cfg.max_paths_per_target},
          {"referral", {cfg.referral.b(), cfg.referral.d(), cfg.referral.u()}}};
}

SlBaselineConfig sl_config_from_json(const nlohmann::json& j) {
  SlBaselineConfig cfg;
  cfg.max_path_length = j.value("max_path_length", cfg.max_path_length);
  cfg.max_paths_per_target = j.value("max_paths_per_target", cfg.max_paths_per_target);
  if (j.contains("referral")) {
    const auto r = j.at("referral").get<std::vector<double>>();
    if (r.size() != 3) throw Error(ErrorCode::format_error, "referral must be [b, d, u]");
    cfg.referral = Opinion::make(r[0], r[1], r[2]);
  }
  cfg.validate();
  return cfg;
}

namespace {

constexpr std::size_t kUnreached = std::numeric_limits<std::size_t>::max();

// Index of the undirected edge (v, w) in the symmetrized CSR of `graph`: the
// position of w within neighbors(v), offset by v's row start.
struct EdgeIndex {
  explicit EdgeIndex(const Graph& g) : offsets(g.num_nodes() + 1, 0) {
    for (std::size_t v = 0; v < g.num_nodes(); ++v) offsets[v + 1] = offsets[v] + g.degree(v);
  }
  std::vector<std::size_t> offsets;
};

}  // namespace

std::vector<SlPath> sl_paths(const Graph& graph, const DynamicOpinionField& field, std::size_t t, std::size_t target,
                             const SlBaselineConfig& cfg) {
  cfg.validate();
  const std::size_t n = graph.num_nodes();
  if (n != field.nodes()) throw Error(ErrorCode::shape_mismatch, "graph and field disagree");
  if (t >= field.times() || target >= n) throw Error(ErrorCode::index_out_of_range, "snapshot or target out of range");

  const EdgeIndex index(graph);
  // Used-flag per directed CSR slot; an edge is marked in both directions.
  std::vector<bool> used(index.offsets.back(), false);
  std::vector<bool> source_used(n, false);
  std::vector<std::size_t> depth(n), parent(n), parent_slot(n);
  std::vector<std::size_t> frontier, next;
  std::vector<SlPath> paths;

  auto mark_used = [&](std::size_t v, std::size_t w) {
    const auto nb = graph.neighbors(v);
    for (std::size_t k = 0; k < nb.size(); ++k) {
      if (nb[k] == w) used[index.offsets[v] + k] = true;
    }
  };

  while (paths.size() < cfg.max_paths_per_target) {
    std::fill(depth.begin(), depth.end(), kUnreached);
    depth[target] = 0;
    frontier.assign(1, target);
    std::size_t best = kUnreached;
    // Depth-bounded search over the whole reachable region.
    for (std::size_t level = 1; level <= cfg.max_path_length && !frontier.empty(); ++level) {
      next.clear();
      for (std::size_t v : frontier) {
        const auto nb = graph.neighbors(v);
        for (std::size_t k = 0; k < nb.size(); ++k) {
          const std::size_t w = nb[k];
          if (used[index.offsets[v] + k] || depth[w] != kUnreached) continue;
          depth[w] = level;
          parent[w] = v;
          parent_slot[w] = k;
          if (field.is_observed(t, w)) {
            if (!source_used[w] && best == kUnreached) best = w;
          } else {
            next.push_back(w);
          }
        }
      }
      frontier.swap(next);
    }
    if (best == kUnreached) break;

    SlPath path;
    for (std::size_t v = best; v != target; v = parent[v]) {
      path.nodes.push_back(v);
      mark_used(v, parent[v]);
      mark_used(parent[v], v);
    }
    path.nodes.push_back(target);
    source_used[best] = true;
    paths.push_back(std::move(path));
  }
  return paths;
}

Opinion sl_infer(const Graph& graph, const DynamicOpinionField& field, std::size_t t, std::size_t target,
                 const SlBaselineConfig& cfg) {
  const auto paths = sl_paths(graph, field, t, target, cfg);
  if (paths.empty()) return Opinion::vacuous();
  std::optional<Opinion> fused;
  for (const auto& path : paths) {
    Opinion w = field.at(t, path.nodes.front());
    for (std::size_t h = 0; h < path.hops(); ++h) w = discount(cfg.referral, w);
    fused = fused ? consensus(*fused, w) : w;
  }
  return *fused;
}

DynamicOpinionField sl_predict(const Graph& graph, const DynamicOpinionField& field, const SlBaselineConfig& cfg) {
  DynamicOpinionField out = field;
  for (std::size_t t = 0; t < field.times(); ++t) {
    for (std::size_t i = 0; i < field.nodes(); ++i) {
      if (!field.is_observed(t, i)) out.set(t, i, sl_infer(graph, field, t, i, cfg));
    }
  }
  out.observed.setConstant(true);
  return out;
}

TrainResult gru_only_train(const DynamicOpinionField& field, TrainConfig cfg) {
  cfg.method = Method::gru_only;
  return train(std::shared_ptr<const Laplacian>{}, field, cfg);
}

DynamicOpinionField gru_only_predict(OpinionModel& model, const DynamicOpinionField& field) {
  return predict(model, field);
}

}  // namespace opflow
