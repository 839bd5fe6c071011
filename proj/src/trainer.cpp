#include "opflow/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>

#include "opflow/errors.hpp"

namespace opflow {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double nearest_rank(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
  return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

}  // namespace

std::string to_string(Method m) { return m == Method::gcn_gru ? "gcn-gru" : "gru-only"; }

Method parse_method(const std::string& name) {
  if (name == "gcn-gru") return Method::gcn_gru;
  if (name == "gru-only") return Method::gru_only;
  throw Error(ErrorCode::invalid_argument, "unknown method '" + name + "'");
}

std::string to_string(ObjectiveScale s) {
  switch (s) {
    case ObjectiveScale::sum: return "sum";
    case ObjectiveScale::mean: return "mean";
    case ObjectiveScale::per_node: return "per-node";
  }
  return "per-node";
}

ObjectiveScale parse_objective(const std::string& name) {
  if (name == "sum") return ObjectiveScale::sum;
  if (name == "mean") return ObjectiveScale::mean;
  if (name == "per-node") return ObjectiveScale::per_node;
  throw Error(ErrorCode::invalid_argument, "unknown objective scale '" + name + "'");
}

void TrainConfig::validate() const {
  if (!(eta > 0.0)) throw Error(ErrorCode::invalid_argument, "eta must be positive");
  if (!(lambda > 0.0)) throw Error(ErrorCode::invalid_argument, "lambda must be positive");
  if (max_iters < 1) throw Error(ErrorCode::invalid_argument, "max_iters must be at least 1");
  if (!(tol >= 0.0)) throw Error(ErrorCode::invalid_argument, "tol must be non-negative");
  if (hidden < 1) throw Error(ErrorCode::invalid_argument, "hidden units must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorCode::invalid_argument, "dropout must be in [0, 1)");
}

ModelConfig TrainConfig::model_config() const {
  return {.propagation = method == Method::gcn_gru ? Propagation::graph : Propagation::node_wise,
          .hidden = hidden,
          .cheb_order = cheb_order,
          .bias = bias};
}

nlohmann::json to_json(const TrainConfig& cfg) {
  return {{"method", to_string(cfg.method)},
          {"eta", cfg.eta},
          {"lambda", cfg.lambda},
          {"hidden", cfg.hidden},
          {"max_iters", cfg.max_iters},
          {"tol", cfg.tol},
          {"seed", cfg.seed},
          {"dropout", cfg.dropout},
          {"cheb_order", cfg.cheb_order},
          {"bias", cfg.bias},
          {"laplacian", cfg.laplacian == LaplacianKind::normalized ? "normalized" : "unnormalized"},
          {"objective", to_string(cfg.objective)}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  cfg.method = parse_method(j.value("method", to_string(cfg.method)));
  cfg.eta = j.value("eta", cfg.eta);
  cfg.lambda = j.value("lambda", cfg.lambda);
  cfg.hidden = j.value("hidden", cfg.hidden);
  cfg.max_iters = j.value("max_iters", cfg.max_iters);
  cfg.tol = j.value("tol", cfg.tol);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.dropout = j.value("dropout", cfg.dropout);
  cfg.cheb_order = j.value("cheb_order", cfg.cheb_order);
  cfg.bias = j.value("bias", cfg.bias);
  cfg.laplacian =
      j.value("laplacian", std::string("normalized")) == "unnormalized" ? LaplacianKind::unnormalized
                                                                          : LaplacianKind::normalized;
  cfg.objective = parse_objective(j.value("objective", to_string(cfg.objective)));
  cfg.validate();
  return cfg;
}

std::unique_ptr<OpinionModel> make_model(std::shared_ptr<const Laplacian> lap, const TrainConfig& cfg) {
  cfg.validate();
  return std::make_unique<OpinionModel>(std::move(lap), cfg.model_config(), cfg.seed);
}

std::unique_ptr<OpinionModel> make_model(const Graph& graph, const TrainConfig& cfg) {
  if (cfg.method == Method::gru_only) return make_model(std::shared_ptr<const Laplacian>{}, cfg);
  return make_model(std::make_shared<const Laplacian>(Laplacian::build(graph, cfg.laplacian)), cfg);
}

bool diverged(double loss, const std::vector<double>& history) {
  return !std::isfinite(loss) || (!history.empty() && loss > 10.0 * history.front());
}

TrainReport fit(OpinionModel& model, const DynamicOpinionField& field, const TrainConfig& cfg) {
  cfg.validate();
  if (model.nodes() != 0 && model.nodes() != field.nodes()) {
    throw Error(ErrorCode::shape_mismatch, "graph and field disagree on node count");
  }
  const LossConfig loss_cfg{.lambda = cfg.lambda};
  const double observed = static_cast<double>(field.observed_count());
  double scale = 1.0;
  if (cfg.objective == ObjectiveScale::mean && observed > 0.0) scale = 1.0 / observed;
  if (cfg.objective == ObjectiveScale::per_node && field.nodes() > 0) scale = 1.0 / static_cast<double>(field.nodes());
  auto params = model.parameters();

  TrainReport report;
  report.convergence_reason = "max_iters";
  report.loss_history.reserve(cfg.max_iters);
  nn::Tape tape;
  std::size_t quiet = 0;
  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    tape.clear();
    const auto t0 = Clock::now();
    const DropoutPlan dropout{.rate = cfg.dropout, .seed = cfg.seed, .iteration = it};
    const History history = model.forward(tape, field, dropout);
    const nn::Var objective = loss(tape, field, history, loss_cfg, scale);
    const double value = tape.value(objective)(0, 0) / scale;
    report.forward_seconds += seconds_since(t0);

    if (diverged(value, report.loss_history)) {
      throw Error(ErrorCode::divergence, "loss " + std::to_string(value) + " at iteration " + std::to_string(it));
    }
    report.loss_history.push_back(value);

    const auto t1 = Clock::now();
    tape.backward(objective);
    nn::sgd_step(params, cfg.eta);
    report.backward_seconds += seconds_since(t1);
    report.iterations_run = it + 1;

    if (report.loss_history.size() >= 2) {
      const double prev = report.loss_history[report.loss_history.size() - 2];
      const double denom = std::max(std::fabs(prev), 1e-300);
      quiet = std::fabs(prev - value) / denom < cfg.tol ? quiet + 1 : 0;
      if (quiet >= kTolerancePatience) {
        report.convergence_reason = "tolerance";
        break;
      }
    }
  }
  return report;
}

TrainResult train(std::shared_ptr<const Laplacian> lap, const DynamicOpinionField& field, const TrainConfig& cfg) {
  TrainResult result;
  result.model = make_model(std::move(lap), cfg);
  result.report = fit(*result.model, field, cfg);
  return result;
}

TrainResult train(const Graph& graph, const DynamicOpinionField& field, const TrainConfig& cfg) {
  if (graph.num_nodes() != field.nodes()) {
    throw Error(ErrorCode::shape_mismatch, "graph and field disagree on node count");
  }
  TrainResult result;
  result.model = make_model(graph, cfg);
  result.report = fit(*result.model, field, cfg);
  return result;
}

DynamicOpinionField complete(const DynamicOpinionField& field, const Estimates& est) {
  DynamicOpinionField out = field;
  for (std::size_t t = 0; t < field.times(); ++t) {
    for (const auto& [i, w] : extract_opinions(est, field, t)) out.set(t, i, w);
  }
  return out;
}

DynamicOpinionField predict(OpinionModel& model, const DynamicOpinionField& field) {
  return complete(field, model.infer(field));
}

ConflictThresholds residual_quantile_thresholds(const DynamicOpinionField& field, const Estimates& est,
                                                double quantile) {
  std::vector<double> rb, ru;
  for (Eigen::Index t = 0; t < field.b.rows(); ++t) {
    for (Eigen::Index i = 0; i < field.b.cols(); ++i) {
      if (!field.observed(t, i)) continue;
      rb.push_back(std::fabs(field.b(t, i) - est.b_hat(t, i)));
      ru.push_back(std::fabs(field.u(t, i) - est.u_hat(t, i)));
    }
  }
  return {nearest_rank(std::move(rb), quantile), nearest_rank(std::move(ru), quantile)};
}

std::vector<Entry> detect_conflicts(const DynamicOpinionField& field, const Estimates& est, double delta_b,
                                    double delta_u) {
  if (est.b_hat.rows() != field.b.rows() || est.b_hat.cols() != field.b.cols()) {
    throw Error(ErrorCode::shape_mismatch, "estimates do not cover the field");
  }
  std::vector<Entry> out;
  for (Eigen::Index t = 0; t < field.b.rows(); ++t) {
    for (Eigen::Index i = 0; i < field.b.cols(); ++i) {
      if (!field.observed(t, i)) continue;
      if (std::fabs(field.b(t, i) - est.b_hat(t, i)) > delta_b || std::fabs(field.u(t, i) - est.u_hat(t, i)) > delta_u) {
        out.emplace_back(static_cast<std::size_t>(t), static_cast<std::size_t>(i));
      }
    }
  }
  return out;
}

DetectionScore score_detection(const std::vector<Entry>& flagged, const std::vector<Entry>& injected) {
  const std::set<Entry> truth(injected.begin(), injected.end());
  const std::set<Entry> found(flagged.begin(), flagged.end());
  DetectionScore s;
  s.flagged = found.size();
  s.injected = truth.size();
  for (const auto& e : found) s.hits += truth.count(e);
  s.precision = s.flagged ? static_cast<double>(s.hits) / static_cast<double>(s.flagged) : 0.0;
  s.recall = s.injected ? static_cast<double>(s.hits) / static_cast<double>(s.injected) : 0.0;
  return s;
}

nlohmann::json run_log(const TrainConfig& cfg, const TrainReport& report) {
  return {{"config", to_json(cfg)},
          {"loss", report.loss_history},
          {"iterations", report.iterations_run},
          {"forward_seconds", report.forward_seconds},
          {"backward_seconds", report.backward_seconds},
          {"convergence", report.convergence_reason}};
}

void write_run_log(const std::filesystem::path& path, const TrainConfig& cfg, const TrainReport& report) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  out << run_log(cfg, report).dump(2) << '\n';
}

}  // namespace opflow
