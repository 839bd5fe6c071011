#include "opflow/opinion_model.hpp"

#include <algorithm>
#include <cmath>

#include "opflow/errors.hpp"
#include "opflow/rng.hpp"

namespace opflow {

Eigen::VectorXd DropoutPlan::keep_mask(std::size_t t, std::size_t nodes) const {
  Eigen::VectorXd keep = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(nodes));
  if (rate <= 0.0) return keep;
  const std::uint64_t salt = unit == DropoutUnit::entry ? t : 0;
  Rng rng(mix64(substream_seed(seed, "dropout", iteration) + salt));
  for (Eigen::Index i = 0; i < keep.size(); ++i) {
    if (rng.bernoulli(rate)) keep[i] = 0.0;
  }
  return keep;
}

Matrix build_features(const DynamicOpinionField& field, std::size_t t) {
  if (t >= field.times()) {
    throw Error(ErrorCode::index_out_of_range,
                "time " + std::to_string(t) + " outside field of " + std::to_string(field.times()));
  }
  const auto r = static_cast<Eigen::Index>(t);
  Matrix x(static_cast<Eigen::Index>(field.nodes()), 2);
  const Eigen::VectorXd mask = field.mask_row(t);
  x.col(0) = field.b.row(r).transpose().cwiseProduct(mask);
  x.col(1) = field.u.row(r).transpose().cwiseProduct(mask);
  return x;
}

GateBank::GateBank(const std::string& name, const Laplacian* lap, const ModelConfig& cfg, std::uint64_t seed)
    : conv_(name + ".conv", lap, cfg.propagation == Propagation::graph ? cfg.cheb_order : 0, 3, cfg.hidden, cfg.bias,
            substream_seed(seed, name, 0)),
      readout_(nn::glorot_init(name + ".readout.weight", {cfg.hidden, 1}, substream_seed(seed, name, 1))) {
  if (cfg.bias) readout_bias_.emplace(name + ".readout.bias", std::vector<std::size_t>{1});
}

nn::Var GateBank::forward(nn::Tape& tape, nn::Var input) {
  nn::Var hidden = tape.tanh(conv_.forward(tape, input));
  nn::Var out = tape.matmul(hidden, tape.parameter(readout_));
  if (readout_bias_) out = tape.add_row_bias(out, tape.parameter(*readout_bias_));
  return out;
}

std::vector<nn::Parameter*> GateBank::parameters() {
  std::vector<nn::Parameter*> out{&conv_.weights()};
  if (conv_.bias()) out.push_back(&*conv_.bias());
  out.push_back(&readout_);
  if (readout_bias_) out.push_back(&*readout_bias_);
  return out;
}

namespace {

const Laplacian* checked(const std::shared_ptr<const Laplacian>& lap, const ModelConfig& cfg) {
  if (cfg.propagation == Propagation::graph && !lap) {
    throw Error(ErrorCode::invalid_argument, "graph propagation needs a Laplacian");
  }
  if (cfg.hidden == 0) throw Error(ErrorCode::invalid_argument, "hidden units must be positive");
  return cfg.propagation == Propagation::graph ? lap.get() : nullptr;
}

}  // namespace

OpinionModel::OpinionModel(std::shared_ptr<const Laplacian> lap, ModelConfig cfg, std::uint64_t seed)
    : lap_(std::move(lap)),
      cfg_(cfg),
      nodes_(lap_ ? lap_->size() : 0),
      update_("update_gate", checked(lap_, cfg_), cfg_, substream_seed(seed, "init")),
      reset_("reset_gate", checked(lap_, cfg_), cfg_, substream_seed(seed, "init")),
      cand_b_("candidate_belief", checked(lap_, cfg_), cfg_, substream_seed(seed, "init")),
      cand_u_("candidate_uncertainty", checked(lap_, cfg_), cfg_, substream_seed(seed, "init")) {}

std::vector<nn::Parameter*> OpinionModel::parameters() {
  std::vector<nn::Parameter*> out;
  for (GateBank* bank : {&update_, &reset_, &cand_b_, &cand_u_}) {
    auto p = bank->parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

StepTrace OpinionModel::step(nn::Tape& tape, nn::Var b_prev, nn::Var u_prev, nn::Var x) {
  const Matrix& xv = tape.value(x);
  const Matrix& bv = tape.value(b_prev);
  const Matrix& uv = tape.value(u_prev);
  if (xv.cols() != 2 || bv.cols() != 1 || uv.cols() != 1 || bv.rows() != xv.rows() || uv.rows() != xv.rows() ||
      (nodes_ != 0 && static_cast<std::size_t>(xv.rows()) != nodes_)) {
    throw Error(ErrorCode::shape_mismatch, "step inputs do not match the node count");
  }
  StepTrace s;
  const nn::Var in_b = tape.concat_cols(b_prev, x);
  const nn::Var in_u = tape.concat_cols(u_prev, x);
  s.z_b = tape.sigmoid(update_.forward(tape, in_b));
  s.z_u = tape.sigmoid(update_.forward(tape, in_u));
  s.s_b = tape.sigmoid(reset_.forward(tape, in_b));
  s.s_u = tape.sigmoid(reset_.forward(tape, in_u));
  s.b_cand = tape.tanh(cand_b_.forward(tape, tape.concat_cols(tape.mul(s.s_b, b_prev), x)));
  s.u_cand = tape.tanh(cand_u_.forward(tape, tape.concat_cols(tape.mul(s.s_u, u_prev), x)));
  s.b_hat = tape.add(tape.mul(s.z_b, b_prev), tape.mul(tape.one_minus(s.z_b), s.b_cand));
  s.u_hat = tape.add(tape.mul(s.z_u, u_prev), tape.mul(tape.one_minus(s.z_u), s.u_cand));
  return s;
}

History OpinionModel::forward(nn::Tape& tape, const DynamicOpinionField& field, const DropoutPlan& dropout) {
  const std::size_t n = field.nodes();
  if (nodes_ != 0 && n != nodes_) {
    throw Error(ErrorCode::shape_mismatch,
                "field has " + std::to_string(n) + " nodes, model has " + std::to_string(nodes_));
  }
  History h;
  h.steps.reserve(field.times());
  nn::Var b = tape.constant(Matrix::Zero(static_cast<Eigen::Index>(n), 1));
  nn::Var u = b;
  for (std::size_t t = 0; t < field.times(); ++t) {
    Matrix x = build_features(field, t);
    if (dropout.rate > 0.0) x = dropout.keep_mask(t, n).asDiagonal() * x;
    StepTrace s = step(tape, b, u, tape.constant(std::move(x)));
    b = s.b_hat;
    u = s.u_hat;
    h.steps.push_back(s);
  }
  return h;
}

Estimates OpinionModel::infer(const DynamicOpinionField& field) {
  nn::Tape tape(false);
  return collect(tape, forward(tape, field));
}

Estimates collect(const nn::Tape& tape, const History& history) {
  Estimates est;
  const auto times = static_cast<Eigen::Index>(history.steps.size());
  const Eigen::Index n = times == 0 ? 0 : tape.value(history.steps.front().b_hat).rows();
  est.b_hat.resize(times, n);
  est.u_hat.resize(times, n);
  for (Eigen::Index t = 0; t < times; ++t) {
    est.b_hat.row(t) = tape.value(history.steps[static_cast<std::size_t>(t)].b_hat).col(0).transpose();
    est.u_hat.row(t) = tape.value(history.steps[static_cast<std::size_t>(t)].u_hat).col(0).transpose();
  }
  return est;
}

nn::Var loss(nn::Tape& tape, const DynamicOpinionField& field, const History& history, const LossConfig& cfg,
             double scale) {
  if (history.steps.size() != field.times()) {
    throw Error(ErrorCode::shape_mismatch, "history length differs from the number of time stamps");
  }
  std::vector<nn::Var> terms;
  terms.reserve(2 * history.steps.size());
  for (std::size_t t = 0; t < field.times(); ++t) {
    const auto r = static_cast<Eigen::Index>(t);
    const Eigen::VectorXd mask = field.mask_row(t);
    terms.push_back(tape.masked_l1(history.steps[t].b_hat, field.b.row(r).transpose(), mask, scale));
    terms.push_back(tape.masked_l1(history.steps[t].u_hat, field.u.row(r).transpose(), mask, scale * cfg.lambda));
  }
  if (terms.empty()) return tape.constant(Matrix::Zero(1, 1));
  return tape.add_scalars(terms);
}

double loss_value(const DynamicOpinionField& field, const Estimates& est, const LossConfig& cfg) {
  double total = 0.0;
  for (Eigen::Index t = 0; t < field.b.rows(); ++t) {
    for (Eigen::Index i = 0; i < field.b.cols(); ++i) {
      if (!field.observed(t, i)) continue;
      total += std::fabs(field.b(t, i) - est.b_hat(t, i)) + cfg.lambda * std::fabs(field.u(t, i) - est.u_hat(t, i));
    }
  }
  return total;
}

Opinion opinion_from_estimate(double b_hat, double u_hat) {
  double b = std::clamp(b_hat, 0.0, 1.0);
  double u = std::clamp(u_hat, 0.0, 1.0);
  if (b + u > 1.0) {
    const double s = b + u;
    b /= s;
    u /= s;
  }
  const double d = std::max(0.0, 1.0 - b - u);
  return Opinion::make(b, d, u);
}

std::vector<std::pair<std::size_t, Opinion>> extract_opinions(const Estimates& est, const DynamicOpinionField& field,
                                                              std::size_t t) {
  if (t >= field.times() || static_cast<Eigen::Index>(t) >= est.b_hat.rows()) {
    throw Error(ErrorCode::index_out_of_range, "time " + std::to_string(t) + " outside history");
  }
  const auto r = static_cast<Eigen::Index>(t);
  std::vector<std::pair<std::size_t, Opinion>> out;
  for (std::size_t i = 0; i < field.nodes(); ++i) {
    if (field.observed(r, static_cast<Eigen::Index>(i))) continue;
    out.emplace_back(i, opinion_from_estimate(est.b_hat(r, static_cast<Eigen::Index>(i)),
                                              est.u_hat(r, static_cast<Eigen::Index>(i))));
  }
  return out;
}

}  // namespace opflow
