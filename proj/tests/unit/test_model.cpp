#include <doctest.h>

#include <cmath>
#include <functional>

#include "opflow/errors.hpp"
#include "opflow/experiment.hpp"
#include "opflow/opinion_model.hpp"
#include "opflow/rng.hpp"

using namespace opflow;

namespace {

std::shared_ptr<const Laplacian> ring_laplacian(std::size_t n) {
  std::vector<Edge> rows;
  for (std::size_t i = 0; i < n; ++i) rows.emplace_back(i, (i + 1) % n);
  return std::make_shared<const Laplacian>(Laplacian::build(Graph::from_edge_list(n, rows, false)));
}

void zero_parameters(OpinionModel& model) {
  for (auto* p : model.parameters()) p->value().setZero();
}

double run_loss(OpinionModel& model, const DynamicOpinionField& field, bool grad) {
  nn::Tape tape(grad);
  const History h = model.forward(tape, field);
  const nn::Var l = loss(tape, field, h, {.lambda = 1.3});
  if (grad) tape.backward(l);
  return tape.value(l)(0, 0);
}

}  // namespace

TEST_CASE("features") {
  auto field = DynamicOpinionField::unobserved(2, 5);
  CHECK(build_features(field, 0).isZero());
  field.set(1, 3, Opinion::make(0.7, 0.2, 0.1));
  const Matrix x = build_features(field, 1);
  CHECK(x(3, 0) == doctest::Approx(0.7));
  CHECK(x(3, 1) == doctest::Approx(0.1));
  CHECK_THROWS_AS(build_features(field, 2), Error);

  const auto dense = random_field(4, 50, 0.4, 3);
  for (std::size_t t = 0; t < 4; ++t) {
    const Matrix xt = build_features(dense, t);
    std::size_t nonzero = 0;
    for (Eigen::Index i = 0; i < xt.rows(); ++i) nonzero += xt.row(i).isZero() ? 0 : 1;
    CHECK(nonzero == static_cast<std::size_t>(dense.observed.row(static_cast<Eigen::Index>(t)).count()));
  }
}

TEST_CASE("zero parameters halve the state") {
  auto lap = ring_laplacian(5);
  OpinionModel model(lap, {}, 1);
  zero_parameters(model);
  nn::Tape tape;
  Rng rng(2);
  Matrix prev(5, 1);
  for (int i = 0; i < 5; ++i) prev(i, 0) = rng.uniform();
  const auto s = model.step(tape, tape.constant(prev), tape.constant(prev), tape.constant(Matrix::Ones(5, 2)));
  CHECK(tape.value(s.z_b).isApproxToConstant(0.5));
  CHECK(tape.value(s.s_u).isApproxToConstant(0.5));
  CHECK(tape.value(s.b_cand).isZero());
  CHECK((tape.value(s.b_hat) - 0.5 * prev).norm() < 1e-15);

  const auto field = random_field(1, 5, 1.0, 4);
  nn::Tape t2;
  const History h = model.forward(t2, field);
  CHECK(t2.value(h.steps[0].b_hat).isZero());
  nn::Tape t3;
  CHECK(model.forward(t3, DynamicOpinionField::unobserved(0, 5)).steps.empty());
  CHECK_THROWS_AS(model.forward(t3, random_field(2, 4, 1.0, 1)), Error);
}

TEST_CASE("saturated update gate keeps the state") {
  auto lap = ring_laplacian(4);
  OpinionModel model(lap, {.bias = true}, 1);
  for (auto* p : model.parameters()) {
    if (p->name() == "update_gate.readout.bias") p->value().setConstant(60.0);
    if (p->name() == "update_gate.readout.bias" || p->name().rfind("update_gate", 0) != 0) continue;
    p->value().setZero();
  }
  nn::Tape tape;
  const Matrix prev = Matrix::Constant(4, 1, 0.3);
  const auto s = model.step(tape, tape.constant(prev), tape.constant(prev), tape.constant(Matrix::Ones(4, 2)));
  CHECK((tape.value(s.b_hat) - prev).cwiseAbs().maxCoeff() < 1e-20);

  // Gate closed the other way: the candidate passes through.
  for (auto* p : model.parameters()) {
    if (p->name() == "update_gate.readout.bias") p->value().setConstant(-60.0);
  }
  nn::Tape t2;
  const auto s2 = model.step(t2, t2.constant(prev), t2.constant(prev), t2.constant(Matrix::Ones(4, 2)));
  CHECK((t2.value(s2.b_hat) - t2.value(s2.b_cand)).cwiseAbs().maxCoeff() < 1e-20);
}

TEST_CASE("gate ranges and interpolation envelope") {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    auto lap = ring_laplacian(8);
    OpinionModel model(lap, {.hidden = 4, .cheb_order = 2}, rng.next_u64());
    for (auto* p : model.parameters()) p->value() *= 3.0;
    const auto field = random_field(6, 8, 0.6, rng.next_u64());
    nn::Tape tape(false);
    const History h = model.forward(tape, field);
    Matrix prev = Matrix::Zero(8, 1);
    for (const auto& s : h.steps) {
      for (auto gate : {s.z_b, s.z_u, s.s_b, s.s_u}) {
        CHECK(tape.value(gate).minCoeff() > 0.0);
        CHECK(tape.value(gate).maxCoeff() < 1.0);
      }
      CHECK(tape.value(s.b_cand).cwiseAbs().maxCoeff() < 1.0);
      const Matrix& bh = tape.value(s.b_hat);
      const Matrix& bc = tape.value(s.b_cand);
      for (Eigen::Index i = 0; i < 8; ++i) {
        CHECK(bh(i, 0) >= std::min(prev(i, 0), bc(i, 0)) - 1e-15);
        CHECK(bh(i, 0) <= std::max(prev(i, 0), bc(i, 0)) + 1e-15);
      }
      prev = bh;
    }
  }
}

TEST_CASE("loss") {
  auto field = DynamicOpinionField::unobserved(1, 3);
  field.set(0, 1, Opinion::make(0.5, 0.3, 0.2));
  Estimates est{Matrix::Zero(1, 3), Matrix::Zero(1, 3)};
  est.b_hat(0, 1) = 0.8;
  est.u_hat(0, 1) = 0.1;
  est.b_hat(0, 0) = 9.0;  // unobserved: ignored
  CHECK(loss_value(field, est, {.lambda = 1.0}) == doctest::Approx(0.4));
  CHECK(loss_value(field, est, {.lambda = 2.0}) == doctest::Approx(0.5));
  est.b_hat(0, 1) = 0.5;
  est.u_hat(0, 1) = 0.2;
  CHECK(loss_value(field, est, {}) == 0.0);
}

TEST_CASE("opinion extraction") {
  auto w = opinion_from_estimate(0.7, 0.1);
  CHECK(w.b() == doctest::Approx(0.7));
  CHECK(w.d() == doctest::Approx(0.2));
  CHECK(w.u() == doctest::Approx(0.1));
  CHECK(opinion_from_estimate(0.0, 1.0) == Opinion::vacuous());
  w = opinion_from_estimate(0.9, 0.3);
  CHECK(w.b() == doctest::Approx(0.75));
  CHECK(w.u() == doctest::Approx(0.25));
  CHECK(w.d() == 0.0);
  Rng rng(1);
  for (int k = 0; k < 1000; ++k) {
    const auto x = opinion_from_estimate(rng.uniform(-2, 2), rng.uniform(-2, 2));
    CHECK(std::fabs(x.b() + x.d() + x.u() - 1.0) <= kMassTolerance);
  }

  auto field = random_field(2, 6, 0.5, 7);
  const Estimates est{Matrix::Constant(2, 6, 0.4), Matrix::Constant(2, 6, 0.3)};
  const auto out = extract_opinions(est, field, 1);
  CHECK(out.size() == 6 - static_cast<std::size_t>(field.observed.row(1).count()));
  for (const auto& [i, op] : out) CHECK_FALSE(field.is_observed(1, i));
}

TEST_CASE("full model gradients match finite differences") {
  auto lap = ring_laplacian(6);
  OpinionModel model(lap, {.hidden = 4, .cheb_order = 2}, 21);
  const auto field = random_field(3, 6, 0.7, 22);
  run_loss(model, field, true);
  const double h = 1e-5;
  std::size_t checked = 0;
  for (auto* p : model.parameters()) {
    const Matrix analytic = p->grad();
    for (Eigen::Index k = 0; k < p->value().size(); ++k) {
      double& v = p->value().data()[k];
      const double saved = v;
      v = saved + h;
      const double up = run_loss(model, field, false);
      v = saved - h;
      const double down = run_loss(model, field, false);
      v = saved;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic.data()[k];
      if (std::max(std::fabs(a), std::fabs(numeric)) < 1e-3) continue;
      ++checked;
      CHECK(std::fabs(a - numeric) / std::max(std::fabs(a), std::fabs(numeric)) <= 1e-4);
    }
  }
  CHECK(checked > 50);
}

TEST_CASE("unobserved entries do not matter") {
  auto lap = ring_laplacian(6);
  OpinionModel model(lap, {.hidden = 3}, 5);
  auto field = random_field(3, 6, 0.5, 6);
  const double base = run_loss(model, field, true);
  std::vector<Matrix> grads;
  for (auto* p : model.parameters()) grads.push_back(p->grad());
  for (Eigen::Index t = 0; t < 3; ++t)
    for (Eigen::Index i = 0; i < 6; ++i)
      if (!field.observed(t, i)) field.b(t, i) = 0.9;
  CHECK(run_loss(model, field, true) == base);
  std::size_t k = 0;
  for (auto* p : model.parameters()) CHECK(p->grad() == grads[k++]);
}

TEST_CASE("every parameter reaches the loss") {
  auto lap = ring_laplacian(6);
  OpinionModel model(lap, {.hidden = 3, .bias = true}, 5);
  const auto field = random_field(3, 6, 0.8, 8);
  run_loss(model, field, true);
  for (auto* p : model.parameters()) CHECK_MESSAGE(p->grad().norm() > 0.0, p->name());
}

TEST_CASE("dropout masks") {
  const DropoutPlan entry{.rate = 0.5, .seed = 3, .iteration = 2, .unit = DropoutUnit::entry};
  CHECK(entry.keep_mask(0, 200) == entry.keep_mask(0, 200));
  CHECK(entry.keep_mask(0, 200) != entry.keep_mask(1, 200));
  const DropoutPlan node{.rate = 0.5, .seed = 3, .iteration = 2};
  CHECK(node.keep_mask(0, 200) == node.keep_mask(5, 200));
  const DropoutPlan next{.rate = 0.5, .seed = 3, .iteration = 3};
  CHECK(node.keep_mask(0, 200) != next.keep_mask(0, 200));
  CHECK(DropoutPlan{}.keep_mask(0, 10).isOnes());
}
