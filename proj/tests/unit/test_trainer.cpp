#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "opflow/checkpoint.hpp"
#include "opflow/errors.hpp"
#include "opflow/experiment.hpp"
#include "opflow/metrics.hpp"
#include "opflow/trainer.hpp"

using namespace opflow;

namespace {

Graph ring(std::size_t n) {
  std::vector<Edge> rows;
  for (std::size_t i = 0; i < n; ++i) rows.emplace_back(i, (i + 1) % n);
  return Graph::from_edge_list(n, rows, false);
}

// Smooth toy field: opinions drift slowly around the ring.
DynamicOpinionField toy_field(std::size_t n, std::size_t times) {
  auto field = DynamicOpinionField::unobserved(times, n);
  for (std::size_t t = 0; t < times; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double phase = 0.4 * static_cast<double>(i) + 0.3 * static_cast<double>(t);
      const double u = 0.1 + 0.05 * std::cos(phase);
      const double b = (1.0 - u) * (0.5 + 0.3 * std::sin(phase));
      field.set(t, i, Opinion::make(b, 1.0 - u - b, u));
    }
  }
  return field;
}

}  // namespace

TEST_CASE("config validation and json") {
  TrainConfig cfg;
  cfg.eta = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.max_iters = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.method = Method::gru_only;
  cfg.seed = 77;
  cfg.objective = ObjectiveScale::mean;
  const auto back = train_config_from_json(to_json(cfg));
  CHECK(back.method == Method::gru_only);
  CHECK(back.seed == 77);
  CHECK(back.objective == ObjectiveScale::mean);
  CHECK(parse_method("gcn-gru") == Method::gcn_gru);
  CHECK_THROWS_AS(parse_method("gcn"), Error);
}

TEST_CASE("training loop") {
  const auto g = ring(6);
  const auto field = toy_field(6, 4);
  TrainConfig cfg;
  cfg.max_iters = 1;
  auto one = train(g, field, cfg);
  CHECK(one.report.loss_history.size() == 1);
  CHECK(one.report.iterations_run == 1);

  cfg.max_iters = 200;
  cfg.tol = 0.0;
  const auto a = train(g, field, cfg);
  const auto b = train(g, field, cfg);
  CHECK(a.report.loss_history == b.report.loss_history);
  CHECK(a.report.loss_history.size() == 200);
  CHECK(a.report.loss_history.back() <= 0.5 * a.report.loss_history.front());

  // Best-so-far loss never increases over a 50-iteration window.
  const auto& h = a.report.loss_history;
  for (std::size_t start = 0; start + 50 <= h.size(); start += 50) {
    CHECK(*std::min_element(h.begin() + static_cast<long>(start), h.begin() + static_cast<long>(start + 50)) <=
          h[start]);
  }

  cfg.tol = 0.5;
  const auto early = train(g, field, cfg);
  if (early.report.convergence_reason == "tolerance") {
    const auto& e = early.report.loss_history;
    const double prev = e[e.size() - 2], last = e.back();
    CHECK(std::fabs(prev - last) / prev < cfg.tol);
  }

  CHECK_FALSE(diverged(5.0, {}));
  CHECK(diverged(std::nan(""), {}));
  CHECK(diverged(INFINITY, {1.0}));
  CHECK_FALSE(diverged(10.0, {1.0, 0.5}));
  CHECK(diverged(10.5, {1.0, 0.5}));
}

TEST_CASE("prediction") {
  const auto g = ring(6);
  const auto full = toy_field(6, 4);
  TrainConfig cfg;
  cfg.max_iters = 200;
  auto trained = train(g, full, cfg);
  const auto same = predict(*trained.model, full);
  CHECK(same.b == full.b);
  CHECK(same.u == full.u);

  auto holey = full;
  for (std::size_t i = 0; i < 6; ++i) holey.hide(2, i);
  const auto filled = predict(*trained.model, holey);
  CHECK(filled.observed.all());
  for (std::size_t i = 0; i < 6; ++i) {
    const auto w = filled.at(2, i);
    CHECK(std::fabs(w.b() + w.d() + w.u() - 1.0) <= kMassTolerance);
  }

  // Against the vacuous prediction on hidden nodes.
  const SplitPlan plan = make_split(full, 0.34, 3);
  const auto view = training_view(full, plan);
  const auto model = train(g, view, cfg);
  const auto pred = predict(*model.model, view);
  const BoolArray mask = test_mask(full, plan);
  auto vacuous = full;
  vacuous.b.setZero();
  vacuous.d.setZero();
  vacuous.u.setOnes();
  CHECK(b_mae(pred, full, mask) < b_mae(vacuous, full, mask));
}

TEST_CASE("conflict detection") {
  auto field = toy_field(5, 3);
  const Estimates exact{field.b, field.u};
  CHECK(detect_conflicts(field, exact, 0.0, 0.0).empty());
  Estimates off = exact;
  off.b_hat(1, 2) += 0.5;
  const auto flagged = detect_conflicts(field, off, 0.1, 0.1);
  REQUIRE(flagged.size() == 1);
  CHECK(flagged[0] == Entry{1, 2});

  const auto th = residual_quantile_thresholds(field, off, 0.95);
  CHECK(th.delta_b >= 0.0);
  const auto score = score_detection(flagged, {{1, 2}, {0, 0}});
  CHECK(score.hits == 1);
  CHECK(score.precision == 1.0);
  CHECK(score.recall == 0.5);
}

TEST_CASE("checkpoints") {
  const auto g = ring(6);
  const auto field = toy_field(6, 4);
  TrainConfig cfg;
  cfg.max_iters = 20;
  auto trained = train(g, field, cfg);
  const auto dir = std::filesystem::temp_directory_path() / "opflow_ckpt_test";
  std::filesystem::create_directories(dir);
  save_checkpoint(dir / "m.ckpt", trained.model->parameters(), {{"note", "x"}});
  const auto ckpt = load_checkpoint(dir / "m.ckpt");
  CHECK(ckpt.meta.at("note") == "x");
  auto fresh = make_model(g, cfg);
  restore_parameters(ckpt, fresh->parameters());
  auto holey = field;
  holey.hide(1, 1);
  CHECK(predict(*fresh, holey).b == predict(*trained.model, holey).b);

  {
    std::ofstream bad(dir / "bad.ckpt");
    bad << "NOT-A-CHECKPOINT\n{}";
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.ckpt"), Error);
  cfg.hidden = 5;
  auto other = make_model(g, cfg);
  CHECK_THROWS_AS(restore_parameters(ckpt, other->parameters()), Error);
  std::filesystem::remove_all(dir);
}
