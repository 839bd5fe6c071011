#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <queue>
#include <set>

#include "opflow/datagen.hpp"
#include "opflow/errors.hpp"

using namespace opflow;

namespace {

bool connected(const Graph& g) {
  if (g.num_nodes() == 0) return true;
  std::vector<bool> seen(g.num_nodes(), false);
  std::queue<std::size_t> q;
  q.push(0);
  seen[0] = true;
  std::size_t count = 1;
  while (!q.empty()) {
    const auto v = q.front();
    q.pop();
    for (auto w : g.neighbors(v)) {
      if (!seen[w]) {
        seen[w] = true;
        ++count;
        q.push(w);
      }
    }
  }
  return count == g.num_nodes();
}

}  // namespace

TEST_CASE("simulation") {
  SimConfig cfg;
  cfg.realizations = 3;
  cfg.exploration_steps = 400;
  cfg.seed = 7;

  // No arcs into node 0: arc (0, 1) is trusted with probability one half.
  const auto lonely = Graph::from_edge_list(2, std::vector<Edge>{{0, 1}}, true);
  cfg.realizations = 1;
  std::size_t trusted = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    cfg.seed = s;
    const auto log = simulate_trust(lonely, cfg);
    trusted += log.at(0, 0).value() ? 1 : 0;
  }
  CHECK(trusted > 2);
  CHECK(trusted < 18);

  // All predecessors trusted (and kept trusted): the observed arc is trusted.
  // Arcs 1->2 and 0->1: arc 1->2 has the single instance 0->1.
  cfg.init_fraction = 0.99;
  cfg.exploration_steps = 1;
  cfg.realizations = 1;
  const auto chain = Graph::from_edge_list(3, std::vector<Edge>{{0, 1}, {1, 2}}, true);
  for (std::uint64_t s = 0; s < 30; ++s) {
    cfg.seed = s;
    const auto log = simulate_trust(chain, cfg);
    if (log.at(0, 1)) CHECK(*log.at(0, 1));
  }

  SimConfig swap_cfg;
  swap_cfg.realizations = 2;
  swap_cfg.seed = 3;
  std::vector<Edge> rows;
  for (std::size_t i = 0; i < 60; ++i) rows.emplace_back(i, (i + 1) % 60);
  for (std::size_t i = 0; i < 60; ++i) rows.emplace_back(i, (i + 7) % 60);
  const auto g = Graph::from_edge_list(60, rows, true);
  const auto log = simulate_trust(g, swap_cfg);
  CHECK(log.swapped[0].empty());
  CHECK(log.swapped[1].size() == static_cast<std::size_t>(std::llround(0.05 * 120)));
  CHECK(log.steps_per_realization == std::vector<std::size_t>{1000, 1000});

  const auto again = simulate_trust(g, swap_cfg);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t e = 0; e < 120; ++e) CHECK(log.at(r, e) == again.at(r, e));

  SimConfig bad;
  bad.swap_fraction = 1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("ground truth") {
  ObservationLog log(3, 40);
  for (std::size_t r = 0; r < 38; ++r) log.record(r, 1, true);
  for (std::size_t r = 0; r < 6; ++r) log.record(r, 2, true);
  log.record(6, 2, false);
  log.record(7, 2, false);
  const auto field = ground_truth_field(log, 38);
  CHECK(field.times() == 3);
  CHECK_FALSE(field.is_observed(0, 0));
  CHECK(field.at(0, 1).u() == doctest::Approx(0.05));
  const auto w = field.at(0, 2);
  CHECK(w.b() == doctest::Approx(0.6));
  CHECK(w.d() == doctest::Approx(0.2));
  CHECK(w.u() == doctest::Approx(0.2));

  ObservationLog small(1, 8);
  for (std::size_t r = 0; r < 6; ++r) small.record(r, 0, true);
  small.record(6, 0, false);
  small.record(7, 0, false);
  const auto eight = ground_truth_field(small, 8);
  CHECK(eight.at(0, 0).b() == doctest::Approx(0.6));
  CHECK_THROWS_AS(ground_truth_field(small, 9), Error);
  CHECK_THROWS_AS(ground_truth_field(small, 0), Error);
}

TEST_CASE("generated ground truth stays in range") {
  const auto trust = synthetic_trust_graph(200, 4.0, 0.5, 2);
  CHECK(trust.num_edges() == 200);
  SimConfig sim;
  sim.realizations = 50;
  sim.seed = 4;
  const auto data = generate_dataset(trust, sim, 38);
  CHECK(data.truth.times() == 13);
  CHECK(data.model_graph.num_nodes() == 200);
  data.truth.validate();
  for (Eigen::Index t = 0; t < data.truth.b.rows(); ++t)
    for (Eigen::Index i = 0; i < data.truth.b.cols(); ++i)
      if (data.truth.observed(t, i)) CHECK(data.truth.u(t, i) >= 2.0 / 40.0 - 1e-15);

  const auto dir = std::filesystem::temp_directory_path() / "opflow_dataset_test";
  save_dataset(dir, data);
  const auto back = load_dataset(dir);
  CHECK(back.window == 38);
  CHECK(back.model_graph.edges() == data.model_graph.edges());
  CHECK(back.trust_graph.edges() == data.trust_graph.edges());
  CHECK((back.truth.b - data.truth.b).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(back.truth.observed.cwiseEqual(data.truth.observed).all());
  std::filesystem::remove_all(dir);
}

TEST_CASE("conflict injection") {
  // Node 0 sits between two neighbors averaging (0.8, 0.1).
  const auto star = Graph::from_edge_list(3, std::vector<Edge>{{0, 1}, {0, 2}}, false);
  auto field = DynamicOpinionField::unobserved(1, 3);
  field.set(0, 0, Opinion::make(0.75, 0.15, 0.1));
  field.set(0, 1, Opinion::make(0.85, 0.05, 0.1));
  field.set(0, 2, Opinion::make(0.75, 0.15, 0.1));
  // 3 entries * 0.34 rounds to one injection; only node 0 is guaranteed a
  // consistent neighborhood, the leaves see only node 0.
  const auto res = inject_conflicts(field, star, 0.34, 1);
  REQUIRE(res.log.size() == 1);
  const auto& inj = res.log[0];
  const auto w = res.field.at(inj.t, inj.node);
  CHECK(res.field.u(0, static_cast<Eigen::Index>(inj.node)) == field.u(0, static_cast<Eigen::Index>(inj.node)));
  CHECK(std::fabs(w.b() + w.d() + w.u() - 1.0) <= kMassTolerance);
  if (inj.node == 0) {
    CHECK(inj.new_b == 0.1);
    CHECK(inj.new_d == 0.8);
  }

  CHECK(inject_conflicts(field, star, 0.0, 1).log.empty());

  std::vector<Edge> rows;
  for (std::size_t i = 0; i < 100; ++i) rows.emplace_back(i, (i + 1) % 100);
  const auto ring = Graph::from_edge_list(100, rows, false);
  auto smooth = DynamicOpinionField::unobserved(20, 100);
  for (std::size_t t = 0; t < 20; ++t)
    for (std::size_t i = 0; i < 100; ++i) smooth.set(t, i, Opinion::make(0.5, 0.3, 0.2));
  const auto many = inject_conflicts(smooth, ring, 0.05, 2);
  CHECK(many.log.size() == 100);
  std::set<std::pair<std::size_t, std::size_t>> unique;
  for (const auto& e : many.log) unique.emplace(e.t, e.node);
  CHECK(unique.size() == 100);

  // Alternating neighborhoods: nobody is consistent with their neighbors.
  auto rough = DynamicOpinionField::unobserved(20, 100);
  for (std::size_t t = 0; t < 20; ++t)
    for (std::size_t i = 0; i < 100; ++i)
      rough.set(t, i, i % 2 == 0 ? Opinion::make(0.8, 0.1, 0.1) : Opinion::make(0.1, 0.8, 0.1));
  CHECK_THROWS_AS(inject_conflicts(rough, ring, 0.05, 2), Error);
}

TEST_CASE("subnetworks") {
  std::vector<Edge> rows;
  for (std::size_t i = 0; i + 1 < 50; ++i) rows.emplace_back(i, i + 1);
  for (std::size_t i = 0; i + 5 < 50; i += 3) rows.emplace_back(i, i + 5);
  const auto g = Graph::from_edge_list(50, rows, false);
  CHECK(sample_subnetwork(g, 50, 1).graph.num_edges() == g.num_edges());
  const auto one = sample_subnetwork(g, 1, 1);
  CHECK(one.graph.num_nodes() == 1);
  CHECK(one.graph.num_edges() == 0);
  const auto part = sample_subnetwork(g, 20, 3);
  CHECK(part.graph.num_nodes() == 20);
  CHECK(connected(part.graph));
  CHECK_THROWS_AS(sample_subnetwork(g, 51, 1), Error);
}

TEST_CASE("splits") {
  const auto field = DynamicOpinionField::unobserved(2, 10);
  const auto plan = make_split(field, 0.5, 4);
  CHECK(plan.test_nodes.size() == 5);
  CHECK(make_split(field, 0.5, 4).test_nodes == plan.test_nodes);
  std::set<std::size_t> all(plan.test_nodes.begin(), plan.test_nodes.end());
  for (auto i : plan.train_nodes) CHECK(all.insert(i).second);
  CHECK(all.size() == 10);
  CHECK_THROWS_AS(make_split(field, 1.0, 1), Error);

  auto full = DynamicOpinionField::unobserved(2, 10);
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t i = 0; i < 10; ++i) full.set(t, i, Opinion::make(0.2, 0.3, 0.5));
  full.hide(1, plan.test_nodes[0]);
  const auto view = training_view(full, plan);
  for (auto i : plan.test_nodes) CHECK_FALSE(view.is_observed(0, i));
  const auto mask = test_mask(full, plan);
  CHECK(mask.count() == 9);

  auto round_trip = plan;
  round_trip.injections.push_back({1, 2, 0.1, 0.2, 0.3, 0.4});
  const auto back = split_plan_from_json(to_json(round_trip));
  CHECK(back.test_nodes == plan.test_nodes);
  CHECK(back.injections.size() == 1);
  CHECK(back.injections[0].new_d == 0.4);
}

TEST_CASE("synthetic graphs") {
  const auto g = synthetic_trust_graph(300, 3.0, 0.7, 5);
  CHECK(g.directed());
  CHECK(g.num_edges() == 300);
  CHECK(g.num_nodes() == 101);
  const auto r = random_graph(100, 6.0, 1);
  CHECK(r.num_edges() == 300);
  CHECK_FALSE(r.directed());
}
