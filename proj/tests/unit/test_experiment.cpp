#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "opflow/experiment.hpp"

using namespace opflow;

namespace {

ExperimentConfig small_config(const std::filesystem::path& out) {
  ExperimentConfig cfg;
  cfg.dataset.nodes = 60;
  cfg.dataset.avg_out_degree = 3.0;
  cfg.dataset.sim.realizations = 20;
  cfg.dataset.sim.exploration_steps = 200;
  cfg.dataset.window = 8;
  cfg.methods = {"sl"};
  cfg.test_ratios = {0.3};
  cfg.seeds = {1};
  cfg.train.max_iters = 3;
  cfg.train.hidden = 4;
  cfg.out_dir = out;
  return cfg;
}

std::size_t line_count(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

}  // namespace

TEST_CASE("one cell, one result") {
  const auto out = std::filesystem::temp_directory_path() / "opflow_exp_one";
  std::filesystem::remove_all(out);
  const auto cfg = small_config(out);
  const auto results = run_matrix(cfg);
  REQUIRE(results.size() == 1);
  CHECK(results[0].ok);
  CHECK(std::filesystem::exists(out / "cells" / results[0].cell.name() / "result.json"));
  CHECK(line_count(out / "results.csv") == 2);

  const auto again = run_matrix(cfg);
  CHECK(again[0].b_mae == results[0].b_mae);
  CHECK(again[0].u_mae == results[0].u_mae);
  std::filesystem::remove_all(out);
}

TEST_CASE("matrix") {
  const auto out = std::filesystem::temp_directory_path() / "opflow_exp_matrix";
  std::filesystem::remove_all(out);
  auto cfg = small_config(out);
  cfg.methods = {"sl", "gcn-gru", "gru-only"};
  cfg.test_ratios = {0.2, 0.4};
  cfg.workers = 3;
  cfg.save_predictions = false;
  const auto results = run_matrix(cfg);
  CHECK(results.size() == 6);
  std::size_t ok = 0;
  for (const auto& r : results) ok += r.ok ? 1 : 0;
  CHECK(ok == 6);
  CHECK(line_count(out / "results.csv") == 7);

  const auto back = experiment_config_from_json(to_json(cfg));
  CHECK(back.methods == cfg.methods);
  CHECK(back.test_ratios == cfg.test_ratios);
  CHECK(back.dataset.window == 8);

  auto bad = cfg;
  bad.methods = {"nope"};
  CHECK_THROWS(bad.validate());
  std::filesystem::remove_all(out);
}

TEST_CASE("failing cell is recorded") {
  const auto out = std::filesystem::temp_directory_path() / "opflow_exp_fail";
  std::filesystem::remove_all(out);
  auto cfg = small_config(out);
  cfg.conflict_ratios = {0.99};
  const auto results = run_matrix(cfg);
  REQUIRE(results.size() == 1);
  CHECK_FALSE(results[0].ok);
  CHECK_FALSE(results[0].error.empty());
  CHECK(line_count(out / "results.csv") == 1);
  std::filesystem::remove_all(out);
}
