#include "opflow/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <numeric>
#include <set>

#include "opflow/errors.hpp"
#include "opflow/opinion.hpp"
#include "opflow/rng.hpp"

namespace opflow {
namespace {

std::size_t round_count(double x) { return static_cast<std::size_t>(std::llround(x)); }

void require_fraction(double x, const char* name) {
  if (!(x > 0.0 && x < 1.0)) throw Error(ErrorCode::invalid_argument, std::string(name) + " must be in (0, 1)");
}

}  // namespace

void SimConfig::validate() const {
  require_fraction(init_fraction, "init_fraction");
  require_fraction(swap_fraction, "swap_fraction");
  if (realizations < 1) throw Error(ErrorCode::invalid_argument, "at least one realization required");
}

nlohmann::json to_json(const SimConfig& cfg) {
  return {{"init_fraction", cfg.init_fraction},
          {"exploration_steps", cfg.exploration_steps},
          {"swap_fraction", cfg.swap_fraction},
          {"realizations", cfg.realizations},
          {"seed", cfg.seed}};
}

SimConfig sim_config_from_json(const nlohmann::json& j) {
  SimConfig cfg;
  cfg.init_fraction = j.value("init_fraction", cfg.init_fraction);
  cfg.exploration_steps = j.value("exploration_steps", cfg.exploration_steps);
  cfg.swap_fraction = j.value("swap_fraction", cfg.swap_fraction);
  cfg.realizations = j.value("realizations", cfg.realizations);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.validate();
  return cfg;
}

ObservationLog::ObservationLog(std::size_t edges, std::size_t realizations)
    : steps_per_realization(realizations, 0),
      swapped(realizations),
      edges_(edges),
      realizations_(realizations),
      values_(edges * realizations, -1) {}

std::optional<bool> ObservationLog::at(std::size_t realization, std::size_t edge) const {
  if (realization >= realizations_ || edge >= edges_) {
    throw Error(ErrorCode::index_out_of_range, "observation index out of range");
  }
  const auto v = values_[realization * edges_ + edge];
  if (v < 0) return std::nullopt;
  return v == 1;
}

void ObservationLog::record(std::size_t realization, std::size_t edge, bool trust) {
  if (realization >= realizations_ || edge >= edges_) {
    throw Error(ErrorCode::index_out_of_range, "observation index out of range");
  }
  values_[realization * edges_ + edge] = trust ? 1 : 0;
}

ObservationLog simulate_trust(const Graph& graph, const SimConfig& cfg) {
  cfg.validate();
  const auto& arcs = graph.edges();
  const std::size_t m = arcs.size();
  ObservationLog log(m, cfg.realizations);
  if (m == 0) return log;

  // Arcs entering each node, by arc id.
  std::vector<std::vector<std::size_t>> entering(graph.num_nodes());
  for (std::size_t e = 0; e < m; ++e) {
    entering[arcs[e].second].push_back(e);
    if (!graph.directed()) entering[arcs[e].first].push_back(e);
  }

  std::vector<std::uint8_t> state(m, 0);
  Rng init_rng(cfg.seed, "datagen.init");
  for (std::size_t e : init_rng.sample_without_replacement(m, round_count(cfg.init_fraction * static_cast<double>(m)))) {
    state[e] = 1;
  }

  Rng swap_rng(cfg.seed, "datagen.swap");
  Rng explore_rng(cfg.seed, "datagen.explore");
  const std::size_t swaps = round_count(cfg.swap_fraction * static_cast<double>(m));
  for (std::size_t r = 0; r < cfg.realizations; ++r) {
    if (r > 0) {
      auto chosen = swap_rng.sample_without_replacement(m, swaps);
      for (std::size_t e : chosen) {
        state[e] ^= 1;
        log.record(r, e, state[e] == 1);
      }
      log.swapped[r] = std::move(chosen);
    }
    for (std::size_t step = 0; step < cfg.exploration_steps; ++step) {
      const std::size_t e = explore_rng.below(m);
      auto [b, c] = arcs[e];
      std::size_t total = 0, satisfied = 0;
      for (std::size_t f : entering[b]) {
        // Orientation of an undirected edge as it enters b.
        const std::size_t a = arcs[f].second == b ? arcs[f].first : arcs[f].second;
        if (f == e || a == c) continue;
        ++total;
        satisfied += state[f];
      }
      const double p = total == 0 ? 0.5 : static_cast<double>(satisfied) / static_cast<double>(total);
      const bool trust = explore_rng.bernoulli(p);
      state[e] = trust ? 1 : 0;
      log.record(r, e, trust);
    }
    log.steps_per_realization[r] = cfg.exploration_steps;
  }
  return log;
}

DynamicOpinionField ground_truth_field(const ObservationLog& log, std::size_t window, double prior_weight,
                                       double base_rate) {
  const std::size_t T = log.realizations();
  if (window == 0 || window > T) {
    throw Error(ErrorCode::window_too_large,
                "window " + std::to_string(window) + " with " + std::to_string(T) + " realizations");
  }
  const std::size_t times = T - window + 1;
  auto field = DynamicOpinionField::unobserved(times, log.edges());
  ObservationWindow win;
  win.slots.resize(window);
  for (std::size_t e = 0; e < log.edges(); ++e) {
    for (std::size_t tau = 0; tau < times; ++tau) {
      for (std::size_t k = 0; k < window; ++k) win.slots[k] = log.at(tau + k, e);
      if (win.present_count() == 0) continue;
      field.set(tau, e, estimate_from_window(win, prior_weight, base_rate));
    }
  }
  return field;
}

InjectionResult inject_conflicts(const DynamicOpinionField& field, const Graph& graph, double ratio,
                                 std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio < 1.0)) throw Error(ErrorCode::invalid_argument, "conflict ratio must be in [0, 1)");
  if (graph.num_nodes() != field.nodes()) throw Error(ErrorCode::shape_mismatch, "graph and field disagree");
  InjectionResult out{field, {}};
  const std::size_t wanted =
      round_count(static_cast<double>(field.nodes()) * static_cast<double>(field.times()) * ratio);
  if (wanted == 0) return out;

  std::vector<std::pair<std::size_t, std::size_t>> candidates;
  for (std::size_t t = 0; t < field.times(); ++t) {
    for (std::size_t i = 0; i < field.nodes(); ++i) {
      if (field.is_observed(t, i)) candidates.emplace_back(t, i);
    }
  }
  Rng rng(seed, "conflicts");
  rng.shuffle(candidates);

  DynamicOpinionField& f = out.field;
  for (const auto& [t, i] : candidates) {
    if (out.log.size() == wanted) break;
    const auto r = static_cast<Eigen::Index>(t);
    double sum_b = 0.0, sum_d = 0.0;
    std::size_t count = 0;
    for (std::size_t j : graph.neighbors(i)) {
      const auto c = static_cast<Eigen::Index>(j);
      if (!f.observed(r, c)) continue;
      sum_b += f.b(r, c);
      sum_d += f.d(r, c);
      ++count;
    }
    if (count == 0) continue;
    const double mean_b = sum_b / static_cast<double>(count);
    const double mean_d = sum_d / static_cast<double>(count);
    const auto c = static_cast<Eigen::Index>(i);
    const double b = f.b(r, c), d = f.d(r, c), u = f.u(r, c);
    if (std::fabs(b - mean_b) > kConsistencyTolerance || std::fabs(d - mean_d) > kConsistencyTolerance) continue;
    if (mean_b + mean_d <= 0.0) continue;
    const double scale = (1.0 - u) / (mean_b + mean_d);
    const double new_b = mean_d * scale;
    const double new_d = (1.0 - u) - new_b;
    f.b(r, c) = new_b;
    f.d(r, c) = new_d;
    out.log.push_back({t, i, b, d, new_b, new_d});
  }
  if (out.log.size() < wanted) {
    throw Error(ErrorCode::insufficient_candidates, "only " + std::to_string(out.log.size()) + " of " +
                                                        std::to_string(wanted) + " conflicts could be placed");
  }
  return out;
}

void apply_injections(DynamicOpinionField& field, const std::vector<Injection>& log) {
  for (const auto& inj : log) {
    if (inj.t >= field.times() || inj.node >= field.nodes()) {
      throw Error(ErrorCode::index_out_of_range, "injection outside the field");
    }
    const auto r = static_cast<Eigen::Index>(inj.t);
    const auto c = static_cast<Eigen::Index>(inj.node);
    field.b(r, c) = inj.new_b;
    field.d(r, c) = inj.new_d;
  }
}

Subnetwork sample_subnetwork(const Graph& graph, std::size_t n_target, std::uint64_t seed) {
  const std::size_t n = graph.num_nodes();
  if (n_target > n) {
    throw Error(ErrorCode::graph_too_small,
                "requested " + std::to_string(n_target) + " nodes from a graph of " + std::to_string(n));
  }
  Rng rng(seed, "subnetwork");
  std::vector<bool> seen(n, false);
  std::vector<std::size_t> order;
  order.reserve(n_target);
  std::deque<std::size_t> queue;
  while (order.size() < n_target) {
    if (queue.empty()) {
      // Restart from a random unvisited node.
      std::size_t start = rng.below(n);
      while (seen[start]) start = (start + 1) % n;
      seen[start] = true;
      queue.push_back(start);
    }
    const std::size_t v = queue.front();
    queue.pop_front();
    order.push_back(v);
    for (std::size_t w : graph.neighbors(v)) {
      if (!seen[w]) {
        seen[w] = true;
        queue.push_back(w);
      }
    }
  }
  Subnetwork sub;
  sub.graph = graph.induced(order);
  sub.nodes = std::move(order);
  return sub;
}

nlohmann::json to_json(const SplitPlan& plan) {
  nlohmann::json injections = nlohmann::json::array();
  for (const auto& inj : plan.injections) {
    injections.push_back({{"t", inj.t},
                          {"node", inj.node},
                          {"original_b", inj.original_b},
                          {"original_d", inj.original_d},
                          {"new_b", inj.new_b},
                          {"new_d", inj.new_d}});
  }
  return {{"test_ratio", plan.test_ratio},     {"conflict_ratio", plan.conflict_ratio},
          {"seed", plan.seed},                 {"train_nodes", plan.train_nodes},
          {"test_nodes", plan.test_nodes},     {"injections", injections}};
}

SplitPlan split_plan_from_json(const nlohmann::json& j) {
  SplitPlan plan;
  plan.test_ratio = j.at("test_ratio").get<double>();
  plan.conflict_ratio = j.value("conflict_ratio", 0.0);
  plan.seed = j.at("seed").get<std::uint64_t>();
  plan.train_nodes = j.at("train_nodes").get<std::vector<std::size_t>>();
  plan.test_nodes = j.at("test_nodes").get<std::vector<std::size_t>>();
  for (const auto& inj : j.value("injections", nlohmann::json::array())) {
    plan.injections.push_back({inj.at("t").get<std::size_t>(), inj.at("node").get<std::size_t>(),
                               inj.at("original_b").get<double>(), inj.at("original_d").get<double>(),
                               inj.at("new_b").get<double>(), inj.at("new_d").get<double>()});
  }
  return plan;
}

SplitPlan make_split(const DynamicOpinionField& field, double test_ratio, std::uint64_t seed) {
  if (!(test_ratio > 0.0 && test_ratio < 1.0)) throw Error(ErrorCode::invalid_argument, "test ratio must be in (0, 1)");
  const std::size_t n = field.nodes();
  SplitPlan plan;
  plan.test_ratio = test_ratio;
  plan.seed = seed;
  Rng rng(seed, "split");
  plan.test_nodes = rng.sample_without_replacement(n, round_count(test_ratio * static_cast<double>(n)));
  std::sort(plan.test_nodes.begin(), plan.test_nodes.end());
  std::vector<bool> is_test(n, false);
  for (std::size_t i : plan.test_nodes) is_test[i] = true;
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_test[i]) plan.train_nodes.push_back(i);
  }
  return plan;
}

DynamicOpinionField training_view(const DynamicOpinionField& field, const SplitPlan& plan) {
  DynamicOpinionField view = field;
  for (std::size_t i : plan.test_nodes) {
    for (std::size_t t = 0; t < field.times(); ++t) view.hide(t, i);
  }
  return view;
}

BoolArray test_mask(const DynamicOpinionField& truth, const SplitPlan& plan) {
  BoolArray mask = BoolArray::Constant(truth.observed.rows(), truth.observed.cols(), false);
  for (std::size_t i : plan.test_nodes) {
    const auto c = static_cast<Eigen::Index>(i);
    mask.col(c) = truth.observed.col(c);
  }
  return mask;
}

Graph synthetic_trust_graph(std::size_t arcs, double avg_out_degree, double preferential, std::uint64_t seed) {
  if (!(avg_out_degree >= 1.0)) throw Error(ErrorCode::invalid_argument, "average out-degree must be >= 1");
  const auto n = static_cast<std::size_t>(std::ceil(static_cast<double>(arcs) / avg_out_degree)) + 1;
  if (arcs > n * (n - 1)) throw Error(ErrorCode::invalid_argument, "too many arcs for the node count");
  Rng rng(seed, "trust-graph");
  std::set<Edge> chosen;
  std::vector<Edge> rows;
  rows.reserve(arcs);
  // Heads of existing arcs; a uniform pick from this list is proportional to in-degree.
  std::vector<std::size_t> heads;
  while (rows.size() < arcs) {
    const std::size_t src = rng.below(n);
    std::size_t dst = 0;
    if (!heads.empty() && rng.bernoulli(preferential)) {
      dst = rng.bernoulli(static_cast<double>(heads.size()) / static_cast<double>(heads.size() + n))
                ? heads[rng.below(heads.size())]
                : rng.below(n);
    } else {
      dst = rng.below(n);
    }
    if (src == dst || !chosen.emplace(src, dst).second) continue;
    rows.emplace_back(src, dst);
    heads.push_back(dst);
  }
  return Graph::from_edge_list(n, rows, true);
}

Graph random_graph(std::size_t n, double avg_degree, std::uint64_t seed) {
  const std::size_t m = round_count(static_cast<double>(n) * avg_degree / 2.0);
  if (n < 2 || m > n * (n - 1) / 2) throw Error(ErrorCode::invalid_argument, "infeasible random graph");
  Rng rng(seed, "random-graph");
  std::set<Edge> chosen;
  std::vector<Edge> rows;
  rows.reserve(m);
  while (rows.size() < m) {
    std::size_t a = rng.below(n), b = rng.below(n);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    if (chosen.emplace(a, b).second) rows.emplace_back(a, b);
  }
  return Graph::from_edge_list(n, rows, false);
}

Dataset generate_dataset(const Graph& trust_graph, const SimConfig& sim, std::size_t window, double prior_weight,
                         double base_rate) {
  Dataset data;
  data.trust_graph = trust_graph;
  data.model_graph = line_graph(trust_graph).graph;
  data.sim = sim;
  data.window = window;
  data.prior_weight = prior_weight;
  data.base_rate = base_rate;
  data.truth = ground_truth_field(simulate_trust(trust_graph, sim), window, prior_weight, base_rate);
  return data;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& data) {
  std::filesystem::create_directories(dir);
  write_edge_list(dir / "edges.tsv", data.trust_graph);
  write_edge_list(dir / "graph.tsv", data.model_graph);
  write_opinion_csv(dir / "opinions.csv", data.truth);
  nlohmann::json manifest = {{"schema", "opflow-dataset-1"},
                             {"sim", to_json(data.sim)},
                             {"window", data.window},
                             {"prior_weight", data.prior_weight},
                             {"base_rate", data.base_rate},
                             {"trust_nodes", data.trust_graph.num_nodes()},
                             {"trust_arcs", data.trust_graph.num_edges()},
                             {"nodes", data.truth.nodes()},
                             {"times", data.truth.times()}};
  std::ofstream out(dir / "manifest.json");
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + (dir / "manifest.json").string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::format_error, e.what());
  }
  if (manifest.value("schema", "") != "opflow-dataset-1") {
    throw Error(ErrorCode::format_error, "unexpected dataset schema in " + dir.string());
  }
  Dataset data;
  data.sim = sim_config_from_json(manifest.at("sim"));
  data.window = manifest.at("window").get<std::size_t>();
  data.prior_weight = manifest.at("prior_weight").get<double>();
  data.base_rate = manifest.at("base_rate").get<double>();
  data.trust_graph = read_edge_list(dir / "edges.tsv", true).graph;
  data.model_graph = read_edge_list(dir / "graph.tsv", false).graph;
  data.truth = read_opinion_csv(dir / "opinions.csv");
  if (data.model_graph.num_nodes() != data.truth.nodes()) {
    throw Error(ErrorCode::format_error, "graph.tsv and opinions.csv disagree on node count");
  }
  return data;
}

}  // namespace opflow
