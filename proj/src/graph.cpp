#include "opflow/graph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unordered_map>

#include "opflow/errors.hpp"

namespace opflow {
namespace {

void build_csr(std::size_t n, const std::vector<Edge>& arcs, std::vector<std::size_t>& offsets,
               std::vector<std::size_t>& targets) {
  offsets.assign(n + 1, 0);
  for (const auto& [s, t] : arcs) ++offsets[s + 1];
  for (std::size_t i = 0; i < n; ++i) offsets[i + 1] += offsets[i];
  targets.assign(arcs.size(), 0);
  std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
  for (const auto& [s, t] : arcs) targets[cursor[s]++] = t;
  for (std::size_t i = 0; i < n; ++i) {
    auto first = targets.begin() + static_cast<std::ptrdiff_t>(offsets[i]);
    auto last = targets.begin() + static_cast<std::ptrdiff_t>(offsets[i + 1]);
    std::sort(first, last);
  }
}

std::span<const std::size_t> row(const std::vector<std::size_t>& offsets,
                                 const std::vector<std::size_t>& targets, std::size_t v) {
  if (v + 1 >= offsets.size()) throw Error(ErrorCode::index_out_of_range, "node id out of range");
  return {targets.data() + offsets[v], offsets[v + 1] - offsets[v]};
}

}  // namespace

Graph Graph::from_edge_list(std::size_t n, std::span<const Edge> rows, bool directed) {
  Graph g;
  g.n_ = n;
  g.directed_ = directed;
  g.edges_.reserve(rows.size());
  for (auto [s, t] : rows) {
    if (s >= n || t >= n) throw Error(ErrorCode::index_out_of_range, "edge endpoint >= node count");
    if (s == t) throw Error(ErrorCode::self_loop, "self-loop on node " + std::to_string(s));
    if (!directed && s > t) std::swap(s, t);
    g.edges_.emplace_back(s, t);
  }
  // Stable dedupe keeps first-appearance order of edges.
  std::vector<std::size_t> order(g.edges_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return g.edges_[a] < g.edges_[b]; });
  std::vector<bool> keep(g.edges_.size(), true);
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (g.edges_[order[i]] == g.edges_[order[i - 1]]) keep[order[i]] = false;
  }
  std::vector<Edge> unique;
  unique.reserve(g.edges_.size());
  for (std::size_t i = 0; i < g.edges_.size(); ++i) {
    if (keep[i]) unique.push_back(g.edges_[i]);
  }
  g.duplicates_ = g.edges_.size() - unique.size();
  if (g.duplicates_ > 0) {
    std::clog << "warning: ignored " << g.duplicates_ << " duplicate edge row(s)\n";
  }
  g.edges_ = std::move(unique);
  g.build_index();
  return g;
}

void Graph::build_index() {
  std::vector<Edge> sym;
  sym.reserve(2 * edges_.size());
  for (const auto& [s, t] : edges_) {
    sym.emplace_back(s, t);
    sym.emplace_back(t, s);
  }
  std::sort(sym.begin(), sym.end());
  sym.erase(std::unique(sym.begin(), sym.end()), sym.end());
  build_csr(n_, sym, sym_offsets_, sym_targets_);
  if (directed_) {
    build_csr(n_, edges_, out_offsets_, out_targets_);
    std::vector<Edge> reversed;
    reversed.reserve(edges_.size());
    for (const auto& [s, t] : edges_) reversed.emplace_back(t, s);
    build_csr(n_, reversed, in_offsets_, in_targets_);
  }
}

std::span<const std::size_t> Graph::neighbors(std::size_t v) const {
  return row(sym_offsets_, sym_targets_, v);
}

std::span<const std::size_t> Graph::out_neighbors(std::size_t v) const {
  return directed_ ? row(out_offsets_, out_targets_, v) : neighbors(v);
}

std::span<const std::size_t> Graph::in_neighbors(std::size_t v) const {
  return directed_ ? row(in_offsets_, in_targets_, v) : neighbors(v);
}

std::vector<std::size_t> Graph::degrees() const {
  std::vector<std::size_t> deg(n_);
  for (std::size_t v = 0; v < n_; ++v) deg[v] = degree(v);
  return deg;
}

bool Graph::has_edge(std::size_t src, std::size_t dst) const {
  const auto heads = out_neighbors(src);
  return std::binary_search(heads.begin(), heads.end(), dst);
}

Graph Graph::symmetrized() const {
  if (!directed_) return *this;
  std::vector<Edge> rows;
  rows.reserve(edges_.size());
  for (auto [s, t] : edges_) rows.emplace_back(std::min(s, t), std::max(s, t));
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  return from_edge_list(n_, rows, false);
}

Eigen::MatrixXd Graph::adjacency_dense() const {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
  for (const auto& [s, t] : edges_) {
    a(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) = 1.0;
    if (!directed_) a(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(s)) = 1.0;
  }
  return a;
}

Eigen::SparseMatrix<double, Eigen::RowMajor> Graph::adjacency_sparse() const {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(sym_targets_.size());
  for (std::size_t v = 0; v < n_; ++v) {
    for (std::size_t w : neighbors(v)) {
      trips.emplace_back(static_cast<int>(v), static_cast<int>(w), 1.0);
    }
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> a(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
  a.setFromTriplets(trips.begin(), trips.end());
  return a;
}

Graph Graph::induced(std::span<const std::size_t> nodes) const {
  std::unordered_map<std::size_t, std::size_t> index;
  index.reserve(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) index.emplace(nodes[i], i);
  std::vector<Edge> rows;
  for (const auto& [s, t] : edges_) {
    auto si = index.find(s);
    auto ti = index.find(t);
    if (si != index.end() && ti != index.end()) rows.emplace_back(si->second, ti->second);
  }
  return from_edge_list(nodes.size(), rows, directed_);
}

LineGraph line_graph(const Graph& g) {
  if (g.num_edges() == 0) throw Error(ErrorCode::empty_graph, "line graph of an edgeless graph");
  const std::size_t n = g.num_nodes();
  std::vector<std::vector<std::size_t>> incident(n);
  const auto& edges = g.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    incident[edges[e].first].push_back(e);
    incident[edges[e].second].push_back(e);
  }
  std::vector<Edge> rows;
  for (const auto& inc : incident) {
    for (std::size_t i = 0; i < inc.size(); ++i) {
      for (std::size_t j = i + 1; j < inc.size(); ++j) {
        rows.emplace_back(std::min(inc[i], inc[j]), std::max(inc[i], inc[j]));
      }
    }
  }
  // Reciprocal arcs share both endpoints and would appear twice.
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  LineGraph out;
  out.graph = Graph::from_edge_list(edges.size(), rows, false);
  out.edge_to_node.resize(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) out.edge_to_node[e] = e;
  return out;
}

EdgeListFile read_edge_list(const std::filesystem::path& path, bool directed) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  std::vector<std::pair<std::string, std::string>> raw;
  std::string line;
  std::size_t lineno = 0;
  std::size_t declared_nodes = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    if (line[first] == '#') {
      std::istringstream header(line.substr(first + 1));
      std::string word;
      std::size_t count = 0;
      if (header >> word && word == "nodes" && header >> count) declared_nodes = count;
      continue;
    }
    std::istringstream fields(line);
    std::string src, dst;
    if (!(fields >> src >> dst)) {
      throw Error(ErrorCode::format_error, path.string() + ":" + std::to_string(lineno) + ": expected two fields");
    }
    raw.emplace_back(std::move(src), std::move(dst));
  }

  auto as_index = [](const std::string& s, std::size_t& out) {
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
  };
  bool numeric = true;
  std::size_t max_id = 0;
  for (const auto& [s, t] : raw) {
    std::size_t a = 0, b = 0;
    if (!as_index(s, a) || !as_index(t, b)) {
      numeric = false;
      break;
    }
    max_id = std::max({max_id, a, b});
  }

  EdgeListFile result;
  std::vector<Edge> rows;
  rows.reserve(raw.size());
  if (numeric) {
    const std::size_t n = std::max(declared_nodes, raw.empty() ? std::size_t{0} : max_id + 1);
    result.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) result.labels[i] = std::to_string(i);
    for (const auto& [s, t] : raw) {
      std::size_t a = 0, b = 0;
      as_index(s, a);
      as_index(t, b);
      rows.emplace_back(a, b);
    }
  } else {
    std::unordered_map<std::string, std::size_t> ids;
    auto id_of = [&](const std::string& label) {
      auto [it, inserted] = ids.emplace(label, result.labels.size());
      if (inserted) result.labels.push_back(label);
      return it->second;
    };
    for (const auto& [s, t] : raw) {
      const std::size_t a = id_of(s);
      rows.emplace_back(a, id_of(t));
    }
  }
  result.graph = Graph::from_edge_list(result.labels.size(), rows, directed);
  return result;
}

void write_edge_list(const std::filesystem::path& path, const Graph& g) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  out << "# nodes " << g.num_nodes() << (g.directed() ? " directed" : " undirected") << '\n';
  for (const auto& [s, t] : g.edges()) out << s << '\t' << t << '\n';
}

}  // namespace opflow
