#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace opflow {

using Edge = std::pair<std::size_t, std::size_t>;

/// Static topology with 0/1 adjacency.
///
/// Undirected graphs store each edge once as (min, max). Directed graphs store
/// arcs as given. `neighbors` is always the symmetrized view.
class Graph {
 public:
  Graph() = default;

  /// Duplicate rows are dropped with a warning on std::clog; self-loops throw
  /// Error(self_loop). Isolated nodes up to `n` are kept.
  static Graph from_edge_list(std::size_t n, std::span<const Edge> rows, bool directed);

  std::size_t num_nodes() const noexcept { return n_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  bool directed() const noexcept { return directed_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  /// Sorted neighbors in the symmetrized graph.
  std::span<const std::size_t> neighbors(std::size_t v) const;
  /// Sorted heads of arcs leaving v (equals neighbors for undirected graphs).
  std::span<const std::size_t> out_neighbors(std::size_t v) const;
  /// Sorted tails of arcs entering v (equals neighbors for undirected graphs).
  std::span<const std::size_t> in_neighbors(std::size_t v) const;

  std::size_t degree(std::size_t v) const { return neighbors(v).size(); }
  std::vector<std::size_t> degrees() const;

  bool has_edge(std::size_t src, std::size_t dst) const;

  /// Undirected copy; reciprocal arcs collapse into one edge.
  Graph symmetrized() const;

  /// A_{ij} = 1 iff (i, j) is an edge (both orientations when undirected).
  Eigen::MatrixXd adjacency_dense() const;
  /// Adjacency of the symmetrized graph.
  Eigen::SparseMatrix<double, Eigen::RowMajor> adjacency_sparse() const;

  /// Induced subgraph on `nodes`; node i of the result is nodes[i].
  Graph induced(std::span<const std::size_t> nodes) const;

  std::size_t duplicate_rows_dropped() const noexcept { return duplicates_; }

 private:
  void build_index();

  std::size_t n_ = 0;
  bool directed_ = false;
  std::vector<Edge> edges_;
  std::size_t duplicates_ = 0;
  // CSR-style adjacency lists.
  std::vector<std::size_t> sym_offsets_, sym_targets_;
  std::vector<std::size_t> out_offsets_, out_targets_;
  std::vector<std::size_t> in_offsets_, in_targets_;
};

struct LineGraph {
  Graph graph;
  /// edge_to_node[e] is the line-graph node of original edge e (index into Graph::edges()).
  std::vector<std::size_t> edge_to_node;
};

/// One node per original edge; two nodes adjacent iff the edges share an
/// endpoint. Throws Error(empty_graph) when g has no edges.
LineGraph line_graph(const Graph& g);

struct EdgeListFile {
  Graph graph;
  /// labels[i] is the token that node i had in the file.
  std::vector<std::string> labels;
};

/// Reads `src<TAB>dst` rows (any whitespace accepted); `#` lines are comments.
/// Non-negative integer labels keep their value as id; anything else is
/// remapped in order of first appearance.
EdgeListFile read_edge_list(const std::filesystem::path& path, bool directed);
void write_edge_list(const std::filesystem::path& path, const Graph& g);

}  // namespace opflow
