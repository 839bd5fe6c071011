#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "opflow/opinion.hpp"

namespace opflow {

using BoolArray = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Per-time, per-node opinions with an observation mask. Row t of `observed`
/// is the set of nodes with known opinions at time t (0-based). Unobserved
/// entries hold zeros.
struct DynamicOpinionField {
  Eigen::MatrixXd b;
  Eigen::MatrixXd d;
  Eigen::MatrixXd u;
  BoolArray observed;

  static DynamicOpinionField unobserved(std::size_t times, std::size_t nodes);

  std::size_t times() const noexcept { return static_cast<std::size_t>(b.rows()); }
  std::size_t nodes() const noexcept { return static_cast<std::size_t>(b.cols()); }

  bool is_observed(std::size_t t, std::size_t i) const;
  Opinion at(std::size_t t, std::size_t i) const;
  void set(std::size_t t, std::size_t i, const Opinion& w);
  void hide(std::size_t t, std::size_t i);
  std::size_t observed_count() const noexcept { return static_cast<std::size_t>(observed.count()); }

  /// Observed row t as a 0/1 vector.
  Eigen::VectorXd mask_row(std::size_t t) const;

  /// Throws Error(mass_sum_violation) if any observed entry is off the simplex
  /// by more than `tol`.
  void validate(double tol = kMassTolerance) const;
};

/// Writes `t,node_id,b,d,u,observed` rows (header first) for every entry,
/// values with 9 significant digits.
void write_opinion_csv(const std::filesystem::path& path, const DynamicOpinionField& field);

/// Reads the format above. Values are kept exactly as parsed; observed rows
/// must sum to 1 within the precision of 9 significant digits.
DynamicOpinionField read_opinion_csv(const std::filesystem::path& path);

/// Rounds every value to what write_opinion_csv would store.
DynamicOpinionField round_to_csv_precision(const DynamicOpinionField& field);

/// Test entries as a T x n mask: `t,node_id` rows.
void write_mask_csv(const std::filesystem::path& path, const BoolArray& mask);
BoolArray read_mask_csv(const std::filesystem::path& path, std::size_t times, std::size_t nodes);

}  // namespace opflow
