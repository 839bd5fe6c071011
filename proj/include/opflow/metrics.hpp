#pragma once

#include <vector>

#include "opflow/opinion_field.hpp"

namespace opflow {

/// Mean |b - b*| over the entries set in `mask`. Throws Error(empty_test_set)
/// when the mask is empty and Error(shape_mismatch) on differing shapes.
double b_mae(const DynamicOpinionField& pred, const DynamicOpinionField& truth, const BoolArray& mask);
/// Mean |u - u*| over the entries set in `mask`.
double u_mae(const DynamicOpinionField& pred, const DynamicOpinionField& truth, const BoolArray& mask);

/// Per-snapshot errors; snapshots without test entries hold NaN.
struct MaeCurves {
  std::vector<double> b;
  std::vector<double> u;
};
MaeCurves snapshot_mae(const DynamicOpinionField& pred, const DynamicOpinionField& truth, const BoolArray& mask);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace opflow
