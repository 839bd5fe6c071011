#include "opflow/metrics.hpp"

#include <cmath>
#include <limits>

#include "opflow/errors.hpp"

namespace opflow {
namespace {

void check_shapes(const DynamicOpinionField& pred, const DynamicOpinionField& truth, const BoolArray& mask) {
  if (pred.times() != truth.times() || pred.nodes() != truth.nodes() || mask.rows() != truth.b.rows() ||
      mask.cols() != truth.b.cols()) {
    throw Error(ErrorCode::shape_mismatch, "prediction, truth and mask shapes differ");
  }
}

double masked_mae(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const BoolArray& mask) {
  double sum = 0.0;
  std::size_t count = 0;
  for (Eigen::Index t = 0; t < mask.rows(); ++t) {
    for (Eigen::Index i = 0; i < mask.cols(); ++i) {
      if (!mask(t, i)) continue;
      sum += std::fabs(x(t, i) - y(t, i));
      ++count;
    }
  }
  if (count == 0) throw Error(ErrorCode::empty_test_set, "no test entries");
  return sum / static_cast<double>(count);
}

}  // namespace

double b_mae(const DynamicOpinionField& pred, const DynamicOpinionField& truth, const BoolArray& mask) {
  check_shapes(pred, truth, mask);
  return masked_mae(pred.b, truth.b, mask);
}

double u_mae(const DynamicOpinionField& pred, const DynamicOpinionField& truth, const BoolArray& mask) {
  check_shapes(pred, truth, mask);
  return masked_mae(pred.u, truth.u, mask);
}

MaeCurves snapshot_mae(const DynamicOpinionField& pred, const DynamicOpinionField& truth, const BoolArray& mask) {
  check_shapes(pred, truth, mask);
  MaeCurves curves;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (Eigen::Index t = 0; t < mask.rows(); ++t) {
    const BoolArray row = mask.row(t);
    if (!row.any()) {
      curves.b.push_back(nan);
      curves.u.push_back(nan);
      continue;
    }
    curves.b.push_back(masked_mae(pred.b.row(t), truth.b.row(t), row));
    curves.u.push_back(masked_mae(pred.u.row(t), truth.u.row(t), row));
  }
  return curves;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorCode::invalid_argument, "need two or more points");
  const auto n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0.0 && y[k] > 0.0)) throw Error(ErrorCode::invalid_argument, "log-log fit needs positive values");
    const double lx = std::log(x[k]), ly = std::log(y[k]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw Error(ErrorCode::invalid_argument, "x values must differ");
  return (n * sxy - sx * sy) / denom;
}

}  // namespace opflow
