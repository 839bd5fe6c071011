#include "opflow/laplacian.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "opflow/errors.hpp"
#include "opflow/rng.hpp"

namespace opflow {
namespace {

constexpr std::size_t kDenseNodeCap = 8192;

// Scalar T_k(x) by the closed forms, kept apart from the matrix recursion so
// the oracle does not share code with cheb_apply.
double chebyshev_closed_form(std::size_t k, double x) {
  const double kk = static_cast<double>(k);
  if (std::fabs(x) <= 1.0) return std::cos(kk * std::acos(x));
  const double sign = (x < 0.0 && (k % 2 == 1)) ? -1.0 : 1.0;
  return sign * std::cosh(kk * std::acosh(std::fabs(x)));
}

void check_rows(const Laplacian& lap, const Matrix& x) {
  if (static_cast<std::size_t>(x.rows()) != lap.size()) {
    throw Error(ErrorCode::shape_mismatch, "signal has " + std::to_string(x.rows()) + " rows, graph has " +
                                               std::to_string(lap.size()) + " nodes");
  }
}

}  // namespace

double power_iteration_lambda_max(const SparseMatrix& m, std::size_t max_iters, double rel_tol) {
  const Eigen::Index n = m.rows();
  if (n == 0) return 0.0;
  Rng rng(0x5eed'1a9c'0000'0001ULL);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.uniform(-1.0, 1.0);
  v.normalize();
  double lambda = 0.0;
  for (std::size_t it = 0; it < max_iters; ++it) {
    Eigen::VectorXd w = m * v;
    const double next = v.dot(w);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    if (it > 0 && std::fabs(next - lambda) <= rel_tol * std::fabs(next)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return lambda;
}

Laplacian Laplacian::build(const Graph& g, LaplacianKind kind) {
  const Graph sym = g.symmetrized();
  const auto n = static_cast<Eigen::Index>(sym.num_nodes());
  const auto deg = sym.degrees();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(2 * sym.num_edges() + sym.num_nodes());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto di = static_cast<double>(deg[static_cast<std::size_t>(i)]);
    if (di == 0.0) continue;  // isolated nodes keep a zero row
    trips.emplace_back(i, i, kind == LaplacianKind::unnormalized ? di : 1.0);
    for (std::size_t j : sym.neighbors(static_cast<std::size_t>(i))) {
      const double value =
          kind == LaplacianKind::unnormalized ? -1.0 : -1.0 / std::sqrt(di * static_cast<double>(deg[j]));
      trips.emplace_back(i, static_cast<Eigen::Index>(j), value);
    }
  }
  Laplacian lap;
  lap.kind_ = kind;
  lap.matrix_.resize(n, n);
  lap.matrix_.setFromTriplets(trips.begin(), trips.end());
  lap.matrix_.makeCompressed();

  double lambda = power_iteration_lambda_max(lap.matrix_);
  if (!(lambda > 1e-12)) lambda = 2.0;
  lap.lambda_max_ = lambda;

  SparseMatrix identity(n, n);
  identity.setIdentity();
  lap.rescaled_ = (2.0 / lambda) * lap.matrix_ - identity;
  lap.rescaled_.makeCompressed();

  const double nn = static_cast<double>(n);
  if (sym.num_nodes() <= kDenseNodeCap && static_cast<double>(sym.num_edges()) >= nn * nn / 8.0) {
    lap.rescaled_dense_ = Matrix(lap.rescaled_);
  }
  return lap;
}

Matrix Laplacian::apply_rescaled(const Matrix& x) const {
  if (rescaled_dense_) return (*rescaled_dense_) * x;
  return rescaled_ * x;
}

Matrix cheb_basis(const Laplacian& lap, const Matrix& x, std::size_t order) {
  check_rows(lap, x);
  const Eigen::Index c = x.cols();
  Matrix out(x.rows(), c * static_cast<Eigen::Index>(order + 1));
  out.leftCols(c) = x;
  if (order >= 1) out.middleCols(c, c) = lap.apply_rescaled(x);
  for (std::size_t k = 2; k <= order; ++k) {
    const Eigen::Index kk = static_cast<Eigen::Index>(k);
    out.middleCols(kk * c, c) =
        2.0 * lap.apply_rescaled(out.middleCols((kk - 1) * c, c)) - out.middleCols((kk - 2) * c, c);
  }
  return out;
}

Matrix cheb_combine(const Laplacian& lap, const Matrix& blocks, std::size_t order) {
  const Eigen::Index parts = static_cast<Eigen::Index>(order + 1);
  if (blocks.cols() % parts != 0) throw Error(ErrorCode::shape_mismatch, "block count does not divide columns");
  check_rows(lap, blocks);
  const Eigen::Index c = blocks.cols() / parts;
  if (order == 0) return blocks;
  // b_k = Y_k + 2 L~ b_{k+1} - b_{k+2};  result = Y_0 + L~ b_1 - b_2.
  Matrix b1 = Matrix::Zero(blocks.rows(), c);
  Matrix b2 = Matrix::Zero(blocks.rows(), c);
  for (Eigen::Index k = parts - 1; k >= 1; --k) {
    Matrix bk = blocks.middleCols(k * c, c) + 2.0 * lap.apply_rescaled(b1) - b2;
    b2 = std::move(b1);
    b1 = std::move(bk);
  }
  return blocks.leftCols(c) + lap.apply_rescaled(b1) - b2;
}

Matrix cheb_apply(const Laplacian& lap, const ChebCoeffs& coeffs, const Matrix& signal) {
  check_rows(lap, signal);
  if (coeffs.theta.empty()) throw Error(ErrorCode::shape_mismatch, "empty coefficient vector");
  Matrix prev = signal;
  Matrix out = coeffs.theta[0] * prev;
  if (coeffs.theta.size() == 1) return out;
  Matrix cur = lap.apply_rescaled(signal);
  out += coeffs.theta[1] * cur;
  for (std::size_t k = 2; k < coeffs.theta.size(); ++k) {
    Matrix next = 2.0 * lap.apply_rescaled(cur) - prev;
    out += coeffs.theta[k] * next;
    prev = std::move(cur);
    cur = std::move(next);
  }
  return out;
}

Matrix spectral_oracle(const Laplacian& lap, const ChebCoeffs& coeffs, const Matrix& signal) {
  if (lap.size() > kSpectralOracleMaxNodes) {
    throw Error(ErrorCode::too_large, "spectral oracle limited to " + std::to_string(kSpectralOracleMaxNodes) +
                                          " nodes");
  }
  check_rows(lap, signal);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(lap.dense());
  const Eigen::VectorXd& lambdas = eig.eigenvalues();
  const Matrix& phi = eig.eigenvectors();
  Eigen::VectorXd response(lambdas.size());
  for (Eigen::Index i = 0; i < lambdas.size(); ++i) {
    const double x = 2.0 * lambdas[i] / lap.lambda_max() - 1.0;
    double g = 0.0;
    for (std::size_t k = 0; k < coeffs.theta.size(); ++k) g += coeffs.theta[k] * chebyshev_closed_form(k, x);
    response[i] = g;
  }
  return phi * response.asDiagonal() * (phi.transpose() * signal);
}

double dense_lambda_max(const Laplacian& lap) {
  if (lap.size() > kSpectralOracleMaxNodes) throw Error(ErrorCode::too_large, "dense eigensolve limited to 64 nodes");
  if (lap.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(lap.dense(), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff();
}

}  // namespace opflow
