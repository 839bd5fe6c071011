#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "opflow/graph.hpp"

namespace opflow {

using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

enum class LaplacianKind { unnormalized, normalized };

/// Largest eigenvalue of a symmetric PSD matrix by power iteration: at most
/// `max_iters` steps, stopping once the Rayleigh quotient changes by less than
/// `rel_tol` relatively.
double power_iteration_lambda_max(const SparseMatrix& m, std::size_t max_iters = 1000,
                                  double rel_tol = 1e-9);

/// Graph Laplacian plus its rescaled form 2 L / lambda_max - I.
///
/// Directed graphs are symmetrized first. Immutable and shareable across
/// threads once built.
class Laplacian {
 public:
  static Laplacian build(const Graph& g, LaplacianKind kind = LaplacianKind::normalized);

  LaplacianKind kind() const noexcept { return kind_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(matrix_.rows()); }
  double lambda_max() const noexcept { return lambda_max_; }

  const SparseMatrix& matrix() const noexcept { return matrix_; }
  const SparseMatrix& rescaled() const noexcept { return rescaled_; }
  Matrix dense() const { return Matrix(matrix_); }
  Matrix rescaled_dense() const { return Matrix(rescaled_); }

  /// True when the rescaled operator is held densely (edge density >= 1/8).
  bool uses_dense_path() const noexcept { return rescaled_dense_.has_value(); }

  /// Rescaled Laplacian times x.
  Matrix apply_rescaled(const Matrix& x) const;

 private:
  LaplacianKind kind_ = LaplacianKind::normalized;
  double lambda_max_ = 2.0;
  SparseMatrix matrix_;
  SparseMatrix rescaled_;
  std::optional<Matrix> rescaled_dense_;
};

/// Chebyshev filter coefficients theta_0..theta_K.
struct ChebCoeffs {
  std::vector<double> theta;

  std::size_t order() const noexcept { return theta.empty() ? 0 : theta.size() - 1; }
};

/// [T_0(L~) x | T_1(L~) x | ... | T_order(L~) x], shape n x (order+1)*cols(x).
Matrix cheb_basis(const Laplacian& lap, const Matrix& x, std::size_t order);

/// Sum_k T_k(L~) Y_k for Y = [Y_0 | ... | Y_order] (each block n x c), by
/// Clenshaw's recurrence. Because every T_k(L~) is symmetric this is also the
/// adjoint of cheb_basis.
Matrix cheb_combine(const Laplacian& lap, const Matrix& blocks, std::size_t order);

/// Sum_k theta_k T_k(L~) signal, via the three-term recursion.
Matrix cheb_apply(const Laplacian& lap, const ChebCoeffs& coeffs, const Matrix& signal);

inline constexpr std::size_t kSpectralOracleMaxNodes = 64;

/// Phi g(Lambda) Phi^T signal by dense eigendecomposition, with
/// g(lambda) = Sum_k theta_k T_k(2 lambda / lambda_max - 1). Test oracle for
/// cheb_apply; throws Error(too_large) above kSpectralOracleMaxNodes.
Matrix spectral_oracle(const Laplacian& lap, const ChebCoeffs& coeffs, const Matrix& signal);

/// Largest eigenvalue by dense symmetric eigendecomposition (n <= 64).
double dense_lambda_max(const Laplacian& lap);

}  // namespace opflow
