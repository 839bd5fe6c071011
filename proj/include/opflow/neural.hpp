#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "opflow/laplacian.hpp"

namespace opflow::nn {

/// Trainable tensor. Values are held as a matrix: a logical shape
/// (d0, ..., dk) is stored as (d0 * ... * d{k-1}) x dk, row-major over the
/// leading dimensions.
class Parameter {
 public:
  Parameter() = default;
  Parameter(std::string name, std::vector<std::size_t> shape);
  Parameter(std::string name, std::vector<std::size_t> shape, Matrix values);

  const std::string& name() const noexcept { return name_; }
  const std::vector<std::size_t>& shape() const noexcept { return shape_; }

  Matrix& value() noexcept { return value_; }
  const Matrix& value() const noexcept { return value_; }
  Matrix& grad() noexcept { return grad_; }
  const Matrix& grad() const noexcept { return grad_; }

  void zero_grad() { grad_.setZero(value_.rows(), value_.cols()); }
  std::size_t size() const noexcept { return static_cast<std::size_t>(value_.size()); }

 private:
  std::string name_;
  std::vector<std::size_t> shape_;
  Matrix value_;
  Matrix grad_;
};

/// Matrix layout of a logical shape: (product of leading dims) x last dim.
std::pair<Eigen::Index, Eigen::Index> matrix_layout(std::span<const std::size_t> shape);

/// Uniform in +-sqrt(6 / (fan_in + fan_out)) where fan_out is the last
/// dimension and fan_in the product of the others.
Parameter glorot_init(std::string name, std::vector<std::size_t> shape, std::uint64_t seed);

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

/// Reverse-mode differentiation over a recorded sequence of matrix operations.
///
/// Single-threaded; one tape per training session. When recording is disabled
/// the tape only keeps forward values.
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  bool recording() const noexcept { return recording_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  void clear();

  const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
  /// Gradient of the last backward() target with respect to v (empty if v did
  /// not influence it).
  const Matrix& grad(Var v) const { return nodes_.at(v.id).grad; }

  Var constant(Matrix value);
  /// Leaf bound to a parameter; repeated calls return the same Var.
  Var parameter(Parameter& p);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  /// Elementwise product.
  Var mul(Var a, Var b);
  Var one_minus(Var a);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var abs(Var a);
  Var concat_cols(Var a, Var b);
  /// a (n x p) times w (p x q).
  Var matmul(Var a, Var w);
  /// Adds the 1 x q row `bias` to every row of a.
  Var add_row_bias(Var a, Var bias);
  /// [T_0 x | ... | T_order x] * w for a Chebyshev graph filter bank, with w of
  /// shape ((order+1) * in) x out. A null Laplacian makes this a node-wise
  /// linear map (order must be 0).
  Var cheb_conv(Var x, Var w, const Laplacian* lap, std::size_t order);
  /// weight * sum_i mask_i * |pred_i - target_i| for an n x 1 prediction. The
  /// subgradient of |r| at r = 0 is 0.
  Var masked_l1(Var pred, const Eigen::VectorXd& target, const Eigen::VectorXd& mask, double weight);
  /// Sum of all entries, as a 1 x 1 value.
  Var sum(Var a);
  /// Sum of 1 x 1 values.
  Var add_scalars(std::span<const Var> terms);

  /// Backpropagates from the 1 x 1 value `loss`. Zeroes the grads of every
  /// bound parameter first, then accumulates into them. Throws Error(no_tape)
  /// when nothing was recorded.
  void backward(Var loss);

 private:
  enum class Op {
    constant, parameter, add, sub, mul, one_minus, sigmoid, tanh, abs, concat, matmul, add_row_bias,
    cheb_conv, masked_l1, sum, add_scalars
  };

  struct Node {
    Op op = Op::constant;
    Matrix value;
    Matrix grad;
    std::size_t a = 0;
    std::size_t b = 0;
    bool requires_grad = false;
    Matrix aux;  // op-specific saved tensor
    double scalar = 0.0;
    std::size_t order = 0;
    const Laplacian* lap = nullptr;
    Parameter* param = nullptr;
    std::vector<std::size_t> inputs;
  };

  Var push(Node node);
  bool needs(std::size_t id) const { return nodes_[id].requires_grad; }
  void accumulate(std::size_t id, const Matrix& g);
  void check_same_shape(Var a, Var b, const char* op) const;

  bool recording_;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> bound_;
};

/// Chebyshev graph convolution layer with an optional bias.
class GraphConvLayer {
 public:
  GraphConvLayer(std::string name, const Laplacian* lap, std::size_t order, std::size_t in_channels,
                 std::size_t out_channels, bool bias, std::uint64_t seed);

  /// out[:, o] = sum_i cheb(weights[:, i, o]) applied to input[:, i] (+ bias[o]).
  Var forward(Tape& tape, Var input);
  /// Untaped forward pass.
  Matrix forward(const Matrix& input);

  std::size_t order() const noexcept { return order_; }
  std::size_t in_channels() const noexcept { return in_; }
  std::size_t out_channels() const noexcept { return out_; }
  Parameter& weights() noexcept { return weights_; }
  std::optional<Parameter>& bias() noexcept { return bias_; }

 private:
  const Laplacian* lap_;
  std::size_t order_, in_, out_;
  Parameter weights_;
  std::optional<Parameter> bias_;
};

/// values -= eta * grad, then grads are zeroed.
void sgd_step(std::span<Parameter* const> params, double eta);

}  // namespace opflow::nn
