#include "opflow/neural.hpp"

#include <cmath>
#include <numeric>

#include "opflow/errors.hpp"
#include "opflow/rng.hpp"

namespace opflow::nn {
namespace {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

std::pair<Eigen::Index, Eigen::Index> matrix_layout(std::span<const std::size_t> shape) {
  if (shape.empty()) return {1, 1};
  if (shape.size() == 1) return {1, static_cast<Eigen::Index>(shape[0])};
  const std::size_t rows =
      std::accumulate(shape.begin(), shape.end() - 1, std::size_t{1}, std::multiplies<>());
  return {static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(shape.back())};
}

Parameter::Parameter(std::string name, std::vector<std::size_t> shape)
    : name_(std::move(name)), shape_(std::move(shape)) {
  const auto [r, c] = matrix_layout(shape_);
  value_ = Matrix::Zero(r, c);
  grad_ = Matrix::Zero(r, c);
}

Parameter::Parameter(std::string name, std::vector<std::size_t> shape, Matrix values)
    : name_(std::move(name)), shape_(std::move(shape)), value_(std::move(values)) {
  const auto [r, c] = matrix_layout(shape_);
  if (value_.rows() != r || value_.cols() != c) {
    throw Error(ErrorCode::shape_mismatch, "parameter " + name_ + " values are " + shape_str(value_));
  }
  grad_ = Matrix::Zero(r, c);
}

Parameter glorot_init(std::string name, std::vector<std::size_t> shape, std::uint64_t seed) {
  for (auto d : shape) {
    if (d == 0) throw Error(ErrorCode::invalid_argument, "zero dimension in shape of " + name);
  }
  const auto [rows, cols] = matrix_layout(shape);
  const double fan_in = static_cast<double>(rows);
  const double fan_out = static_cast<double>(cols);
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  Parameter p(std::move(name), std::move(shape));
  Rng rng(seed);
  // Row-major fill so the draw order follows the logical layout.
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) p.value()(i, j) = rng.uniform(-limit, limit);
  }
  return p;
}

void Tape::clear() {
  nodes_.clear();
  bound_.clear();
}

Var Tape::push(Node node) {
  if (!recording_) {
    // Inference mode keeps values only.
    node.aux.resize(0, 0);
    node.requires_grad = false;
  }
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

void Tape::check_same_shape(Var a, Var b, const char* op) const {
  const Matrix& x = value(a);
  const Matrix& y = value(b);
  if (x.rows() != y.rows() || x.cols() != y.cols()) {
    throw Error(ErrorCode::shape_mismatch, std::string(op) + ": " + shape_str(x) + " vs " + shape_str(y));
  }
}

Var Tape::constant(Matrix value) {
  Node n;
  n.op = Op::constant;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::parameter(Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return Var{it->second};
  Node n;
  n.op = Op::parameter;
  n.value = p.value();
  n.param = &p;
  n.requires_grad = true;
  const Var v = push(std::move(n));
  bound_.emplace(&p, v.id);
  return v;
}

Var Tape::add(Var a, Var b) {
  check_same_shape(a, b, "add");
  Node n;
  n.op = Op::add;
  n.value = value(a) + value(b);
  n.a = a.id;
  n.b = b.id;
  n.requires_grad = needs(a.id) || needs(b.id);
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  check_same_shape(a, b, "sub");
  Node n;
  n.op = Op::sub;
  n.value = value(a) - value(b);
  n.a = a.id;
  n.b = b.id;
  n.requires_grad = needs(a.id) || needs(b.id);
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  check_same_shape(a, b, "mul");
  Node n;
  n.op = Op::mul;
  n.value = value(a).cwiseProduct(value(b));
  n.a = a.id;
  n.b = b.id;
  n.requires_grad = needs(a.id) || needs(b.id);
  return push(std::move(n));
}

Var Tape::one_minus(Var a) {
  Node n;
  n.op = Op::one_minus;
  n.value = (1.0 - value(a).array()).matrix();
  n.a = a.id;
  n.requires_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
  Node n;
  n.op = Op::sigmoid;
  n.value = value(a).unaryExpr([](double x) {
    // Split form avoids overflow of exp for large |x|.
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  n.a = a.id;
  n.requires_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::tanh(Var a) {
  Node n;
  n.op = Op::tanh;
  n.value = value(a).array().tanh().matrix();
  n.a = a.id;
  n.requires_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::abs(Var a) {
  Node n;
  n.op = Op::abs;
  n.value = value(a).cwiseAbs();
  n.a = a.id;
  n.requires_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::concat_cols(Var a, Var b) {
  const Matrix& x = value(a);
  const Matrix& y = value(b);
  if (x.rows() != y.rows()) {
    throw Error(ErrorCode::shape_mismatch, "concat_cols: " + shape_str(x) + " vs " + shape_str(y));
  }
  Node n;
  n.op = Op::concat;
  n.value.resize(x.rows(), x.cols() + y.cols());
  n.value << x, y;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad = needs(a.id) || needs(b.id);
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var w) {
  const Matrix& x = value(a);
  const Matrix& m = value(w);
  if (x.cols() != m.rows()) {
    throw Error(ErrorCode::shape_mismatch, "matmul: " + shape_str(x) + " times " + shape_str(m));
  }
  Node n;
  n.op = Op::matmul;
  n.value = x * m;
  n.a = a.id;
  n.b = w.id;
  n.requires_grad = needs(a.id) || needs(w.id);
  return push(std::move(n));
}

Var Tape::add_row_bias(Var a, Var bias) {
  const Matrix& x = value(a);
  const Matrix& c = value(bias);
  if (c.rows() != 1 || c.cols() != x.cols()) {
    throw Error(ErrorCode::shape_mismatch, "add_row_bias: " + shape_str(x) + " with bias " + shape_str(c));
  }
  Node n;
  n.op = Op::add_row_bias;
  n.value = x.rowwise() + c.row(0);
  n.a = a.id;
  n.b = bias.id;
  n.requires_grad = needs(a.id) || needs(bias.id);
  return push(std::move(n));
}

Var Tape::cheb_conv(Var x, Var w, const Laplacian* lap, std::size_t order) {
  if (lap == nullptr && order != 0) {
    throw Error(ErrorCode::invalid_argument, "node-wise convolution requires order 0");
  }
  const Matrix& in = value(x);
  const Matrix& weights = value(w);
  if (weights.rows() != in.cols() * static_cast<Eigen::Index>(order + 1)) {
    throw Error(ErrorCode::shape_mismatch,
                "cheb_conv: input " + shape_str(in) + ", weights " + shape_str(weights));
  }
  Node n;
  n.op = Op::cheb_conv;
  n.a = x.id;
  n.b = w.id;
  n.lap = lap;
  n.order = order;
  n.requires_grad = needs(x.id) || needs(w.id);
  if (lap == nullptr || order == 0) {
    n.value = in * weights;
  } else {
    Matrix basis = cheb_basis(*lap, in, order);
    n.value = basis * weights;
    if (n.requires_grad) n.aux = std::move(basis);
  }
  return push(std::move(n));
}

Var Tape::masked_l1(Var pred, const Eigen::VectorXd& target, const Eigen::VectorXd& mask, double weight) {
  const Matrix& p = value(pred);
  if (p.cols() != 1 || p.rows() != target.size() || p.rows() != mask.size()) {
    throw Error(ErrorCode::shape_mismatch, "masked_l1: prediction " + shape_str(p) + ", target " +
                                               std::to_string(target.size()));
  }
  Node n;
  n.op = Op::masked_l1;
  n.value = Matrix::Constant(1, 1, weight * (mask.array() * (p.col(0) - target).array().abs()).sum());
  n.a = pred.id;
  n.scalar = weight;
  n.requires_grad = needs(pred.id);
  if (n.requires_grad) {
    n.aux.resize(p.rows(), 2);
    n.aux.col(0) = target;
    n.aux.col(1) = mask;
  }
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  Node n;
  n.op = Op::sum;
  n.value = Matrix::Constant(1, 1, value(a).sum());
  n.a = a.id;
  n.requires_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::add_scalars(std::span<const Var> terms) {
  Node n;
  n.op = Op::add_scalars;
  double total = 0.0;
  for (Var t : terms) {
    const Matrix& v = value(t);
    if (v.size() != 1) throw Error(ErrorCode::shape_mismatch, "add_scalars: term is " + shape_str(v));
    total += v(0, 0);
    n.inputs.push_back(t.id);
    n.requires_grad = n.requires_grad || needs(t.id);
  }
  n.value = Matrix::Constant(1, 1, total);
  return push(std::move(n));
}

void Tape::accumulate(std::size_t id, const Matrix& g) {
  Node& node = nodes_[id];
  if (!node.requires_grad) return;
  if (node.grad.size() == 0) {
    node.grad = g;
  } else {
    node.grad += g;
  }
}

void Tape::backward(Var loss) {
  if (nodes_.empty() || !recording_) throw Error(ErrorCode::no_tape, "backward() without a recorded forward pass");
  if (loss.id >= nodes_.size()) throw Error(ErrorCode::index_out_of_range, "loss handle not on this tape");
  if (nodes_[loss.id].value.size() != 1) {
    throw Error(ErrorCode::shape_mismatch, "backward() needs a scalar, got " + shape_str(nodes_[loss.id].value));
  }
  for (auto& node : nodes_) node.grad.resize(0, 0);
  for (auto& [param, id] : bound_) nodes_[id].param->zero_grad();

  nodes_[loss.id].grad = Matrix::Ones(1, 1);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.requires_grad || node.grad.size() == 0) continue;
    // accumulate() only writes to inputs, which precede node i.
    const Matrix& g = node.grad;
    switch (node.op) {
      case Op::constant:
        break;
      case Op::parameter:
        node.param->grad() += g;
        break;
      case Op::add:
        accumulate(node.a, g);
        accumulate(node.b, g);
        break;
      case Op::sub:
        accumulate(node.a, g);
        if (needs(node.b)) accumulate(node.b, -g);
        break;
      case Op::mul:
        if (needs(node.a)) accumulate(node.a, g.cwiseProduct(nodes_[node.b].value));
        if (needs(node.b)) accumulate(node.b, g.cwiseProduct(nodes_[node.a].value));
        break;
      case Op::one_minus:
        accumulate(node.a, -g);
        break;
      case Op::sigmoid:
        accumulate(node.a, (g.array() * node.value.array() * (1.0 - node.value.array())).matrix());
        break;
      case Op::tanh:
        accumulate(node.a, (g.array() * (1.0 - node.value.array().square())).matrix());
        break;
      case Op::abs:
        accumulate(node.a, (g.array() * nodes_[node.a].value.array().sign()).matrix());
        break;
      case Op::concat: {
        const Eigen::Index left = nodes_[node.a].value.cols();
        if (needs(node.a)) accumulate(node.a, g.leftCols(left));
        if (needs(node.b)) accumulate(node.b, g.rightCols(g.cols() - left));
        break;
      }
      case Op::matmul:
        if (needs(node.a)) accumulate(node.a, g * nodes_[node.b].value.transpose());
        if (needs(node.b)) accumulate(node.b, nodes_[node.a].value.transpose() * g);
        break;
      case Op::add_row_bias:
        accumulate(node.a, g);
        if (needs(node.b)) accumulate(node.b, g.colwise().sum());
        break;
      case Op::cheb_conv: {
        const Matrix& weights = nodes_[node.b].value;
        const bool pointwise = node.lap == nullptr || node.order == 0;
        if (needs(node.b)) {
          const Matrix& basis = pointwise ? nodes_[node.a].value : node.aux;
          accumulate(node.b, basis.transpose() * g);
        }
        if (needs(node.a)) {
          Matrix blocks = g * weights.transpose();
          accumulate(node.a, pointwise ? blocks : cheb_combine(*node.lap, blocks, node.order));
        }
        break;
      }
      case Op::masked_l1: {
        const Matrix& p = nodes_[node.a].value;
        const auto residual = (p.col(0) - node.aux.col(0)).array();
        Matrix d = (g(0, 0) * node.scalar * node.aux.col(1).array() * residual.sign()).matrix();
        accumulate(node.a, d);
        break;
      }
      case Op::sum:
        accumulate(node.a, Matrix::Constant(nodes_[node.a].value.rows(), nodes_[node.a].value.cols(), g(0, 0)));
        break;
      case Op::add_scalars:
        for (std::size_t in : node.inputs) accumulate(in, g);
        break;
    }
  }
}

GraphConvLayer::GraphConvLayer(std::string name, const Laplacian* lap, std::size_t order, std::size_t in_channels,
                               std::size_t out_channels, bool bias, std::uint64_t seed)
    : lap_(lap),
      order_(order),
      in_(in_channels),
      out_(out_channels),
      weights_(glorot_init(name + ".weight", {order + 1, in_channels, out_channels}, seed)) {
  if (lap == nullptr && order != 0) throw Error(ErrorCode::invalid_argument, "order > 0 needs a Laplacian");
  if (bias) bias_.emplace(name + ".bias", std::vector<std::size_t>{out_channels});
}

Var GraphConvLayer::forward(Tape& tape, Var input) {
  const Matrix& x = tape.value(input);
  if (static_cast<std::size_t>(x.cols()) != in_ ||
      (lap_ != nullptr && static_cast<std::size_t>(x.rows()) != lap_->size())) {
    throw Error(ErrorCode::shape_mismatch, "graph conv input is " + shape_str(x));
  }
  Var out = tape.cheb_conv(input, tape.parameter(weights_), lap_, order_);
  if (bias_) out = tape.add_row_bias(out, tape.parameter(*bias_));
  return out;
}

Matrix GraphConvLayer::forward(const Matrix& input) {
  Tape tape(false);
  return tape.value(forward(tape, tape.constant(input)));
}

void sgd_step(std::span<Parameter* const> params, double eta) {
  for (Parameter* p : params) {
    p->value() -= eta * p->grad();
    p->zero_grad();
  }
}

}  // namespace opflow::nn
