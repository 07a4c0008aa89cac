#include "hda/autodiff.hpp"

#include <cmath>
#include <string>

#include "hda/errors.hpp"

namespace hda::ad {

namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

Tape& same_tape(Var a, Var b) {
  if (!a.valid() || !b.valid()) throw ConfigError("autodiff: operation on an unbound Var");
  if (a.tape() != b.tape()) throw ConfigError("autodiff: operands live on different tapes");
  return *a.tape();
}

Tape& tape_of(Var a) {
  if (!a.valid()) throw ConfigError("autodiff: operation on an unbound Var");
  return *a.tape();
}

Node unary(Op op, Var a, Matrix value) {
  Node n;
  n.op = op;
  n.lhs = a.index();
  n.rhs = a.index();
  n.value = std::move(value);
  n.requires_grad = a.tape()->node(a.index()).requires_grad;
  return n;
}

Node binary(Op op, Var a, Var b, Matrix value) {
  Node n;
  n.op = op;
  n.lhs = a.index();
  n.rhs = b.index();
  n.value = std::move(value);
  n.requires_grad =
      a.tape()->node(a.index()).requires_grad || b.tape()->node(b.index()).requires_grad;
  return n;
}

void accumulate(Matrix& into, const Matrix& delta) {
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += delta[i];
}

}  // namespace

const Matrix& Var::value() const { return tape_->nodes_[index_].value; }
const Matrix& Var::grad() const { return tape_->nodes_[index_].grad; }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw DimensionError("Var::scalar on a " + shape(v) + " node");
  return v[0];
}

Var Tape::push(Node node) {
  node.grad = Matrix(node.value.rows(), node.value.cols());
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Matrix value) {
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(value);
  n.requires_grad = true;
  const std::size_t index = nodes_.size();
  n.lhs = n.rhs = index;
  return push(std::move(n));
}

Var Tape::constant(Matrix value) {
  Node n;
  n.op = Op::Constant;
  n.value = std::move(value);
  const std::size_t index = nodes_.size();
  n.lhs = n.rhs = index;
  return push(std::move(n));
}

void Tape::zero_grad() {
  for (auto& n : nodes_)
    for (double& g : n.grad.values()) g = 0.0;
}

void Tape::backward(Var root) {
  if (root.tape() != this) throw ConfigError("backward: root belongs to another tape");
  if (root.value().size() != 1) throw DimensionError("backward: root must be scalar, got " + shape(root.value()));
  nodes_[root.index()].grad[0] += 1.0;
  visits_ = 0;
  for (std::size_t i = root.index() + 1; i-- > 0;) {
    ++visits_;
    Node& n = nodes_[i];
    if (!n.requires_grad) continue;
    const Matrix& g = n.grad;
    switch (n.op) {
      case Op::Leaf:
      case Op::Constant:
        break;
      case Op::Add:
        accumulate(nodes_[n.lhs].grad, g);
        accumulate(nodes_[n.rhs].grad, g);
        break;
      case Op::Sub: {
        accumulate(nodes_[n.lhs].grad, g);
        Matrix& gb = nodes_[n.rhs].grad;
        for (std::size_t k = 0; k < gb.size(); ++k) gb[k] -= g[k];
        break;
      }
      case Op::Scale: {
        Matrix& ga = nodes_[n.lhs].grad;
        for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += n.scalar_arg * g[k];
        break;
      }
      case Op::Mul: {
        const Matrix& a = nodes_[n.lhs].value;
        const Matrix& b = nodes_[n.rhs].value;
        Matrix& ga = nodes_[n.lhs].grad;
        Matrix& gb = nodes_[n.rhs].grad;
        for (std::size_t k = 0; k < g.size(); ++k) {
          const std::size_t ia = a.size() == 1 ? 0 : k;
          const std::size_t ib = b.size() == 1 ? 0 : k;
          ga[ia] += g[k] * b[ib];
          gb[ib] += g[k] * a[ia];
        }
        break;
      }
      case Op::Div: {
        const Matrix& a = nodes_[n.lhs].value;
        const double b = nodes_[n.rhs].value[0];
        Matrix& ga = nodes_[n.lhs].grad;
        double gb = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k) {
          ga[k] += g[k] / b;
          gb -= g[k] * a[k];
        }
        nodes_[n.rhs].grad[0] += gb / (b * b);
        break;
      }
      case Op::MatVec: {
        const Matrix& m = nodes_[n.lhs].value;
        const Matrix& v = nodes_[n.rhs].value;
        Matrix& gm = nodes_[n.lhs].grad;
        Matrix& gv = nodes_[n.rhs].grad;
        const bool want_m = nodes_[n.lhs].requires_grad;
        const bool want_v = nodes_[n.rhs].requires_grad;
        for (std::size_t r = 0; r < m.rows(); ++r) {
          const double gr = g[r];
          for (std::size_t c = 0; c < m.cols(); ++c) {
            if (want_m) gm(r, c) += gr * v[c];
            if (want_v) gv[c] += m(r, c) * gr;
          }
        }
        break;
      }
      case Op::MatMul: {
        const Matrix& a = nodes_[n.lhs].value;
        const Matrix& b = nodes_[n.rhs].value;
        if (nodes_[n.lhs].requires_grad) accumulate(nodes_[n.lhs].grad, matmul(g, b.transposed()));
        if (nodes_[n.rhs].requires_grad) accumulate(nodes_[n.rhs].grad, matmul(a.transposed(), g));
        break;
      }
      case Op::Tanh: {
        Matrix& ga = nodes_[n.lhs].grad;
        for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * (1.0 - n.value[k] * n.value[k]);
        break;
      }
      case Op::Relu: {
        const Matrix& a = nodes_[n.lhs].value;
        Matrix& ga = nodes_[n.lhs].grad;
        for (std::size_t k = 0; k < g.size(); ++k)
          if (a[k] > 0.0) ga[k] += g[k];
        break;
      }
      case Op::Sum: {
        Matrix& ga = nodes_[n.lhs].grad;
        for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += g[0];
        break;
      }
      case Op::SquaredNorm: {
        const Matrix& a = nodes_[n.lhs].value;
        Matrix& ga = nodes_[n.lhs].grad;
        for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += 2.0 * a[k] * g[0];
        break;
      }
      case Op::Dot: {
        const Matrix& a = nodes_[n.lhs].value;
        const Matrix& b = nodes_[n.rhs].value;
        Matrix& ga = nodes_[n.lhs].grad;
        Matrix& gb = nodes_[n.rhs].grad;
        for (std::size_t k = 0; k < a.size(); ++k) {
          ga[k] += g[0] * b[k];
          gb[k] += g[0] * a[k];
        }
        break;
      }
      case Op::NormEps: {
        const Matrix& a = nodes_[n.lhs].value;
        Matrix& ga = nodes_[n.lhs].grad;
        const double norm = n.value[0];
        for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += g[0] * a[k] / norm;
        break;
      }
      case Op::Slice: {
        Matrix& ga = nodes_[n.lhs].grad;
        for (std::size_t k = 0; k < g.size(); ++k) ga[n.offset + k] += g[k];
        break;
      }
    }
  }
}

Var operator+(Var a, Var b) {
  Tape& t = same_tape(a, b);
  if (!a.value().same_shape(b.value())) {
    throw DimensionError("add: " + shape(a.value()) + " vs " + shape(b.value()));
  }
  Matrix v(a.rows(), a.cols(), hda::add(a.value().values(), b.value().values()));
  return t.push(binary(Op::Add, a, b, std::move(v)));
}

Var operator-(Var a, Var b) {
  Tape& t = same_tape(a, b);
  if (!a.value().same_shape(b.value())) {
    throw DimensionError("subtract: " + shape(a.value()) + " vs " + shape(b.value()));
  }
  Matrix v(a.rows(), a.cols(), hda::subtract(a.value().values(), b.value().values()));
  return t.push(binary(Op::Sub, a, b, std::move(v)));
}

Var operator-(double a, Var b) {
  Tape& t = tape_of(b);
  return t.constant(Matrix(b.rows(), b.cols(), a)) - b;
}

Var operator*(double s, Var a) {
  Tape& t = tape_of(a);
  Node n = unary(Op::Scale, a, Matrix(a.rows(), a.cols(), hda::scaled(a.value().values(), s)));
  n.scalar_arg = s;
  return t.push(std::move(n));
}

Var operator*(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Matrix& x = a.value();
  const Matrix& y = b.value();
  if (!x.same_shape(y) && x.size() != 1 && y.size() != 1) {
    throw DimensionError("mul: " + shape(x) + " vs " + shape(y));
  }
  const Matrix& big = x.size() >= y.size() ? x : y;
  Matrix v(big.rows(), big.cols());
  for (std::size_t k = 0; k < v.size(); ++k) {
    v[k] = x[x.size() == 1 ? 0 : k] * y[y.size() == 1 ? 0 : k];
  }
  return t.push(binary(Op::Mul, a, b, std::move(v)));
}

Var operator/(Var a, Var b) {
  Tape& t = same_tape(a, b);
  if (b.value().size() != 1) throw DimensionError("div: divisor must be 1x1, got " + shape(b.value()));
  const double d = b.value()[0];
  Matrix v(a.rows(), a.cols());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = a.value()[k] / d;
  return t.push(binary(Op::Div, a, b, std::move(v)));
}

Var matvec(Var m, Var v) {
  Tape& t = same_tape(m, v);
  if (v.cols() != 1 || m.cols() != v.rows()) {
    throw DimensionError("matvec: " + shape(m.value()) + " times " + shape(v.value()));
  }
  Matrix out = Matrix::column(hda::matvec(m.value(), v.value().values()));
  return t.push(binary(Op::MatVec, m, v, std::move(out)));
}

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + shape(a.value()) + " times " + shape(b.value()));
  }
  return t.push(binary(Op::MatMul, a, b, hda::matmul(a.value(), b.value())));
}

Var tanh(Var a) {
  Tape& t = tape_of(a);
  Matrix v(a.rows(), a.cols());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = std::tanh(a.value()[k]);
  return t.push(unary(Op::Tanh, a, std::move(v)));
}

Var relu(Var a) {
  Tape& t = tape_of(a);
  Matrix v(a.rows(), a.cols());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = a.value()[k] > 0.0 ? a.value()[k] : 0.0;
  return t.push(unary(Op::Relu, a, std::move(v)));
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  double acc = 0.0;
  for (double x : a.value().values()) acc += x;
  return t.push(unary(Op::Sum, a, Matrix::scalar(acc)));
}

Var squared_norm(Var a) {
  Tape& t = tape_of(a);
  return t.push(unary(Op::SquaredNorm, a, Matrix::scalar(hda::squared_norm(a.value().values()))));
}

Var dot(Var a, Var b) {
  Tape& t = same_tape(a, b);
  if (!a.value().same_shape(b.value())) {
    throw DimensionError("dot: " + shape(a.value()) + " vs " + shape(b.value()));
  }
  return t.push(binary(Op::Dot, a, b, Matrix::scalar(hda::dot(a.value().values(), b.value().values()))));
}

Var norm_eps(Var a, double eps) {
  Tape& t = tape_of(a);
  if (!(eps > 0.0)) throw ConfigError("norm_eps: epsilon must be positive");
  const double norm = std::sqrt(hda::squared_norm(a.value().values()) + eps * eps);
  Node n = unary(Op::NormEps, a, Matrix::scalar(norm));
  n.scalar_arg = eps;
  return t.push(std::move(n));
}

Var slice(Var a, std::size_t offset, std::size_t rows, std::size_t cols) {
  Tape& t = tape_of(a);
  const std::size_t count = rows * cols;
  if (offset + count > a.value().size()) {
    throw DimensionError("slice: range [" + std::to_string(offset) + ", " +
                         std::to_string(offset + count) + ") exceeds " + shape(a.value()));
  }
  const auto src = a.value().values().subspan(offset, count);
  Node n = unary(Op::Slice, a, Matrix(rows, cols, std::vector<double>(src.begin(), src.end())));
  n.offset = offset;
  return t.push(std::move(n));
}

}  // namespace hda::ad
