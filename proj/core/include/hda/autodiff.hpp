#pragma once

#include <cstddef>
#include <vector>

#include "hda/linalg.hpp"

namespace hda::ad {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  const Matrix& grad() const;
  /// Value of a 1x1 node.
  double scalar() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  std::size_t index() const { return index_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t index) : tape_(tape), index_(index) {}

  Tape* tape_ = nullptr;
  std::size_t index_ = 0;
};

enum class Op {
  Leaf,
  Constant,
  Add,
  Sub,
  Scale,
  Mul,
  Div,
  MatVec,
  MatMul,
  Tanh,
  Relu,
  Sum,
  SquaredNorm,
  Dot,
  NormEps,
  Slice,
};

struct Node {
  Op op = Op::Constant;
  std::size_t lhs = 0;
  std::size_t rhs = 0;
  Matrix value;
  Matrix grad;
  double scalar_arg = 0.0;
  std::size_t offset = 0;
  bool requires_grad = false;
};

/// Append-only record of a computation. Nodes are created in topological
/// order, so a backward sweep in decreasing index order is a valid reverse
/// pass. A tape is single-threaded.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input.
  Var variable(Matrix value);
  Var constant(Matrix value);

  /// Seeds d(root)/d(root) = 1 and accumulates gradients into every node that
  /// depends on a variable. `root` must be 1x1.
  void backward(Var root);
  void zero_grad();

  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t i) const { return nodes_[i]; }
  /// Number of nodes visited by the most recent backward pass.
  std::size_t last_backward_visits() const { return visits_; }

  Var push(Node node);

 private:
  friend class Var;
  std::vector<Node> nodes_;
  std::size_t visits_ = 0;
};

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator-(double a, Var b);
Var operator*(double s, Var a);
/// Elementwise product; either side may be 1x1 and is then broadcast.
Var operator*(Var a, Var b);
/// Division by a 1x1 node.
Var operator/(Var a, Var b);

Var matvec(Var m, Var v);
Var matmul(Var a, Var b);
Var tanh(Var a);
Var relu(Var a);
Var sum(Var a);
Var squared_norm(Var a);
Var dot(Var a, Var b);
/// sqrt(|a|^2 + eps^2); smooth at a = 0.
Var norm_eps(Var a, double eps);
/// Contiguous range of `a`'s storage reinterpreted as a rows x cols matrix.
Var slice(Var a, std::size_t offset, std::size_t rows, std::size_t cols);

}  // namespace hda::ad
