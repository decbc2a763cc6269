#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "dumn/matrix.hpp"
#include "dumn/params.hpp"

namespace dumn {

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double scalar() const;
};

/// Records a forward pass and replays it in reverse to produce gradients.
/// Single-threaded: one forward/backward per tape at a time.
class Tape {
 public:
  using Backward = std::function<void(Tape&, Var self, const Matrix& upstream)>;

  explicit Tape(ParamStore* store = nullptr) : store_(store) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf with no gradient. The matrix is copied onto the tape.
  Var constant(Matrix m);
  /// Leaf that borrows `m`; `m` must outlive the tape.
  Var constant_ref(const Matrix& m);
  /// Leaf holding a non-parameter input that still receives a gradient (see input_grad).
  Var input(Matrix m);
  /// Parameter leaf. Repeated calls return the same node.
  Var param(ParamId id);
  /// Rows `ids` of a table parameter. Id 0 yields a zero row and never receives gradient
  /// when the table has a frozen pad row.
  Var gather_rows(ParamId table, std::span<const int> ids);

  /// Appends an op node. `parents` decide whether the node needs a gradient.
  Var record(Matrix value, std::span<const Var> parents, Backward back);
  Var record(Matrix value, std::initializer_list<Var> parents, Backward back) {
    return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                  std::move(back));
  }

  const Matrix& value(Var v) const;
  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }
  /// Gradient of an input/op node after backward (empty matrix if none reached it).
  const Matrix& input_grad(Var v) const { return nodes_[v.id].grad; }

  /// Adds `g` into the gradient of `v` if it needs one.
  void accumulate(Var v, const Matrix& g);
  /// Gradient slot of `v`, allocated on first use. Only call when needs_grad(v).
  Matrix& grad_slot(Var v);

  /// Reverse sweep from a scalar loss; parameter gradients are added into `sink`
  /// (scaled by `seed`).
  void backward(Var loss, GradBuffer& sink, double seed = 1.0);

  std::size_t size() const noexcept { return nodes_.size(); }
  ParamStore& store();
  void clear();

 private:
  struct Node {
    Matrix own;
    const Matrix* ext = nullptr;
    Matrix grad;
    bool needs_grad = false;
    ParamId param;
    Backward back;
  };

  Var push(Node node);

  ParamStore* store_ = nullptr;
  std::vector<Node> nodes_;
  std::vector<std::size_t> param_nodes_;  // ParamId.index -> node id + 1
  GradBuffer* sink_ = nullptr;
};

// Differentiable primitives. Shapes are checked; mismatches throw
// std::invalid_argument naming both shapes.
Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);  // a · bᵀ
Var transpose(Var a);
/// Elementwise sum; `b` may be a 1×n row broadcast over the rows of `a`.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
/// `s` is 1×1; returns s·x.
Var scale_by(Var s, Var x);
/// Elementwise a / b for equal shapes.
Var divide(Var a, Var b);
Var affine(Var x, Var w, Var bias);
Var relu(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var softmax_rows(Var a);
Var concat_cols(std::span<const Var> parts);
Var concat_cols(std::initializer_list<Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var repeat_rows(Var row, std::size_t n);
Var sum(Var a);
/// Row vectors → 1×1 inner product.
Var dot(Var a, Var b);
/// Cosine similarity of a 1×n key against each row of `rows` (m×n) → 1×m.
/// Rows or key with norm below kDegenerateNorm give 0 with zero gradient.
Var cosine_rows(Var key, Var rows);
Var cosine(Var a, Var b);
/// Binary cross-entropy of a 1×1 probability against label y, probability clamped to [eps, 1-eps].
Var binary_cross_entropy(Var p, double y, double eps);

}  // namespace dumn
