#pragma once

// Reverse-mode automatic differentiation over dense row-batched matrices.
//
// Every value on the tape is an Eigen matrix whose rows index samples in a
// mini-batch and whose columns index features. A Tape records the forward
// computation; Tape::backward() replays it in reverse and accumulates
// gradients into the Parameter objects that were read.

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace ugss::ad {

using Matrix = Eigen::MatrixXd;

/// A trainable tensor.
///
/// `mask`, when non-empty, is a same-shape 0/1 matrix applied multiplicatively
/// every time the parameter is read, so masked entries have a structurally
/// zero gradient (used for zero-diagonal and diagonal-only weight matrices).
struct Parameter {
  std::string name;
  Matrix value;
  Matrix mask;
  // Gradient accumulator. Not part of the parameter's logical value, so it
  // can be written through a const reference during the backward pass.
  mutable Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v, Matrix m = {})
      : name(std::move(n)), value(std::move(v)), mask(std::move(m)) {
    grad = Matrix::Zero(value.rows(), value.cols());
    apply_mask();
  }

  void zero_grad() const { grad.setZero(value.rows(), value.cols()); }
  void apply_mask() {
    if (mask.size() != 0) value = value.cwiseProduct(mask);
  }
  Matrix effective() const {
    return mask.size() != 0 ? Matrix(value.cwiseProduct(mask)) : value;
  }
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, int self, const Matrix& grad)>;

  /// A tape constructed with record=false evaluates values only; backward()
  /// is then an error. Used for inference.
  explicit Tape(bool record = true) : record_(record) { nodes_.reserve(4096); }

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var constant(Matrix value);
  /// Reads a parameter. Repeated reads on one tape share a single node.
  Var parameter(const Parameter& p);

  /// Seeds d(loss)/d(loss) = 1 and propagates to every parameter read.
  void backward(const Var& loss);

  const Matrix& value(int id) const { return nodes_[id].value; }
  /// Gradient of the last backward() w.r.t. a node (zero if unreached).
  Matrix gradient(const Var& v) const;
  std::size_t size() const { return nodes_.size(); }

  // Op-construction interface.
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  Var push(Matrix value, bool requires_grad, Backward backward);
  void accumulate(int id, const Matrix& g);
  template <typename Expr>
  void accumulate_expr(int id, const Expr& g) {
    auto& node = nodes_[id];
    if (!node.requires_grad) return;
    if (node.grad.size() == 0) {
      node.grad = g;
    } else {
      node.grad += g;
    }
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Backward backward;
  };

  bool record_;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> parameters_;
};

// ---- operations -----------------------------------------------------------

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
/// a + r with r a 1×n row broadcast over the rows of a.
Var add_row(const Var& a, const Var& r);
/// a ⊙ r with r a 1×n row broadcast over the rows of a.
Var mul_row(const Var& a, const Var& r);
/// a ⊙ c with c an m×1 column broadcast over the columns of a.
Var mul_col(const Var& a, const Var& c);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
/// 1 - a
Var one_minus(const Var& a);
/// The (i, j) entry of a, as a 1×1 node.
Var element(const Var& a, Eigen::Index i, Eigen::Index j);
/// a · s with s a 1×1 node.
Var scale_by(const Var& a, const Var& s);
/// a + s with s a 1×1 node.
Var shift_by(const Var& a, const Var& s);

Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var relu(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var abs(const Var& a);
Var square(const Var& a);
Var pow(const Var& a, double exponent);
Var clamp(const Var& a, double lo, double hi);
/// exp(-max(0, a)), the negative exponential rectifier.
Var neg_exp_relu(const Var& a);

Var concat_cols(std::span<const Var> parts);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
/// Elementwise maximum across same-shape inputs; ties route the gradient to
/// the first maximiser.
Var max_elementwise(std::span<const Var> parts);
/// Per-row standardisation: (a - mean_row) / sqrt(var_row + eps).
Var layer_norm(const Var& a, double eps = 1e-5);

/// Sum of all entries, as a 1×1 matrix.
Var sum(const Var& a);
/// Row sums, as an m×1 column.
Var row_sum(const Var& a);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }

}  // namespace ugss::ad
