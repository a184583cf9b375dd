#include "ugss/autodiff.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace ugss::ad {

const Matrix& Var::value() const { return tape_->value(id_); }

Var Tape::push(Matrix value, bool requires_grad, Backward backward) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = record_ && requires_grad;
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::constant(Matrix value) { return push(std::move(value), false, {}); }

Var Tape::parameter(const Parameter& p) {
  const Parameter* param = &p;
  if (auto it = parameters_.find(param); it != parameters_.end()) return Var(this, it->second);
  const Var v = push(p.effective(), true, [param](Tape&, int, const Matrix& g) {
    if (param->grad.rows() != g.rows() || param->grad.cols() != g.cols()) {
      param->grad = Matrix::Zero(g.rows(), g.cols());
    }
    if (param->mask.size() != 0) {
      param->grad += g.cwiseProduct(param->mask);
    } else {
      param->grad += g;
    }
  });
  parameters_.emplace(param, v.id());
  return v;
}

void Tape::accumulate(int id, const Matrix& g) { accumulate_expr(id, g); }

void Tape::backward(const Var& loss) {
  if (!record_) throw std::logic_error("backward() on a non-recording tape");
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw std::invalid_argument("backward() requires a scalar (1x1) loss");
  }
  for (auto& n : nodes_) n.grad.resize(0, 0);
  nodes_[loss.id()].grad = Matrix::Ones(1, 1);
  for (int i = loss.id(); i >= 0; --i) {
    auto& node = nodes_[i];
    if (!node.requires_grad || node.grad.size() == 0 || !node.backward) continue;
    // The closure only accumulates into parents, never into node i itself.
    Matrix g = std::move(node.grad);
    node.backward(*this, i, g);
    nodes_[i].grad = std::move(g);
  }
}

Matrix Tape::gradient(const Var& v) const {
  const auto& node = nodes_[v.id()];
  if (node.grad.size() == 0) return Matrix::Zero(node.value.rows(), node.value.cols());
  return node.grad;
}

namespace {

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
  }
}

bool rg(const Var& v) { return v.tape()->requires_grad(v.id()); }

// Unary elementwise op whose derivative is a function of (input, output).
template <typename Fwd, typename Deriv>
Var unary(const Var& a, Fwd fwd, Deriv deriv) {
  Tape& t = *a.tape();
  const int ia = a.id();
  return t.push(fwd(a.value()), rg(a), [ia, deriv](Tape& tp, int self, const Matrix& g) {
    tp.accumulate_expr(ia, g.cwiseProduct(deriv(tp.value(ia), tp.value(self))));
  });
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: inner dimension mismatch (" + std::to_string(a.cols()) +
                                " vs " + std::to_string(b.rows()) + ")");
  }
  Tape& t = *a.tape();
  const int ia = a.id(), ib = b.id();
  Matrix out = a.value() * b.value();
  return t.push(std::move(out), rg(a) || rg(b), [ia, ib](Tape& tp, int, const Matrix& g) {
    if (tp.requires_grad(ia)) tp.accumulate_expr(ia, g * tp.value(ib).transpose());
    if (tp.requires_grad(ib)) tp.accumulate_expr(ib, tp.value(ia).transpose() * g);
  });
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  const int ia = a.id(), ib = b.id();
  return a.tape()->push(a.value() + b.value(), rg(a) || rg(b),
                        [ia, ib](Tape& tp, int, const Matrix& g) {
                          tp.accumulate_expr(ia, g);
                          tp.accumulate_expr(ib, g);
                        });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  const int ia = a.id(), ib = b.id();
  return a.tape()->push(a.value() - b.value(), rg(a) || rg(b),
                        [ia, ib](Tape& tp, int, const Matrix& g) {
                          tp.accumulate_expr(ia, g);
                          tp.accumulate_expr(ib, -g);
                        });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  const int ia = a.id(), ib = b.id();
  return a.tape()->push(a.value().cwiseProduct(b.value()), rg(a) || rg(b),
                        [ia, ib](Tape& tp, int, const Matrix& g) {
                          if (tp.requires_grad(ia)) tp.accumulate_expr(ia, g.cwiseProduct(tp.value(ib)));
                          if (tp.requires_grad(ib)) tp.accumulate_expr(ib, g.cwiseProduct(tp.value(ia)));
                        });
}

Var add_row(const Var& a, const Var& r) {
  if (r.rows() != 1 || r.cols() != a.cols()) throw std::invalid_argument("add_row: shape mismatch");
  const int ia = a.id(), ir = r.id();
  Matrix out = a.value().rowwise() + r.value().row(0);
  return a.tape()->push(std::move(out), rg(a) || rg(r), [ia, ir](Tape& tp, int, const Matrix& g) {
    tp.accumulate_expr(ia, g);
    if (tp.requires_grad(ir)) tp.accumulate_expr(ir, g.colwise().sum());
  });
}

Var mul_row(const Var& a, const Var& r) {
  if (r.rows() != 1 || r.cols() != a.cols()) throw std::invalid_argument("mul_row: shape mismatch");
  const int ia = a.id(), ir = r.id();
  Matrix out = a.value().array().rowwise() * r.value().row(0).array();
  return a.tape()->push(std::move(out), rg(a) || rg(r), [ia, ir](Tape& tp, int, const Matrix& g) {
    if (tp.requires_grad(ia)) {
      tp.accumulate_expr(ia, Matrix(g.array().rowwise() * tp.value(ir).row(0).array()));
    }
    if (tp.requires_grad(ir)) {
      tp.accumulate_expr(ir, g.cwiseProduct(tp.value(ia)).colwise().sum());
    }
  });
}

Var mul_col(const Var& a, const Var& c) {
  if (c.cols() != 1 || c.rows() != a.rows()) throw std::invalid_argument("mul_col: shape mismatch");
  const int ia = a.id(), ic = c.id();
  Matrix out = a.value().array().colwise() * c.value().col(0).array();
  return a.tape()->push(std::move(out), rg(a) || rg(c), [ia, ic](Tape& tp, int, const Matrix& g) {
    if (tp.requires_grad(ia)) {
      tp.accumulate_expr(ia, Matrix(g.array().colwise() * tp.value(ic).col(0).array()));
    }
    if (tp.requires_grad(ic)) {
      tp.accumulate_expr(ic, g.cwiseProduct(tp.value(ia)).rowwise().sum());
    }
  });
}

Var scale(const Var& a, double s) {
  const int ia = a.id();
  return a.tape()->push(a.value() * s, rg(a), [ia, s](Tape& tp, int, const Matrix& g) {
    tp.accumulate_expr(ia, g * s);
  });
}

Var add_scalar(const Var& a, double s) {
  const int ia = a.id();
  return a.tape()->push((a.value().array() + s).matrix(), rg(a),
                        [ia](Tape& tp, int, const Matrix& g) { tp.accumulate_expr(ia, g); });
}

Var one_minus(const Var& a) {
  const int ia = a.id();
  return a.tape()->push((1.0 - a.value().array()).matrix(), rg(a),
                        [ia](Tape& tp, int, const Matrix& g) { tp.accumulate_expr(ia, -g); });
}

Var element(const Var& a, Eigen::Index i, Eigen::Index j) {
  if (i < 0 || j < 0 || i >= a.rows() || j >= a.cols()) {
    throw std::invalid_argument("element: index out of range");
  }
  const int ia = a.id();
  Matrix out(1, 1);
  out(0, 0) = a.value()(i, j);
  return a.tape()->push(std::move(out), rg(a), [ia, i, j](Tape& tp, int, const Matrix& g) {
    const Matrix& av = tp.value(ia);
    Matrix full = Matrix::Zero(av.rows(), av.cols());
    full(i, j) = g(0, 0);
    tp.accumulate_expr(ia, full);
  });
}

Var scale_by(const Var& a, const Var& s) {
  if (s.rows() != 1 || s.cols() != 1) throw std::invalid_argument("scale_by: s must be 1x1");
  const int ia = a.id(), is = s.id();
  return a.tape()->push(a.value() * s.value()(0, 0), rg(a) || rg(s),
                        [ia, is](Tape& tp, int, const Matrix& g) {
                          if (tp.requires_grad(ia)) tp.accumulate_expr(ia, g * tp.value(is)(0, 0));
                          if (tp.requires_grad(is)) {
                            Matrix gs(1, 1);
                            gs(0, 0) = g.cwiseProduct(tp.value(ia)).sum();
                            tp.accumulate_expr(is, gs);
                          }
                        });
}

Var shift_by(const Var& a, const Var& s) {
  if (s.rows() != 1 || s.cols() != 1) throw std::invalid_argument("shift_by: s must be 1x1");
  const int ia = a.id(), is = s.id();
  return a.tape()->push((a.value().array() + s.value()(0, 0)).matrix(), rg(a) || rg(s),
                        [ia, is](Tape& tp, int, const Matrix& g) {
                          tp.accumulate_expr(ia, g);
                          if (tp.requires_grad(is)) {
                            Matrix gs(1, 1);
                            gs(0, 0) = g.sum();
                            tp.accumulate_expr(is, gs);
                          }
                        });
}

Var tanh(const Var& a) {
  return unary(
      a, [](const Matrix& x) { return Matrix(x.array().tanh()); },
      [](const Matrix&, const Matrix& y) { return Matrix(1.0 - y.array().square()); });
}

Var sigmoid(const Var& a) {
  return unary(
      a,
      [](const Matrix& x) {
        // Split by sign so exp() never overflows.
        return Matrix(x.unaryExpr([](double v) {
          if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
          const double e = std::exp(v);
          return e / (1.0 + e);
        }));
      },
      [](const Matrix&, const Matrix& y) { return Matrix(y.array() * (1.0 - y.array())); });
}

Var relu(const Var& a) {
  return unary(
      a, [](const Matrix& x) { return Matrix(x.cwiseMax(0.0)); },
      [](const Matrix& x, const Matrix&) {
        return Matrix((x.array() > 0.0).cast<double>());
      });
}

Var exp(const Var& a) {
  return unary(
      a, [](const Matrix& x) { return Matrix(x.array().exp()); },
      [](const Matrix&, const Matrix& y) { return y; });
}

Var log(const Var& a) {
  return unary(
      a, [](const Matrix& x) { return Matrix(x.array().log()); },
      [](const Matrix& x, const Matrix&) { return Matrix(x.array().inverse()); });
}

Var abs(const Var& a) {
  return unary(
      a, [](const Matrix& x) { return Matrix(x.array().abs()); },
      [](const Matrix& x, const Matrix&) {
        return Matrix(x.unaryExpr([](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }));
      });
}

Var square(const Var& a) {
  return unary(
      a, [](const Matrix& x) { return Matrix(x.array().square()); },
      [](const Matrix& x, const Matrix&) { return Matrix(2.0 * x.array()); });
}

Var pow(const Var& a, double exponent) {
  return unary(
      a, [exponent](const Matrix& x) { return Matrix(x.array().pow(exponent)); },
      [exponent](const Matrix& x, const Matrix&) {
        if (exponent == 0.0) return Matrix(Matrix::Zero(x.rows(), x.cols()));
        return Matrix(exponent * x.array().pow(exponent - 1.0));
      });
}

Var clamp(const Var& a, double lo, double hi) {
  return unary(
      a, [lo, hi](const Matrix& x) { return Matrix(x.cwiseMax(lo).cwiseMin(hi)); },
      [lo, hi](const Matrix& x, const Matrix&) {
        return Matrix(((x.array() >= lo) && (x.array() <= hi)).cast<double>());
      });
}

Var neg_exp_relu(const Var& a) {
  return unary(
      a, [](const Matrix& x) { return Matrix((-x.cwiseMax(0.0)).array().exp()); },
      [](const Matrix& x, const Matrix& y) {
        return Matrix(-(x.array() > 0.0).cast<double>() * y.array());
      });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  bool any = false;
  std::vector<int> ids;
  std::vector<Eigen::Index> widths;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
    cols += p.cols();
    any = any || rg(p);
    ids.push_back(p.id());
    widths.push_back(p.cols());
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return parts[0].tape()->push(std::move(out), any,
                               [ids, widths](Tape& tp, int, const Matrix& g) {
                                 Eigen::Index off = 0;
                                 for (std::size_t k = 0; k < ids.size(); ++k) {
                                   if (tp.requires_grad(ids[k])) {
                                     tp.accumulate_expr(ids[k], g.middleCols(off, widths[k]));
                                   }
                                   off += widths[k];
                                 }
                               });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw std::invalid_argument("slice_cols: out of range");
  }
  const int ia = a.id();
  return a.tape()->push(a.value().middleCols(start, count), rg(a),
                        [ia, start, count](Tape& tp, int, const Matrix& g) {
                          const Matrix& av = tp.value(ia);
                          Matrix full = Matrix::Zero(av.rows(), av.cols());
                          full.middleCols(start, count) = g;
                          tp.accumulate_expr(ia, full);
                        });
}

Var max_elementwise(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("max_elementwise: no inputs");
  for (const auto& p : parts) check_same_shape(parts[0], p, "max_elementwise");
  const Eigen::Index r = parts[0].rows(), c = parts[0].cols();
  Matrix out = parts[0].value();
  Eigen::MatrixXi arg = Eigen::MatrixXi::Zero(r, c);
  bool any = rg(parts[0]);
  std::vector<int> ids{parts[0].id()};
  for (std::size_t k = 1; k < parts.size(); ++k) {
    const Matrix& v = parts[k].value();
    for (Eigen::Index j = 0; j < c; ++j) {
      for (Eigen::Index i = 0; i < r; ++i) {
        if (v(i, j) > out(i, j)) {
          out(i, j) = v(i, j);
          arg(i, j) = static_cast<int>(k);
        }
      }
    }
    any = any || rg(parts[k]);
    ids.push_back(parts[k].id());
  }
  return parts[0].tape()->push(std::move(out), any, [ids, arg](Tape& tp, int, const Matrix& g) {
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!tp.requires_grad(ids[k])) continue;
      Matrix gk = (arg.array() == static_cast<int>(k)).cast<double>() * g.array();
      tp.accumulate_expr(ids[k], gk);
    }
  });
}

Var layer_norm(const Var& a, double eps) {
  const Matrix& x = a.value();
  const Eigen::Index n = x.cols();
  Eigen::VectorXd mean = x.rowwise().mean();
  Matrix centered = x.colwise() - mean;
  Eigen::VectorXd inv_std =
      ((centered.array().square().rowwise().sum() / static_cast<double>(n)) + eps).rsqrt();
  Matrix y = centered.array().colwise() * inv_std.array();
  const int ia = a.id();
  return a.tape()->push(y, rg(a), [ia, inv_std, n](Tape& tp, int self, const Matrix& g) {
    const Matrix& yv = tp.value(self);
    Eigen::VectorXd g_mean = g.rowwise().mean();
    Eigen::VectorXd gy_mean = g.cwiseProduct(yv).rowwise().mean();
    Matrix gx = g;
    gx.colwise() -= g_mean;
    gx -= (yv.array().colwise() * gy_mean.array()).matrix();
    gx = gx.array().colwise() * inv_std.array();
    tp.accumulate_expr(ia, gx);
  });
}

Var sum(const Var& a) {
  const int ia = a.id();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape()->push(std::move(out), rg(a), [ia](Tape& tp, int, const Matrix& g) {
    const Matrix& av = tp.value(ia);
    tp.accumulate_expr(ia, Matrix::Constant(av.rows(), av.cols(), g(0, 0)));
  });
}

Var row_sum(const Var& a) {
  const int ia = a.id();
  return a.tape()->push(a.value().rowwise().sum(), rg(a), [ia](Tape& tp, int, const Matrix& g) {
    const Matrix& av = tp.value(ia);
    tp.accumulate_expr(ia, Matrix(g.col(0).replicate(1, av.cols())));
  });
}

}  // namespace ugss::ad
