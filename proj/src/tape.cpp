#include "dumn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dumn {

namespace {

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                              b.shape_string());
}

void require_same(const char* op, const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) shape_error(op, a, b);
}

Tape& tape_of(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) throw std::invalid_argument("vars from different tapes");
  return *a.tape;
}

}  // namespace

const Matrix& Var::value() const { return tape->value(*this); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw std::invalid_argument("Var::scalar on " + v.shape_string());
  return v[0];
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Matrix m) {
  Node n;
  n.own = std::move(m);
  return push(std::move(n));
}

Var Tape::constant_ref(const Matrix& m) {
  Node n;
  n.ext = &m;
  return push(std::move(n));
}

Var Tape::input(Matrix m) {
  Node n;
  n.own = std::move(m);
  n.needs_grad = true;
  return push(std::move(n));
}

ParamStore& Tape::store() {
  if (store_ == nullptr) throw std::logic_error("Tape has no ParamStore");
  return *store_;
}

Var Tape::param(ParamId id) {
  ParamStore& s = store();
  if (param_nodes_.size() < s.size()) param_nodes_.resize(s.size(), 0);
  if (param_nodes_[id.index] != 0) return Var{this, param_nodes_[id.index] - 1};
  Node n;
  n.ext = &s[id].value;
  n.needs_grad = true;
  n.param = id;
  Var v = push(std::move(n));
  param_nodes_[id.index] = v.id + 1;
  return v;
}

Var Tape::gather_rows(ParamId table, std::span<const int> ids) {
  const Parameter& p = store()[table];
  const std::size_t cols = p.value.cols();
  Matrix out(ids.size(), cols);
  std::vector<int> kept(ids.begin(), ids.end());
  for (std::size_t t = 0; t < ids.size(); ++t) {
    const int id = ids[t];
    if (id < 0 || static_cast<std::size_t>(id) >= p.value.rows()) {
      throw std::invalid_argument("gather_rows: id " + std::to_string(id) + " out of range for " +
                                  p.name + " " + p.value.shape_string());
    }
    if (id == 0 && p.frozen_row0) continue;
    std::copy(p.value.row(id).begin(), p.value.row(id).end(), out.row(t).begin());
  }
  Node n;
  n.own = std::move(out);
  n.needs_grad = true;
  n.back = [table, kept = std::move(kept)](Tape& tape, Var, const Matrix& g) {
    const bool frozen = tape.store()[table].frozen_row0;
    ParamGrad& slot = (*tape.sink_)[table];
    for (std::size_t t = 0; t < kept.size(); ++t) {
      if (kept[t] == 0 && frozen) continue;
      slot.add_row(static_cast<std::size_t>(kept[t]), g.row(t));
    }
  };
  return push(std::move(n));
}

Var Tape::record(Matrix value, std::span<const Var> parents, Backward back) {
  Node n;
  n.own = std::move(value);
  for (Var p : parents) {
    if (p.tape != this) throw std::invalid_argument("Tape::record: parent from another tape");
    n.needs_grad = n.needs_grad || nodes_[p.id].needs_grad;
  }
  if (n.needs_grad) n.back = std::move(back);
  return push(std::move(n));
}

const Matrix& Tape::value(Var v) const {
  const Node& n = nodes_[v.id];
  return n.ext != nullptr ? *n.ext : n.own;
}

Matrix& Tape::grad_slot(Var v) {
  Node& n = nodes_[v.id];
  if (n.grad.empty()) {
    const Matrix& val = value(v);
    n.grad = Matrix(val.rows(), val.cols());
  }
  return n.grad;
}

void Tape::accumulate(Var v, const Matrix& g) {
  if (!nodes_[v.id].needs_grad) return;
  Matrix& slot = grad_slot(v);
  require_same("accumulate", slot, g);
  axpy(1.0, g.values(), slot.values());
}

void Tape::backward(Var loss, GradBuffer& sink, double seed) {
  if (loss.tape != this) throw std::invalid_argument("backward: loss from another tape");
  if (value(loss).size() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got " + value(loss).shape_string());
  }
  for (auto& n : nodes_) n.grad = Matrix();
  if (!nodes_[loss.id].needs_grad) return;
  grad_slot(loss)[0] = seed;
  sink_ = &sink;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty()) continue;
    if (n.param.valid()) {
      sink[n.param].add_dense(n.grad);
    } else if (n.back) {
      n.back(*this, Var{this, i}, n.grad);
    }
  }
  sink_ = nullptr;
}

void Tape::clear() {
  nodes_.clear();
  param_nodes_.clear();
}

// ---------------------------------------------------------------------------

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  return t.record(dumn::matmul(a.value(), b.value()), {a, b},
                  [a, b](Tape& tape, Var, const Matrix& g) {
                    if (tape.needs_grad(a)) tape.accumulate(a, matmul_nt(g, b.value()));
                    if (tape.needs_grad(b)) tape.accumulate(b, matmul_tn(a.value(), g));
                  });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = tape_of(a, b);
  return t.record(dumn::matmul_nt(a.value(), b.value()), {a, b},
                  [a, b](Tape& tape, Var, const Matrix& g) {
                    if (tape.needs_grad(a)) tape.accumulate(a, dumn::matmul(g, b.value()));
                    if (tape.needs_grad(b)) tape.accumulate(b, matmul_tn(g, a.value()));
                  });
}

Var transpose(Var a) {
  return a.tape->record(dumn::transpose(a.value()), {a}, [a](Tape& tape, Var, const Matrix& g) {
    tape.accumulate(a, dumn::transpose(g));
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.same_shape(bv)) {
    Matrix out = av;
    add_into(out, bv);
    return t.record(std::move(out), {a, b}, [a, b](Tape& tape, Var, const Matrix& g) {
      tape.accumulate(a, g);
      tape.accumulate(b, g);
    });
  }
  if (bv.rows() != 1 || bv.cols() != av.cols()) shape_error("add", av, bv);
  Matrix out = av;
  for (std::size_t i = 0; i < out.rows(); ++i) axpy(1.0, bv.values(), out.row(i));
  return t.record(std::move(out), {a, b}, [a, b](Tape& tape, Var, const Matrix& g) {
    tape.accumulate(a, g);
    if (tape.needs_grad(b)) {
      Matrix& slot = tape.grad_slot(b);
      for (std::size_t i = 0; i < g.rows(); ++i) axpy(1.0, g.row(i), slot.values());
    }
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same("sub", a.value(), b.value());
  Matrix out = a.value();
  axpy(-1.0, b.value().values(), out.values());
  return t.record(std::move(out), {a, b}, [a, b](Tape& tape, Var, const Matrix& g) {
    tape.accumulate(a, g);
    if (tape.needs_grad(b)) axpy(-1.0, g.values(), tape.grad_slot(b).values());
  });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same("mul", a.value(), b.value());
  Matrix out = a.value();
  const Matrix& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return t.record(std::move(out), {a, b}, [a, b](Tape& tape, Var, const Matrix& g) {
    if (tape.needs_grad(a)) {
      Matrix& slot = tape.grad_slot(a);
      const Matrix& bv = b.value();
      for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i] * bv[i];
    }
    if (tape.needs_grad(b)) {
      Matrix& slot = tape.grad_slot(b);
      const Matrix& av = a.value();
      for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double s) {
  Matrix out = a.value();
  for (double& v : out.values()) v *= s;
  return a.tape->record(std::move(out), {a}, [a, s](Tape& tape, Var, const Matrix& g) {
    axpy(s, g.values(), tape.grad_slot(a).values());
  });
}

Var scale_by(Var s, Var x) {
  Tape& t = tape_of(s, x);
  if (s.value().size() != 1) shape_error("scale_by", s.value(), x.value());
  const double sv = s.value()[0];
  Matrix out = x.value();
  for (double& v : out.values()) v *= sv;
  return t.record(std::move(out), {s, x}, [s, x](Tape& tape, Var, const Matrix& g) {
    if (tape.needs_grad(s)) tape.grad_slot(s)[0] += dumn::dot(g.values(), x.value().values());
    if (tape.needs_grad(x)) axpy(s.value()[0], g.values(), tape.grad_slot(x).values());
  });
}

Var divide(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same("divide", a.value(), b.value());
  Matrix out = a.value();
  const Matrix& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= bv[i];
  return t.record(std::move(out), {a, b}, [a, b](Tape& tape, Var, const Matrix& g) {
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    if (tape.needs_grad(a)) {
      Matrix& slot = tape.grad_slot(a);
      for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i] / bv[i];
    }
    if (tape.needs_grad(b)) {
      Matrix& slot = tape.grad_slot(b);
      for (std::size_t i = 0; i < g.size(); ++i) slot[i] -= g[i] * av[i] / (bv[i] * bv[i]);
    }
  });
}

Var affine(Var x, Var w, Var bias) { return add(matmul(x, w), bias); }

Var relu(Var a) {
  Matrix out = a.value();
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return a.tape->record(std::move(out), {a}, [a](Tape& tape, Var, const Matrix& g) {
    Matrix& slot = tape.grad_slot(a);
    const Matrix& av = a.value();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (av[i] > 0.0) slot[i] += g[i];
  });
}

Var sigmoid(Var a) {
  Matrix out = a.value();
  for (double& v : out.values()) v = 1.0 / (1.0 + std::exp(-v));
  return a.tape->record(std::move(out), {a}, [a](Tape& tape, Var self, const Matrix& g) {
    Matrix& slot = tape.grad_slot(a);
    const Matrix& y = self.value();
    for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var tanh(Var a) {
  Matrix out = a.value();
  for (double& v : out.values()) v = std::tanh(v);
  return a.tape->record(std::move(out), {a}, [a](Tape& tape, Var self, const Matrix& g) {
    Matrix& slot = tape.grad_slot(a);
    const Matrix& y = self.value();
    for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var softmax_rows(Var a) {
  return a.tape->record(dumn::softmax_rows(a.value()), {a},
                        [a](Tape& tape, Var self, const Matrix& g) {
                          Matrix& slot = tape.grad_slot(a);
                          const Matrix& y = self.value();
                          for (std::size_t i = 0; i < y.rows(); ++i) {
                            const double s = dumn::dot(g.row(i), y.row(i));
                            auto yr = y.row(i);
                            auto gr = g.row(i);
                            auto out = slot.row(i);
                            for (std::size_t j = 0; j < yr.size(); ++j)
                              out[j] += yr[j] * (gr[j] - s);
                          }
                        });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  Tape& t = *parts[0].tape;
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  for (Var p : parts) {
    if (p.tape != &t) throw std::invalid_argument("concat_cols: vars from different tapes");
    if (p.rows() != rows) shape_error("concat_cols", parts[0].value(), p.value());
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::size_t off = 0;
  bool needs = false;
  for (Var p : parts) {
    const Matrix& v = p.value();
    for (std::size_t i = 0; i < rows; ++i)
      std::copy(v.row(i).begin(), v.row(i).end(), out.row(i).begin() + off);
    off += v.cols();
    needs = needs || t.needs_grad(p);
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  return t.record(std::move(out), parts, [saved = std::move(saved)](Tape& tape, Var, const Matrix& g) {
    std::size_t off = 0;
    for (Var p : saved) {
      const std::size_t c = p.cols();
      if (tape.needs_grad(p)) {
        Matrix& slot = tape.grad_slot(p);
        for (std::size_t i = 0; i < g.rows(); ++i) axpy(1.0, g.row(i).subspan(off, c), slot.row(i));
      }
      off += c;
    }
  });
}

Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Matrix& av = a.value();
  if (begin > end || end > av.cols()) {
    throw std::invalid_argument("slice_cols: [" + std::to_string(begin) + "," + std::to_string(end) +
                                ") out of range for " + av.shape_string());
  }
  Matrix out(av.rows(), end - begin);
  for (std::size_t i = 0; i < av.rows(); ++i)
    std::copy(av.row(i).begin() + begin, av.row(i).begin() + end, out.row(i).begin());
  return a.tape->record(std::move(out), {a}, [a, begin](Tape& tape, Var, const Matrix& g) {
    Matrix& slot = tape.grad_slot(a);
    for (std::size_t i = 0; i < g.rows(); ++i)
      axpy(1.0, g.row(i), slot.row(i).subspan(begin, g.cols()));
  });
}

Var repeat_rows(Var row, std::size_t n) {
  const Matrix& rv = row.value();
  if (rv.rows() != 1) throw std::invalid_argument("repeat_rows: expects 1xk, got " + rv.shape_string());
  Matrix out(n, rv.cols());
  for (std::size_t i = 0; i < n; ++i) std::copy(rv.values().begin(), rv.values().end(), out.row(i).begin());
  return row.tape->record(std::move(out), {row}, [row](Tape& tape, Var, const Matrix& g) {
    Matrix& slot = tape.grad_slot(row);
    for (std::size_t i = 0; i < g.rows(); ++i) axpy(1.0, g.row(i), slot.values());
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return a.tape->record(Matrix(1, 1, s), {a}, [a](Tape& tape, Var, const Matrix& g) {
    Matrix& slot = tape.grad_slot(a);
    for (double& v : slot.values()) v += g[0];
  });
}

Var dot(Var a, Var b) {
  if (a.rows() != 1 || b.rows() != 1) shape_error("dot", a.value(), b.value());
  return matmul_nt(a, b);
}

Var cosine_rows(Var key, Var rows) {
  Tape& t = tape_of(key, rows);
  const Matrix& k = key.value();
  const Matrix& m = rows.value();
  if (k.rows() != 1 || k.cols() != m.cols()) shape_error("cosine_rows", k, m);
  const double nk = norm(k.values());
  std::vector<double> nm(m.rows());
  Matrix out(1, m.rows());
  for (std::size_t j = 0; j < m.rows(); ++j) {
    nm[j] = norm(m.row(j));
    if (nk < kDegenerateNorm || nm[j] < kDegenerateNorm) continue;
    out[j] = dumn::dot(k.values(), m.row(j)) / (nk * nm[j]);
  }
  return t.record(std::move(out), {key, rows},
                  [key, rows, nk, nm = std::move(nm)](Tape& tape, Var self, const Matrix& g) {
                    if (nk < kDegenerateNorm) return;
                    const Matrix& k = key.value();
                    const Matrix& m = rows.value();
                    const Matrix& c = self.value();
                    const bool gk = tape.needs_grad(key);
                    const bool gm = tape.needs_grad(rows);
                    for (std::size_t j = 0; j < m.rows(); ++j) {
                      if (nm[j] < kDegenerateNorm || g[j] == 0.0) continue;
                      const double inv = 1.0 / (nk * nm[j]);
                      if (gk) {
                        auto slot = tape.grad_slot(key).values();
                        for (std::size_t i = 0; i < k.cols(); ++i)
                          slot[i] += g[j] * (m(j, i) * inv - c[j] * k[i] / (nk * nk));
                      }
                      if (gm) {
                        auto slot = tape.grad_slot(rows).row(j);
                        for (std::size_t i = 0; i < k.cols(); ++i)
                          slot[i] += g[j] * (k[i] * inv - c[j] * m(j, i) / (nm[j] * nm[j]));
                      }
                    }
                  });
}

Var cosine(Var a, Var b) {
  if (a.rows() != 1 || b.rows() != 1) shape_error("cosine", a.value(), b.value());
  return cosine_rows(a, b);
}

Var binary_cross_entropy(Var p, double y, double eps) {
  if (p.value().size() != 1) throw std::invalid_argument("binary_cross_entropy: expects 1x1");
  const double raw = p.value()[0];
  const double pc = std::clamp(raw, eps, 1.0 - eps);
  const double loss = -(y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
  return p.tape->record(Matrix(1, 1, loss), {p}, [p, y, eps](Tape& tape, Var, const Matrix& g) {
    const double raw = p.value()[0];
    if (raw < eps || raw > 1.0 - eps) return;
    tape.grad_slot(p)[0] += g[0] * (-y / raw + (1.0 - y) / (1.0 - raw));
  });
}

}  // namespace dumn
