/**
 * Copyright 2026 The comix Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <comix/autodiff.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace comix::ad {

const Matrix& Var::value() const {
  if (!valid()) {
    throw std::logic_error("Var: handle is not bound to a live tape");
  }
  return tape_->nodes_[id_].value;
}

double Var::item() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) {
    throw ShapeError("item", shape_of(v), Shape{1, 1});
  }
  return v(0, 0);
}

bool Var::valid() const {
  return tape_ != nullptr && generation_ == tape_->generation_ && id_ < tape_->nodes_.size();
}

void Tape::check_owned(const Var& v, const char* where) const {
  if (v.tape_ != this || v.generation_ != generation_ || v.id_ >= nodes_.size()) {
    throw std::logic_error(std::string(where) +
                           ": value was not evaluated on this tape (stale or foreign handle)");
  }
}

Var Tape::variable(Matrix value, std::string name) {
  if (!value.allFinite()) {
    throw NonFiniteError("variable '" + name + "' holds non-finite values");
  }
  nodes_.push_back(Node{"leaf", std::move(name), std::move(value), {}, {}, {}, true});
  return Var(this, nodes_.size() - 1, generation_);
}

Var Tape::constant(Matrix value) {
  if (!value.allFinite()) {
    throw NonFiniteError("constant holds non-finite values");
  }
  nodes_.push_back(Node{"const", {}, std::move(value), {}, {}, {}, false});
  return Var(this, nodes_.size() - 1, generation_);
}

Var Tape::record(const char* op, Matrix value, std::vector<Var> parents, BackwardFn backward) {
  bool needs = false;
  std::vector<std::size_t> ids;
  ids.reserve(parents.size());
  for (const Var& p : parents) {
    check_owned(p, op);
    ids.push_back(p.id_);
    needs = needs || nodes_[p.id_].requires_grad;
  }
  if (!value.allFinite()) {
    std::ostringstream msg;
    msg << "non-finite value produced by '" << op << "' (node #" << nodes_.size() << ")";
    throw NonFiniteError(msg.str());
  }
  nodes_.push_back(Node{op, {}, std::move(value), {}, std::move(ids),
                        needs ? std::move(backward) : BackwardFn{}, needs});
  return Var(this, nodes_.size() - 1, generation_);
}

void Tape::accumulate(const Var& target, const Matrix& g) {
  Node& n = nodes_[target.id_];
  if (!n.requires_grad) return;
  if (g.rows() != n.value.rows() || g.cols() != n.value.cols()) {
    throw ShapeError("accumulate", shape_of(g), shape_of(n.value));
  }
  n.grad += g;
}

void Tape::backward(const Var& output, const Matrix& seed) {
  check_owned(output, "backward");
  const Node& out = nodes_[output.id_];
  if (seed.rows() != out.value.rows() || seed.cols() != out.value.cols()) {
    throw ShapeError("backward seed", shape_of(seed), shape_of(out.value));
  }
  for (Node& n : nodes_) {
    if (n.requires_grad) {
      n.grad.setZero(n.value.rows(), n.value.cols());
    } else {
      n.grad.resize(0, 0);
    }
  }
  has_grads_ = true;
  if (!out.requires_grad) return;

  std::vector<bool> reached(output.id_ + 1, false);
  nodes_[output.id_].grad = seed;
  reached[output.id_] = true;
  for (std::size_t i = output.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!reached[i] || !n.backward) continue;
    for (std::size_t p : n.parents) reached[p] = true;
    // The closure may grow no nodes, so references stay valid.
    n.backward(*this, n.grad);
  }
}

void Tape::backward(const Var& output) {
  check_owned(output, "backward");
  backward(output, Matrix::Ones(1, 1));
}

const Matrix& Tape::grad(const Var& v) const {
  check_owned(v, "grad");
  if (!has_grads_) {
    throw std::logic_error("grad: backward has not been run on this tape");
  }
  static const Matrix empty;
  const Node& n = nodes_[v.id_];
  return n.requires_grad ? n.grad : empty;
}

bool Tape::requires_grad(const Var& v) const {
  check_owned(v, "requires_grad");
  return nodes_[v.id_].requires_grad;
}

const Matrix& Tape::value(const Var& v) const {
  check_owned(v, "value");
  return nodes_[v.id_].value;
}

std::string Tape::describe(const Var& v) const {
  check_owned(v, "describe");
  const Node& n = nodes_[v.id_];
  std::ostringstream os;
  os << "#" << v.id_ << " " << n.op;
  if (!n.name.empty()) os << " '" << n.name << "'";
  os << " " << to_string(shape_of(n.value));
  return os.str();
}

void Tape::clear() {
  nodes_.clear();
  ++generation_;
  has_grads_ = false;
}

namespace {

Tape& tape_of(const Var& a) {
  if (!a.valid()) throw std::logic_error("operation on an unbound Var");
  return *a.tape();
}

Tape& tape_of(const Var& a, const Var& b) {
  Tape& t = tape_of(a);
  if (b.tape() != &t) throw std::logic_error("operands live on different tapes");
  return t;
}

void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) throw ShapeError(op, a.shape(), b.shape());
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  if (a.cols() != b.rows()) throw ShapeError("matmul", a.shape(), b.shape());
  Matrix out = a.value() * b.value();
  return t.record("matmul", std::move(out), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(a)) tp.accumulate(a, g * b.value().transpose());
    if (tp.requires_grad(b)) tp.accumulate(b, a.value().transpose() * g);
  });
}

Var transpose(const Var& a) {
  Tape& t = tape_of(a);
  Matrix out = a.value().transpose();
  return t.record("transpose", std::move(out), {a},
                  [a](Tape& tp, const Matrix& g) { tp.accumulate(a, g.transpose()); });
}

Var add(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  require_same_shape("add", a, b);
  Matrix out = a.value() + b.value();
  return t.record("add", std::move(out), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

Var sub(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  require_same_shape("sub", a, b);
  Matrix out = a.value() - b.value();
  return t.record("sub", std::move(out), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, -g);
  });
}

Var hadamard(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  require_same_shape("hadamard", a, b);
  Matrix out = a.value().cwiseProduct(b.value());
  return t.record("hadamard", std::move(out), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(a)) tp.accumulate(a, g.cwiseProduct(b.value()));
    if (tp.requires_grad(b)) tp.accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var scale(const Var& a, double s) {
  Tape& t = tape_of(a);
  Matrix out = s * a.value();
  return t.record("scale", std::move(out), {a},
                  [a, s](Tape& tp, const Matrix& g) { tp.accumulate(a, s * g); });
}

Var add_scalar(const Var& a, double s) {
  Tape& t = tape_of(a);
  Matrix out = a.value().array() + s;
  return t.record("add_scalar", std::move(out), {a},
                  [a](Tape& tp, const Matrix& g) { tp.accumulate(a, g); });
}

Var exp(const Var& a) {
  Tape& t = tape_of(a);
  Matrix out = a.value().array().exp();
  const std::size_t self = t.size();
  return t.record("exp", std::move(out), {a}, [a, self](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g.cwiseProduct(tp.value_of(self)));
  });
}

Var log(const Var& a) {
  Tape& t = tape_of(a);
  Matrix out = a.value().array().log();
  return t.record("log", std::move(out), {a}, [a](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g.cwiseQuotient(a.value()));
  });
}

Var tanh(const Var& a) {
  Tape& t = tape_of(a);
  Matrix out = a.value().array().tanh();
  const std::size_t self = t.size();
  return t.record("tanh", std::move(out), {a}, [a, self](Tape& tp, const Matrix& g) {
    const Matrix& y = tp.value_of(self);
    tp.accumulate(a, g.cwiseProduct((1.0 - y.array().square()).matrix()));
  });
}

Var relu(const Var& a) {
  Tape& t = tape_of(a);
  Matrix out = a.value().cwiseMax(0.0);
  return t.record("relu", std::move(out), {a}, [a](Tape& tp, const Matrix& g) {
    tp.accumulate(a, (a.value().array() > 0.0).select(g, 0.0));
  });
}

namespace {

Matrix softmax_rows_value(const Matrix& x) {
  Matrix y = x.colwise() - x.rowwise().maxCoeff();
  y = y.array().exp();
  y.array().colwise() /= y.rowwise().sum().array();
  return y;
}

}  // namespace

Var softmax_rows(const Var& a) {
  Tape& t = tape_of(a);
  Matrix out = softmax_rows_value(a.value());
  const std::size_t self = t.size();
  return t.record("softmax_rows", std::move(out), {a}, [a, self](Tape& tp, const Matrix& g) {
    const Matrix& y = tp.value_of(self);
    Vector dots = g.cwiseProduct(y).rowwise().sum();
    Matrix d = g.colwise() - dots;
    tp.accumulate(a, y.cwiseProduct(d));
  });
}

Var log_softmax_rows(const Var& a) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  Vector mx = x.rowwise().maxCoeff();
  Matrix shifted = x.colwise() - mx;
  Vector lse = shifted.array().exp().rowwise().sum().log();
  Matrix out = shifted.colwise() - lse;
  const std::size_t self = t.size();
  return t.record("log_softmax_rows", std::move(out), {a}, [a, self](Tape& tp, const Matrix& g) {
    Matrix p = tp.value_of(self).array().exp();
    Vector gs = g.rowwise().sum();
    Matrix d = g - (p.array().colwise() * gs.array()).matrix();
    tp.accumulate(a, d);
  });
}

Var row_sum(const Var& a) {
  Tape& t = tape_of(a);
  Matrix out = a.value().rowwise().sum();
  const Eigen::Index cols = a.cols();
  return t.record("row_sum", std::move(out), {a}, [a, cols](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g.replicate(1, cols));
  });
}

Var col_mean(const Var& a) {
  Tape& t = tape_of(a);
  Matrix out = a.value().colwise().mean();
  const Eigen::Index r = a.rows();
  return t.record("col_mean", std::move(out), {a}, [a, r](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g.replicate(r, 1) / static_cast<double>(r));
  });
}

Var sum(const Var& a) {
  Tape& t = tape_of(a);
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return t.record("sum", std::move(out), {a}, [a](Tape& tp, const Matrix& g) {
    tp.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var mean(const Var& a) {
  Tape& t = tape_of(a);
  const double n = static_cast<double>(a.value().size());
  Matrix out(1, 1);
  out(0, 0) = a.value().mean();
  return t.record("mean", std::move(out), {a}, [a, n](Tape& tp, const Matrix& g) {
    tp.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0) / n));
  });
}

Var row_normalize(const Var& a) {
  Tape& t = tape_of(a);
  Vector norms = a.value().rowwise().norm();
  for (Eigen::Index i = 0; i < norms.size(); ++i) {
    if (!(norms(i) > 0.0)) {
      throw std::domain_error("row_normalize: row " + std::to_string(i) +
                              " has zero norm (degenerate embedding)");
    }
  }
  Matrix out = a.value().array().colwise() / norms.array();
  const std::size_t self = t.size();
  return t.record("row_normalize", std::move(out), {a},
                  [a, self, norms](Tape& tp, const Matrix& g) {
                    const Matrix& y = tp.value_of(self);
                    Vector dots = g.cwiseProduct(y).rowwise().sum();
                    Matrix d = g - (y.array().colwise() * dots.array()).matrix();
                    d.array().colwise() /= norms.array();
                    tp.accumulate(a, d);
                  });
}

Var cosine_similarity(const Var& u, const Var& v) {
  if (u.rows() != 1 || v.rows() != 1 || u.cols() != v.cols()) {
    throw ShapeError("cosine_similarity", u.shape(), v.shape());
  }
  return sum(hadamard(row_normalize(u), row_normalize(v)));
}

Var add_row_broadcast(const Var& a, const Var& row) {
  Tape& t = tape_of(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ShapeError("add_row_broadcast", a.shape(), row.shape());
  }
  Matrix out = a.value().rowwise() + row.value().row(0);
  return t.record("add_row_broadcast", std::move(out), {a, row},
                  [a, row](Tape& tp, const Matrix& g) {
                    tp.accumulate(a, g);
                    if (tp.requires_grad(row)) tp.accumulate(row, g.colwise().sum());
                  });
}

Var rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  Tape& t = tape_of(a);
  if (start < 0 || count < 1 || start + count > a.rows()) {
    throw ShapeError("rows", a.shape(), Shape{start + count, a.cols()});
  }
  Matrix out = a.value().middleRows(start, count);
  return t.record("rows", std::move(out), {a}, [a, start, count](Tape& tp, const Matrix& g) {
    Matrix d = Matrix::Zero(a.rows(), a.cols());
    d.middleRows(start, count) = g;
    tp.accumulate(a, d);
  });
}

Var gather_rows(const Var& a, std::span<const std::size_t> index) {
  Tape& t = tape_of(a);
  const auto n = static_cast<Eigen::Index>(index.size());
  Matrix out(n, a.cols());
  std::vector<std::size_t> idx(index.begin(), index.end());
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto r = static_cast<Eigen::Index>(idx[static_cast<std::size_t>(k)]);
    if (r >= a.rows()) throw ShapeError("gather_rows", a.shape(), Shape{r + 1, a.cols()});
    out.row(k) = a.value().row(r);
  }
  return t.record("gather_rows", std::move(out), {a}, [a, idx](Tape& tp, const Matrix& g) {
    Matrix d = Matrix::Zero(a.rows(), a.cols());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      d.row(static_cast<Eigen::Index>(idx[k])) += g.row(static_cast<Eigen::Index>(k));
    }
    tp.accumulate(a, d);
  });
}

Var vstack(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("vstack: no operands");
  Tape& t = tape_of(parts.front());
  Eigen::Index total = 0;
  for (const Var& p : parts) {
    tape_of(parts.front(), p);
    if (p.cols() != parts.front().cols()) {
      throw ShapeError("vstack", parts.front().shape(), p.shape());
    }
    total += p.rows();
  }
  Matrix out(total, parts.front().cols());
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return t.record("vstack", std::move(out), ps, [ps](Tape& tp, const Matrix& g) {
    Eigen::Index off = 0;
    for (const Var& p : ps) {
      if (tp.requires_grad(p)) tp.accumulate(p, g.middleRows(off, p.rows()));
      off += p.rows();
    }
  });
}

double median(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty sample");
  std::vector<double> v(values.begin(), values.end());
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

GradCheckReport finite_difference_check(const MultiLeafFn& fn, std::span<const Matrix> leaves,
                                        double step, double tol) {
  if (!(step > 0.0) || !(tol > 0.0)) {
    throw std::invalid_argument("finite_difference_check: step and tol must be positive");
  }
  GradCheckReport report;

  auto evaluate = [&](std::span<const Matrix> at) -> double {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(at.size());
    for (const Matrix& m : at) vars.push_back(tape.constant(m));
    return fn(tape, vars).value().sum();
  };

  std::vector<Matrix> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const Matrix& m : leaves) vars.push_back(tape.variable(m));
    Var out = fn(tape, vars);
    tape.backward(out, Matrix::Ones(out.rows(), out.cols()));
    for (const Var& v : vars) analytic.push_back(tape.grad(v));
  }

  std::vector<Matrix> probe(leaves.begin(), leaves.end());
  for (std::size_t l = 0; l < probe.size(); ++l) {
    Matrix& x = probe[l];
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      const double orig = x.data()[k];
      double plus = 0.0;
      double minus = 0.0;
      try {
        x.data()[k] = orig + step;
        plus = evaluate(probe);
        x.data()[k] = orig - step;
        minus = evaluate(probe);
      } catch (const NonFiniteError& e) {
        x.data()[k] = orig;
        report.passed = false;
        report.max_rel_err = std::numeric_limits<double>::infinity();
        report.worst_leaf = l;
        report.worst_index = k;
        report.diagnostic = std::string("perturbation produced a non-finite value: ") + e.what();
        return report;
      }
      x.data()[k] = orig;
      const double numeric = (plus - minus) / (2.0 * step);
      const double a = analytic[l].data()[k];
      if (!std::isfinite(numeric)) {
        report.passed = false;
        report.max_rel_err = std::numeric_limits<double>::infinity();
        report.worst_leaf = l;
        report.worst_index = k;
        report.diagnostic = "non-finite central difference";
        return report;
      }
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > report.max_rel_err || report.worst_index < 0) {
        report.max_rel_err = rel;
        report.worst_leaf = l;
        report.worst_index = k;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  report.passed = report.max_rel_err < tol;
  if (!report.passed) {
    std::ostringstream os;
    os << "leaf " << report.worst_leaf << " element " << report.worst_index << ": analytic "
       << report.analytic << " vs numeric " << report.numeric;
    report.diagnostic = os.str();
  }
  return report;
}

GradCheckReport finite_difference_check(const LeafFn& fn, const Matrix& leaf, double step,
                                        double tol) {
  const Matrix leaves[] = {leaf};
  return finite_difference_check(
      [&fn](Tape& t, std::span<const Var> v) { return fn(t, v[0]); }, leaves, step, tol);
}

}  // namespace comix::ad
