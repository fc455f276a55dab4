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

#pragma once

#include <comix/tensor.hpp>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace comix::ad {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid while the owning tape
/// is alive and has not been cleared.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Shape shape() const { return shape_of(value()); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  double item() const;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id, std::uint64_t generation)
      : tape_(tape), id_(id), generation_(generation) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
  std::uint64_t generation_ = 0;
};

/// Dynamic reverse-mode tape. Forward values are computed eagerly when an
/// operation is recorded, so node order on the tape is a topological order.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that receives a gradient.
  Var variable(Matrix value, std::string name = {});
  /// Leaf that never receives a gradient.
  Var constant(Matrix value);

  /// Records an interior node. `parents` must already be on this tape.
  Var record(const char* op, Matrix value, std::vector<Var> parents, BackwardFn backward);

  /// Seeds `output` with `seed` and propagates to every node that requires a
  /// gradient. Accumulators are zeroed first, so calling twice is idempotent.
  void backward(const Var& output, const Matrix& seed);
  /// Scalar output, seed 1.
  void backward(const Var& output);

  /// Gradient of the last backward pass w.r.t. `v` (zeros if unreached).
  const Matrix& grad(const Var& v) const;

  bool requires_grad(const Var& v) const;
  const Matrix& value(const Var& v) const;
  std::size_t size() const { return nodes_.size(); }
  std::string describe(const Var& v) const;

  /// Drops every node. Outstanding Vars become invalid.
  void clear();

  // Used by backward closures.
  const Matrix& value_of(std::size_t id) const { return nodes_[id].value; }
  void accumulate(const Var& target, const Matrix& g);

 private:
  friend class Var;

  struct Node {
    const char* op;
    std::string name;
    Matrix value;
    Matrix grad;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    bool requires_grad = false;
  };

  void check_owned(const Var& v, const char* where) const;

  std::vector<Node> nodes_;
  std::uint64_t generation_ = 1;
  bool has_grads_ = false;
};

// Operations. All shapes are checked; mismatches throw ShapeError naming both
// operands. Every result is checked for finiteness (NonFiniteError).

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var hadamard(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var exp(const Var& a);
Var log(const Var& a);
Var tanh(const Var& a);
Var relu(const Var& a);
/// Row-wise softmax with max subtraction.
Var softmax_rows(const Var& a);
Var log_softmax_rows(const Var& a);
/// r x c -> r x 1.
Var row_sum(const Var& a);
/// r x c -> 1 x c.
Var col_mean(const Var& a);
/// -> 1 x 1.
Var sum(const Var& a);
Var mean(const Var& a);
/// Each row divided by its L2 norm. Zero rows throw std::domain_error.
Var row_normalize(const Var& a);
/// Cosine similarity of two 1 x k rows, as a 1 x 1 node.
Var cosine_similarity(const Var& u, const Var& v);
/// Adds a 1 x c row to every row of `a`.
Var add_row_broadcast(const Var& a, const Var& row);
Var rows(const Var& a, Eigen::Index start, Eigen::Index count);
Var gather_rows(const Var& a, std::span<const std::size_t> index);
Var vstack(std::span<const Var> parts);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator-(const Var& a) { return scale(a, -1.0); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }

/// Forward-only median of a sample; the mean of the two middle order
/// statistics for even sizes. Never recorded on a tape.
double median(std::span<const double> values);

struct GradCheckReport {
  double max_rel_err = 0.0;
  bool passed = false;
  std::size_t worst_leaf = 0;
  Eigen::Index worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  std::string diagnostic;
};

using MultiLeafFn = std::function<Var(Tape&, std::span<const Var>)>;
using LeafFn = std::function<Var(Tape&, const Var&)>;

/// Compares reverse-mode gradients of sum(fn(leaves)) with central
/// differences. Relative error per element is |a - n| / max(|a|, |n|, 1e-8).
GradCheckReport finite_difference_check(const MultiLeafFn& fn, std::span<const Matrix> leaves,
                                        double step, double tol);
GradCheckReport finite_difference_check(const LeafFn& fn, const Matrix& leaf, double step,
                                        double tol);

}  // namespace comix::ad
