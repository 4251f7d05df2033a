#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

// Dense 2-D float64 tensors with a tape-based reverse-mode differentiator.
// Vectors are represented as n x 1 columns or 1 x n rows.

namespace odflow::tc {

class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor(1, 1, v); }
  static Tensor column(std::vector<double> values);
  static Tensor identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  std::vector<std::size_t> shape() const { return {rows_, cols_}; }
  bool empty() const { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  const std::vector<double>& storage() const { return values_; }

  void fill(double v);
  std::string shape_string() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// A learnable tensor and its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  void zero_grad() { grad = Tensor(value.rows(), value.cols()); }
};

class Tape;

/// Handle to a value recorded on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Records primitive operations in execution order (which is topological)
/// and replays them backwards. Single-threaded; independent tapes may run
/// concurrently.
class Tape {
 public:
  using Backprop = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf bound to a parameter; backward() adds into `p.grad`.
  Var parameter(Parameter& p);

  /// Propagates d(loss)/d(node) to every node and accumulates parameter
  /// gradients. `loss` must be 1x1. Throws std::logic_error when called a
  /// second time on the same tape.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  /// Gradient buffer of a node, allocated on first use.
  Tensor& grad(std::size_t id);
  bool has_grad(std::size_t id) const { return !nodes_[id].grad.empty(); }

  // Used by the primitive ops.
  Var record(Tensor value, std::vector<std::size_t> parents, Backprop backprop);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> parents;
    Backprop backprop;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };

  std::deque<Node> nodes_;
  bool backward_done_ = false;
};

// Primitive operations. All throw std::invalid_argument on shape mismatch,
// naming both shapes.

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise product.
Var mul(Var a, Var b);
Var scale(Var a, double factor);
/// a * s for a 1x1 tensor s.
Var scale_by(Var a, Var s);
/// Adds a 1 x cols row to every row of a.
Var add_row(Var a, Var row);
/// Repeats an n x 1 column into n x cols.
Var broadcast_col(Var col, std::size_t cols);
/// Repeats a 1 x m row into rows x m.
Var broadcast_row(Var row, std::size_t rows);
Var concat_cols(std::span<const Var> parts);
Var gather_rows(Var table, std::span<const std::size_t> indices);
/// Column c as an n x 1 tensor.
Var column(Var a, std::size_t c);
/// Rows [begin, begin + count).
Var slice_rows(Var a, std::size_t begin, std::size_t count);
/// Multiplies row i of a by w(i, 0).
Var scale_rows(Var a, Var w);
/// out(i) = sum_k a(i,k) b(i,k), as n x 1.
Var row_dot(Var a, Var b);
/// Row sums as n x 1.
Var sum_rows(Var a);
/// Sum of all entries as 1x1.
Var sum(Var a);
Var add_n(std::span<const Var> terms);
Var leaky_relu(Var a, double slope);
Var sigmoid(Var a);
Var softplus(Var a);
/// Row softmax, stabilised by subtracting each row's maximum.
Var softmax_rows(Var a);
/// Row softmax restricted to entries where mask is nonzero; other entries
/// (and rows with an empty mask) are exactly 0.
Var masked_softmax_rows(Var a, std::span<const std::uint8_t> mask);
/// Mean over elements of 0.5 e^2 if |e| < 1 else |e| - 0.5.
Var smooth_l1(Var pred, Var target);

inline constexpr double kLeakySlope = 0.2;

double smooth_l1_value(double error);
double sigmoid_value(double x);
double softplus_value(double x);

}  // namespace odflow::tc
