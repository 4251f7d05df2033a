#include "odflow/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Core>

namespace odflow::tc {

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw std::invalid_argument("tensor value count " + std::to_string(values_.size()) +
                                " does not match shape " + shape_string());
  }
}

Tensor Tensor::column(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor(n, 1, std::move(values));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

std::string Tensor::shape_string() const {
  return "[" + std::to_string(rows_) + "x" + std::to_string(cols_) + "]";
}

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Parameter& p) {
  Node node;
  node.value = p.value;
  node.param = &p;
  node.needs_grad = true;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad(std::size_t id) {
  Node& node = nodes_[id];
  if (node.grad.empty() && !node.value.empty()) {
    node.grad = Tensor(node.value.rows(), node.value.cols());
  }
  return node.grad;
}

Var Tape::record(Tensor value, std::vector<std::size_t> parents, Backprop backprop) {
  Node node;
  node.value = std::move(value);
  for (auto p : parents) node.needs_grad = node.needs_grad || nodes_[p].needs_grad;
  if (node.needs_grad) {
    node.parents = std::move(parents);
    node.backprop = std::move(backprop);
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var loss) {
  if (backward_done_) throw std::logic_error("backward() already ran on this tape");
  if (loss.tape() != this) throw std::invalid_argument("loss was not recorded on this tape");
  if (value(loss.id()).size() != 1) {
    throw std::invalid_argument("backward() needs a scalar loss, got " +
                                value(loss.id()).shape_string());
  }
  backward_done_ = true;
  grad(loss.id())[0] = 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.needs_grad || node.grad.empty()) continue;
    if (node.backprop) node.backprop(*this, id);
    if (node.param != nullptr) {
      Parameter& p = *node.param;
      if (p.grad.size() != p.value.size()) p.zero_grad();
      for (std::size_t k = 0; k < node.grad.size(); ++k) p.grad[k] += node.grad[k];
    }
  }
}

namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " + a.shape_string() +
                              " and " + b.shape_string());
}

Tape& same_tape(const char* op, Var a, Var b) {
  if (!a.valid() || a.tape() != b.tape()) {
    throw std::invalid_argument(std::string(op) + ": operands belong to different tapes");
  }
  return *a.tape();
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error(op, a, b);
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

// C += A * B
void gemm_nn(const Tensor& a, const Tensor& b, Tensor& c) {
  Map(c.data(), c.rows(), c.cols()).noalias() +=
      MapC(a.data(), a.rows(), a.cols()) * MapC(b.data(), b.rows(), b.cols());
}

// C += A * B^T
void gemm_nt(const Tensor& a, const Tensor& b, Tensor& c) {
  Map(c.data(), c.rows(), c.cols()).noalias() +=
      MapC(a.data(), a.rows(), a.cols()) * MapC(b.data(), b.rows(), b.cols()).transpose();
}

// C += A^T * B
void gemm_tn(const Tensor& a, const Tensor& b, Tensor& c) {
  Map(c.data(), c.rows(), c.cols()).noalias() +=
      MapC(a.data(), a.rows(), a.cols()).transpose() * MapC(b.data(), b.rows(), b.cols());
}

void accumulate(Tape& t, std::size_t id, const Tensor& delta) {
  if (!t.needs_grad(id)) return;
  Tensor& g = t.grad(id);
  for (std::size_t k = 0; k < g.size(); ++k) g[k] += delta[k];
}

}  // namespace

double smooth_l1_value(double e) {
  const double a = std::abs(e);
  return a < 1.0 ? 0.5 * e * e : a - 0.5;
}

double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_value(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

Var matmul(Var a, Var b) {
  Tape& t = same_tape("matmul", a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) shape_error("matmul", av, bv);
  Tensor out(av.rows(), bv.cols());
  gemm_nn(av, bv, out);
  const auto ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ia)) gemm_nt(g, t.value(ib), t.grad(ia));
    if (t.needs_grad(ib)) gemm_tn(t.value(ia), g, t.grad(ib));
  });
}

Var transpose(Var a) {
  Tape& t = *a.tape();
  const Tensor& av = a.value();
  Tensor out(av.cols(), av.rows());
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < av.cols(); ++j) out(j, i) = av(i, j);
  const auto ia = a.id();
  return t.record(std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t i = 0; i < ga.rows(); ++i)
      for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g(j, i);
  });
}

Var add(Var a, Var b) {
  Tape& t = same_tape("add", a, b);
  require_same_shape("add", a.value(), b.value());
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += bv[k];
  const auto ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    accumulate(t, ia, g);
    accumulate(t, ib, g);
  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape("sub", a, b);
  require_same_shape("sub", a.value(), b.value());
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] -= bv[k];
  const auto ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    accumulate(t, ia, g);
    if (t.needs_grad(ib)) {
      Tensor& gb = t.grad(ib);
      for (std::size_t k = 0; k < gb.size(); ++k) gb[k] -= g[k];
    }
  });
}

Var mul(Var a, Var b) {
  Tape& t = same_tape("mul", a, b);
  require_same_shape("mul", a.value(), b.value());
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] *= bv[k];
  const auto ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ia)) {
      Tensor& ga = t.grad(ia);
      const Tensor& bv = t.value(ib);
      for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += g[k] * bv[k];
    }
    if (t.needs_grad(ib)) {
      Tensor& gb = t.grad(ib);
      const Tensor& av = t.value(ia);
      for (std::size_t k = 0; k < gb.size(); ++k) gb[k] += g[k] * av[k];
    }
  });
}

Var scale(Var a, double factor) {
  Tape& t = *a.tape();
  Tensor out = a.value();
  for (auto& v : out.values()) v *= factor;
  const auto ia = a.id();
  return t.record(std::move(out), {ia}, [ia, factor](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += factor * g[k];
  });
}

Var scale_by(Var a, Var s) {
  Tape& t = same_tape("scale_by", a, s);
  if (s.value().size() != 1) shape_error("scale_by", a.value(), s.value());
  const double factor = s.value()[0];
  Tensor out = a.value();
  for (auto& v : out.values()) v *= factor;
  const auto ia = a.id(), is = s.id();
  return t.record(std::move(out), {ia, is}, [ia, is](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const double f = t.value(is)[0];
    if (t.needs_grad(ia)) {
      Tensor& ga = t.grad(ia);
      for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += f * g[k];
    }
    if (t.needs_grad(is)) {
      const Tensor& av = t.value(ia);
      double acc = 0.0;
      for (std::size_t k = 0; k < av.size(); ++k) acc += g[k] * av[k];
      t.grad(is)[0] += acc;
    }
  });
}

Var add_row(Var a, Var row) {
  Tape& t = same_tape("add_row", a, row);
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) shape_error("add_row", av, rv);
  Tensor out = av;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += rv[j];
  const auto ia = a.id(), ir = row.id();
  return t.record(std::move(out), {ia, ir}, [ia, ir](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    accumulate(t, ia, g);
    if (t.needs_grad(ir)) {
      Tensor& gr = t.grad(ir);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) gr[j] += g(i, j);
    }
  });
}

Var broadcast_col(Var col, std::size_t cols) {
  Tape& t = *col.tape();
  const Tensor& cv = col.value();
  if (cv.cols() != 1) shape_error("broadcast_col", cv, Tensor(cv.rows(), 1));
  Tensor out(cv.rows(), cols);
  for (std::size_t i = 0; i < cv.rows(); ++i)
    for (std::size_t j = 0; j < cols; ++j) out(i, j) = cv[i];
  const auto ic = col.id();
  return t.record(std::move(out), {ic}, [ic](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& gc = t.grad(ic);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < g.cols(); ++j) s += g(i, j);
      gc[i] += s;
    }
  });
}

Var broadcast_row(Var row, std::size_t rows) {
  Tape& t = *row.tape();
  const Tensor& rv = row.value();
  if (rv.rows() != 1) shape_error("broadcast_row", rv, Tensor(1, rv.cols()));
  Tensor out(rows, rv.cols());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < rv.cols(); ++j) out(i, j) = rv[j];
  const auto ir = row.id();
  return t.record(std::move(out), {ir}, [ir](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& gr = t.grad(ir);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) gr[j] += g(i, j);
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no operands");
  Tape& t = *parts.front().tape();
  const std::size_t rows = parts.front().value().rows();
  std::size_t cols = 0;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    if (p.tape() != &t) throw std::invalid_argument("concat_cols: operands belong to different tapes");
    if (p.value().rows() != rows) shape_error("concat_cols", parts.front().value(), p.value());
    cols += p.value().cols();
    ids.push_back(p.id());
  }
  Tensor out(rows, cols);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& pv = p.value();
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < pv.cols(); ++j) out(i, offset + j) = pv(i, j);
    offset += pv.cols();
  }
  auto parents = ids;
  return t.record(std::move(out), std::move(parents), [ids](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    std::size_t offset = 0;
    for (auto id : ids) {
      const std::size_t w = t.value(id).cols();
      if (t.needs_grad(id)) {
        Tensor& gp = t.grad(id);
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < w; ++j) gp(i, j) += g(i, offset + j);
      }
      offset += w;
    }
  });
}

Var gather_rows(Var table, std::span<const std::size_t> indices) {
  Tape& t = *table.tape();
  const Tensor& tv = table.value();
  Tensor out(indices.size(), tv.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= tv.rows()) {
      throw std::out_of_range("gather_rows: index " + std::to_string(indices[i]) +
                              " outside table " + tv.shape_string());
    }
    for (std::size_t j = 0; j < tv.cols(); ++j) out(i, j) = tv(indices[i], j);
  }
  const auto it = table.id();
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return t.record(std::move(out), {it}, [it, idx = std::move(idx)](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& gt = t.grad(it);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) gt(idx[i], j) += g(i, j);
  });
}

Var column(Var a, std::size_t c) {
  Tape& t = *a.tape();
  const Tensor& av = a.value();
  if (c >= av.cols()) throw std::out_of_range("column: index outside " + av.shape_string());
  Tensor out(av.rows(), 1);
  for (std::size_t i = 0; i < av.rows(); ++i) out[i] = av(i, c);
  const auto ia = a.id();
  return t.record(std::move(out), {ia}, [ia, c](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.rows(); ++i) ga(i, c) += g[i];
  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t count) {
  Tape& t = *a.tape();
  const Tensor& av = a.value();
  if (begin + count > av.rows()) {
    throw std::out_of_range("slice_rows: rows outside " + av.shape_string());
  }
  const std::size_t w = av.cols();
  Tensor out(count, w,
             std::vector<double>(av.data() + begin * w, av.data() + (begin + count) * w));
  const auto ia = a.id();
  return t.record(std::move(out), {ia}, [ia, begin](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(ia);
    const std::size_t offset = begin * g.cols();
    for (std::size_t k = 0; k < g.size(); ++k) ga[offset + k] += g[k];
  });
}

Var scale_rows(Var a, Var w) {
  Tape& t = same_tape("scale_rows", a, w);
  const Tensor& av = a.value();
  const Tensor& wv = w.value();
  if (wv.rows() != av.rows() || wv.cols() != 1) shape_error("scale_rows", av, wv);
  Tensor out = av;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) *= wv[i];
  const auto ia = a.id(), iw = w.id();
  return t.record(std::move(out), {ia, iw}, [ia, iw](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& av = t.value(ia);
    const Tensor& wv = t.value(iw);
    if (t.needs_grad(ia)) {
      Tensor& ga = t.grad(ia);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) ga(i, j) += g(i, j) * wv[i];
    }
    if (t.needs_grad(iw)) {
      Tensor& gw = t.grad(iw);
      for (std::size_t i = 0; i < g.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < g.cols(); ++j) s += g(i, j) * av(i, j);
        gw[i] += s;
      }
    }
  });
}

Var row_dot(Var a, Var b) {
  Tape& t = same_tape("row_dot", a, b);
  require_same_shape("row_dot", a.value(), b.value());
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(av.rows(), 1);
  for (std::size_t i = 0; i < av.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < av.cols(); ++j) s += av(i, j) * bv(i, j);
    out[i] = s;
  }
  const auto ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& av = t.value(ia);
    const Tensor& bv = t.value(ib);
    if (t.needs_grad(ia)) {
      Tensor& ga = t.grad(ia);
      for (std::size_t i = 0; i < av.rows(); ++i)
        for (std::size_t j = 0; j < av.cols(); ++j) ga(i, j) += g[i] * bv(i, j);
    }
    if (t.needs_grad(ib)) {
      Tensor& gb = t.grad(ib);
      for (std::size_t i = 0; i < av.rows(); ++i)
        for (std::size_t j = 0; j < av.cols(); ++j) gb(i, j) += g[i] * av(i, j);
    }
  });
}

Var sum_rows(Var a) {
  Tape& t = *a.tape();
  const Tensor& av = a.value();
  Tensor out(av.rows(), 1);
  for (std::size_t i = 0; i < av.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < av.cols(); ++j) s += av(i, j);
    out[i] = s;
  }
  const auto ia = a.id();
  return t.record(std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t i = 0; i < ga.rows(); ++i)
      for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g[i];
  });
}

Var sum(Var a) {
  Tape& t = *a.tape();
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  const auto ia = a.id();
  return t.record(Tensor::scalar(s), {ia}, [ia](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    for (auto& v : t.grad(ia).values()) v += g;
  });
}

Var add_n(std::span<const Var> terms) {
  if (terms.empty()) throw std::invalid_argument("add_n: no operands");
  Tape& t = *terms.front().tape();
  Tensor out = terms.front().value();
  std::vector<std::size_t> ids{terms.front().id()};
  for (std::size_t k = 1; k < terms.size(); ++k) {
    if (terms[k].tape() != &t) throw std::invalid_argument("add_n: operands belong to different tapes");
    require_same_shape("add_n", out, terms[k].value());
    const Tensor& v = terms[k].value();
    for (std::size_t e = 0; e < out.size(); ++e) out[e] += v[e];
    ids.push_back(terms[k].id());
  }
  auto parents = ids;
  return t.record(std::move(out), std::move(parents), [ids](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    for (auto id : ids) accumulate(t, id, g);
  });
}

Var leaky_relu(Var a, double slope) {
  Tape& t = *a.tape();
  Tensor out = a.value();
  for (auto& v : out.values()) v = v > 0.0 ? v : slope * v;
  const auto ia = a.id();
  return t.record(std::move(out), {ia}, [ia, slope](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& av = t.value(ia);
    Tensor& ga = t.grad(ia);
    for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += av[k] > 0.0 ? g[k] : slope * g[k];
  });
}

Var sigmoid(Var a) {
  Tape& t = *a.tape();
  Tensor out = a.value();
  for (auto& v : out.values()) v = sigmoid_value(v);
  const auto ia = a.id();
  return t.record(std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += g[k] * y[k] * (1.0 - y[k]);
  });
}

Var softplus(Var a) {
  Tape& t = *a.tape();
  Tensor out = a.value();
  for (auto& v : out.values()) v = softplus_value(v);
  const auto ia = a.id();
  return t.record(std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& av = t.value(ia);
    Tensor& ga = t.grad(ia);
    for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += g[k] * sigmoid_value(av[k]);
  });
}

namespace {

void softmax_backward(Tape& t, std::size_t self, std::size_t ia) {
  const Tensor& g = t.grad(self);
  const Tensor& y = t.value(self);
  Tensor& ga = t.grad(ia);
  for (std::size_t i = 0; i < y.rows(); ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
    for (std::size_t j = 0; j < y.cols(); ++j) ga(i, j) += y(i, j) * (g(i, j) - dot);
  }
}

}  // namespace

Var softmax_rows(Var a) {
  Tape& t = *a.tape();
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.rows(); ++i) {
    double mx = out(i, 0);
    for (std::size_t j = 1; j < out.cols(); ++j) mx = std::max(mx, out(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < out.cols(); ++j) {
      out(i, j) = std::exp(out(i, j) - mx);
      z += out(i, j);
    }
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) /= z;
  }
  const auto ia = a.id();
  return t.record(std::move(out), {ia},
                  [ia](Tape& t, std::size_t self) { softmax_backward(t, self, ia); });
}

Var masked_softmax_rows(Var a, std::span<const std::uint8_t> mask) {
  Tape& t = *a.tape();
  const Tensor& av = a.value();
  if (mask.size() != av.size()) {
    throw std::invalid_argument("masked_softmax_rows: mask size " + std::to_string(mask.size()) +
                                " does not match " + av.shape_string());
  }
  Tensor out(av.rows(), av.cols());
  const std::size_t m = av.cols();
  for (std::size_t i = 0; i < av.rows(); ++i) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < m; ++j)
      if (mask[i * m + j]) mx = std::max(mx, av(i, j));
    if (mx == -INFINITY) continue;
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (!mask[i * m + j]) continue;
      out(i, j) = std::exp(av(i, j) - mx);
      z += out(i, j);
    }
    for (std::size_t j = 0; j < m; ++j) out(i, j) /= z;
  }
  const auto ia = a.id();
  // Masked entries have y = 0, so the unmasked backward formula already
  // gives them zero gradient.
  return t.record(std::move(out), {ia},
                  [ia](Tape& t, std::size_t self) { softmax_backward(t, self, ia); });
}

Var smooth_l1(Var pred, Var target) {
  Tape& t = same_tape("smooth_l1", pred, target);
  require_same_shape("smooth_l1", pred.value(), target.value());
  const Tensor& p = pred.value();
  const Tensor& y = target.value();
  double total = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) total += smooth_l1_value(p[k] - y[k]);
  const double count = static_cast<double>(std::max<std::size_t>(p.size(), 1));
  const auto ip = pred.id(), iy = target.id();
  return t.record(Tensor::scalar(total / count), {ip, iy},
                  [ip, iy, count](Tape& t, std::size_t self) {
                    const double g = t.grad(self)[0] / count;
                    const Tensor& p = t.value(ip);
                    const Tensor& y = t.value(iy);
                    const bool gp = t.needs_grad(ip), gy = t.needs_grad(iy);
                    for (std::size_t k = 0; k < p.size(); ++k) {
                      const double e = p[k] - y[k];
                      const double d = std::abs(e) < 1.0 ? e : (e > 0.0 ? 1.0 : -1.0);
                      if (gp) t.grad(ip)[k] += g * d;
                      if (gy) t.grad(iy)[k] -= g * d;
                    }
                  });
}

}  // namespace odflow::tc
