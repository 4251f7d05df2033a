#include "odflow/optimizer.hpp"

#include <cmath>

#include "odflow/errors.hpp"

namespace odflow {

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::Adam ? "adam" : "sgd"; }

OptimizerKind parse_optimizer(const std::string& text) {
  if (text == "adam") return OptimizerKind::Adam;
  if (text == "sgd") return OptimizerKind::Sgd;
  throw ConfigError("unknown optimizer '" + text + "' (expected adam or sgd)");
}

Optimizer::Optimizer(OptimizerKind kind, double learning_rate, AdamSettings adam)
    : kind_(kind), lr_(learning_rate), adam_(adam) {
  if (!(learning_rate >= 0.0)) throw ConfigError("learning rate must be non-negative");
}

void Optimizer::step(ParamStore& params) {
  auto& all = params.all();
  ++t_;
  if (kind_ == OptimizerKind::Sgd) {
    for (auto& p : all) {
      if (p.grad.empty()) continue;
      for (std::size_t k = 0; k < p.value.size(); ++k) p.value[k] -= lr_ * p.grad[k];
    }
    return;
  }
  if (m_.empty()) {
    for (const auto& p : all) {
      m_.emplace_back(p.value.rows(), p.value.cols());
      v_.emplace_back(p.value.rows(), p.value.cols());
    }
  }
  const double c1 = 1.0 - std::pow(adam_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(adam_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < all.size(); ++i) {
    auto& p = all[i];
    if (p.grad.empty()) continue;
    tc::Tensor& m = m_[i];
    tc::Tensor& v = v_[i];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad[k];
      m[k] = adam_.beta1 * m[k] + (1.0 - adam_.beta1) * g;
      v[k] = adam_.beta2 * v[k] + (1.0 - adam_.beta2) * g * g;
      p.value[k] -= lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + adam_.epsilon);
    }
  }
}

}  // namespace odflow
