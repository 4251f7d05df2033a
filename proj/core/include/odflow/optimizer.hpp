#pragma once

#include <string>
#include <vector>

#include "odflow/params.hpp"
#include "odflow/tensor.hpp"

namespace odflow {

enum class OptimizerKind { Adam, Sgd };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(const std::string& text);

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Applies one update from the gradients accumulated in a ParamStore.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate, AdamSettings adam = {});

  void step(ParamStore& params);

  OptimizerKind kind() const { return kind_; }
  long steps() const { return t_; }

  // Moment buffers, exposed for checkpointing. Indexed like ParamStore::all().
  std::vector<tc::Tensor>& first_moments() { return m_; }
  std::vector<tc::Tensor>& second_moments() { return v_; }
  void set_steps(long t) { t_ = t; }

 private:
  OptimizerKind kind_;
  double lr_;
  AdamSettings adam_;
  long t_ = 0;
  std::vector<tc::Tensor> m_, v_;
};

}  // namespace odflow
