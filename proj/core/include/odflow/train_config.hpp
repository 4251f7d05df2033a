#pragma once

#include <cstdint>
#include <vector>

#include "odflow/model_config.hpp"
#include "odflow/optimizer.hpp"

namespace odflow {

struct TrainConfig {
  ModelConfig model;
  int epochs = 200;
  double learning_rate = 0.001;
  std::uint64_t seed = 0;
  double train_fraction = 0.75;       // of all days; the rest is test
  double validation_fraction = 0.10;  // of the training days
  OptimizerKind optimizer = OptimizerKind::Adam;
  Task task = Task::Both;
  double demand_weight = 1.0;
  double od_weight = 1.0;
  double geo_threshold_km = 0.0;  // 0 selects the diagonal-inclusive default

  /// Throws ConfigError; also validates the model config.
  void validate() const;
};

/// Chronological day split. Days are 0-based dataset indices.
struct DaySplit {
  std::vector<int> train;
  std::vector<int> validation;
  std::vector<int> test;
};

inline constexpr int kMinimumDays = 10;

/// First floor(days * train_fraction) days train, the rest test; the last
/// max(1, floor(train * validation_fraction)) training days become
/// validation. Throws ConfigError with fewer than kMinimumDays days.
DaySplit split_days(int num_days, double train_fraction = 0.75, double validation_fraction = 0.10);

}  // namespace odflow
