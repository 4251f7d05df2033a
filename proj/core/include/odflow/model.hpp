#pragma once

#include <cstdint>
#include <random>

#include "odflow/dataset.hpp"
#include "odflow/model_config.hpp"
#include "odflow/params.hpp"
#include "odflow/spatial.hpp"
#include "odflow/temporal.hpp"
#include "odflow/tensor.hpp"
#include "odflow/transfer.hpp"

namespace odflow {

struct ForwardResult {
  tc::Var demand;           // n x 1
  tc::Var od;               // n x n
  tc::Var probabilities;    // n x n transfer probabilities
  tc::Var final_embedding;  // n x z'
};

struct ForwardTrace {
  std::vector<SpatialTrace> spatial;  // one per distinct history slot
  TemporalTrace temporal;
};

/// Spatial attention per history slot, temporal attention over the channels,
/// then the demand and transfer heads.
class OdFlowModel {
 public:
  OdFlowModel() = default;
  /// Registers every parameter with Glorot initialisation drawn from `rng`.
  OdFlowModel(const ModelConfig& config, int rows, int cols, int slots_per_day,
              std::mt19937_64& rng);

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// Predicts the slot at absolute index `target`. Throws std::out_of_range
  /// when a channel needs history the dataset does not hold.
  ForwardResult forward(tc::Tape& tape, const Dataset& data, long target,
                        ForwardTrace* trace = nullptr);

 private:
  ModelConfig config_;
  ParamStore params_;
};

/// Absolute slots whose full channel history lies inside [0, total_slots).
bool has_history(const ModelConfig& config, long target, int slots_per_day, long total_slots);

}  // namespace odflow
