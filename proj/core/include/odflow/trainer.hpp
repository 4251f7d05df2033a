#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "odflow/checkpoint.hpp"
#include "odflow/dataset.hpp"
#include "odflow/graph_store.hpp"
#include "odflow/model.hpp"
#include "odflow/train_config.hpp"

namespace odflow {

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  std::optional<double> val_loss;  // absent when no validation target has history
};

struct TrainResult {
  Checkpoint best;  // lowest validation loss (training loss if no validation targets)
  std::vector<EpochLog> log;
  std::size_t train_targets = 0;
  std::size_t validation_targets = 0;
  std::size_t skipped_targets = 0;  // training slots without enough history
};

/// Absolute slots of the given days that have full channel history.
std::vector<long> eligible_targets(const ModelConfig& config, const Dataset& data,
                                   const std::vector<int>& days, std::size_t* skipped = nullptr);

/// Loss of one target under the config's task weights.
tc::Var target_loss(const TrainConfig& config, const ForwardResult& r, const Dataset& data,
                    long target);

/// Builds the dataset of a store for a config: HA tables and degree scale
/// come from the training days only.
Dataset training_dataset(const TrainConfig& config, const GraphStore& store, const DaySplit& split);

using EpochCallback = std::function<void(const EpochLog&)>;

/// Batch-size-1 training with a seeded per-epoch shuffle. Throws
/// std::runtime_error on a non-finite loss, naming the target slot.
TrainResult train(const TrainConfig& config, const GraphStore& store,
                  const EpochCallback& on_epoch = {});

/// Mean loss over targets without updating parameters.
double mean_loss(const TrainConfig& config, OdFlowModel& model, const Dataset& data,
                 const std::vector<long>& targets);

void write_loss_log(std::ostream& out, const std::vector<EpochLog>& log);

/// Rebuilds the model held by a checkpoint.
OdFlowModel model_from_checkpoint(const Checkpoint& checkpoint);

}  // namespace odflow
