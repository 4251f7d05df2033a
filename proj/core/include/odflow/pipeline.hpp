#pragma once

#include <optional>
#include <string>
#include <vector>

#include "odflow/checkpoint.hpp"
#include "odflow/flowgraph.hpp"
#include "odflow/graph_store.hpp"
#include "odflow/metrics.hpp"
#include "odflow/trainer.hpp"

namespace odflow {

// Composite experiments: each sweep leg retrains from scratch with the same
// seed and evaluates on the test split.

struct SweepRow {
  std::string label;  // e.g. "2.5" or "no-recent"
  double value = 0.0;
  bool ok = false;
  std::string error;
  Evaluation evaluation;
};

struct SweepTable {
  std::string parameter;  // "cell_km" or "h"
  std::vector<SweepRow> rows;
};

/// Builds a graph store from trips on a fresh grid of the given cell size.
GraphStore build_store(const std::vector<TripRecord>& trips, const BoundingBox& bbox, double cell_km,
                       int slot_minutes, WeightMode mode, GraphBuildStats* stats = nullptr);

/// Train on a store and evaluate the best checkpoint on its test split.
Evaluation train_and_evaluate(const TrainConfig& config, const GraphStore& store);

SweepTable sweep_grid(const std::vector<TripRecord>& trips, const BoundingBox& bbox,
                      const std::vector<double>& cell_km, const TrainConfig& config,
                      int slot_minutes = 60, WeightMode mode = WeightMode::Passengers);

/// One row per h; with `ablation` an extra row trains without the recent channel.
SweepTable sweep_hours(const GraphStore& store, const std::vector<int>& hours,
                       const TrainConfig& config, bool ablation = false);

/// parameter,value,status,od_mape_0,...,demand_mae_5 (empty cells for nulls
/// and failed rows).
std::string sweep_csv(const SweepTable& table);
std::string sweep_json(const SweepTable& table);

/// Looks up a metric cell of a sweep row; nullopt when absent.
std::optional<double> sweep_metric(const SweepRow& row, Task task, const std::string& metric, int k);

struct Prediction {
  SlotKey key;
  long absolute = 0;
  tc::Tensor demand;  // n x 1
  tc::Tensor od;      // n x n
  std::optional<Evaluation> metrics;  // when the store holds the actual slot
};

/// Predicts one slot (day is 0-based as in the store, slot 1-based). The
/// slot may lie past the end of the store if its history is stored. Throws
/// ConfigError naming the earliest valid target when history is missing.
Prediction predict(const Checkpoint& checkpoint, const GraphStore& store, int day, int slot);

/// {"day","slot","dow","demand":[...],"od":[[i,j,v],...],"metrics":...};
/// OD entries above `threshold` only, cells 1-based.
std::string prediction_json(const Prediction& prediction, double threshold = 0.0);

}  // namespace odflow
