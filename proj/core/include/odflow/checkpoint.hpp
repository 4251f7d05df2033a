#pragma once

#include <filesystem>
#include <string>

#include "odflow/flowgraph.hpp"
#include "odflow/geogrid.hpp"
#include "odflow/graph_store.hpp"
#include "odflow/params.hpp"
#include "odflow/spatial.hpp"
#include "odflow/train_config.hpp"

namespace odflow {

inline constexpr const char* kCheckpointFormat = "odflow-checkpoint";
inline constexpr int kCheckpointVersion = 1;

/// Trained parameters plus everything needed to rebuild the model and check
/// it against a graph store.
struct Checkpoint {
  TrainConfig config;
  GridSpec grid;
  int slots_per_day = 24;
  WeightMode weight = WeightMode::Passengers;
  double geo_threshold_km = 0.0;  // resolved value
  DegreeScale degree_scale;
  int epoch = 0;          // epoch that produced the parameters
  std::string rng_state;  // std::mt19937_64 stream form
  ParamStore params;
};

std::string to_json(const Checkpoint& checkpoint);
/// Throws ConfigError on a malformed or unsupported document.
Checkpoint checkpoint_from_json(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws ConfigError unless the checkpoint was trained on the same grid and
/// slot length as the store.
void check_compatible(const Checkpoint& checkpoint, const GraphStore& store);

/// Full config as a JSON object string (used for report config echoes).
std::string config_json(const TrainConfig& config);
/// Parses a JSON config object; keys that are absent keep their defaults.
TrainConfig train_config_from_json(const std::string& text, TrainConfig base = {});

}  // namespace odflow
