#pragma once

#include <optional>
#include <span>
#include <vector>

#include "odflow/flowgraph.hpp"
#include "odflow/geogrid.hpp"
#include "odflow/graph_store.hpp"
#include "odflow/spatial.hpp"
#include "odflow/tensor.hpp"
#include "odflow/transfer.hpp"

namespace odflow {

/// Everything the model reads besides its parameters: the slot graphs and
/// the quantities derived once per store (distances, neighbor lists, degree
/// scale, historical averages). Fields are public so tests can build
/// relabelled or hand-made instances.
struct Dataset {
  GridSpec grid;
  GraphSequence seq;
  DistanceGraph distances;
  double geo_threshold_km = 0.0;
  NeighborSets geo;
  CellCodes codes;
  std::vector<SpatialNeighbors> neighbors;  // per absolute slot
  DegreeScale degree_scale;
  HistoricalAverage ha;

  /// `reference_days` feed the degree scale and the historical averages;
  /// pass the training days only.
  static Dataset build(const GridSpec& grid, GraphSequence seq, std::span<const int> reference_days,
                       std::optional<double> geo_threshold_km = std::nullopt);

  std::size_t cells() const { return seq.cells; }
  int slots_per_day() const { return seq.slots_per_day; }
  long total_slots() const { return static_cast<long>(seq.graphs.size()); }

  /// Key of any absolute slot, including slots past the end of the store.
  SlotKey key_at(long absolute) const;
  const SlotGraph& graph_at(long absolute) const;

  tc::Tensor degree_features_at(long absolute) const;
  tc::Tensor ha_demand(const SlotKey& key) const;  // n x 1
  tc::Tensor ha_od(const SlotKey& key) const;      // n x n
  tc::Tensor actual_demand(long absolute) const;   // n x 1
  tc::Tensor actual_od(long absolute) const;       // n x n
};

/// Max in/out degree over the reference days, plus one.
DegreeScale compute_degree_scale(const GraphSequence& seq, std::span<const int> days);

}  // namespace odflow
