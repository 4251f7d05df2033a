#include "odflow/dataset.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "odflow/temporal.hpp"

namespace odflow {

using tc::Tensor;

DegreeScale compute_degree_scale(const GraphSequence& seq, std::span<const int> days) {
  std::int64_t max_in = 0;
  std::int64_t max_out = 0;
  for (int day : days) {
    for (int slot = 1; slot <= seq.slots_per_day; ++slot) {
      for (const Degrees& d : all_degrees(seq.at(day, slot))) {
        max_in = std::max(max_in, d.in);
        max_out = std::max(max_out, d.out);
      }
    }
  }
  return {static_cast<double>(max_in) + 1.0, static_cast<double>(max_out) + 1.0};
}

Dataset Dataset::build(const GridSpec& grid, GraphSequence seq, std::span<const int> reference_days,
                       std::optional<double> geo_threshold_km) {
  if (seq.cells != grid.size()) {
    throw std::invalid_argument("graph sequence has " + std::to_string(seq.cells) +
                                " cells but the grid has " + std::to_string(grid.size()));
  }
  Dataset d;
  d.grid = grid;
  d.seq = std::move(seq);
  d.distances = build_distance_graph(grid);
  d.geo_threshold_km = geo_threshold_km.value_or(default_geo_threshold_km(grid.cell_km));
  d.geo = geographical_neighbors(d.distances, d.geo_threshold_km);
  d.codes = cell_codes(grid.rows, grid.cols);
  d.neighbors.reserve(d.seq.graphs.size());
  for (const SlotGraph& g : d.seq.graphs) d.neighbors.push_back(spatial_neighbors(g, d.distances, d.geo));
  d.degree_scale = compute_degree_scale(d.seq, reference_days);
  d.ha = HistoricalAverage::build(d.seq, reference_days);
  return d;
}

SlotKey Dataset::key_at(long absolute) const {
  if (absolute < 0) throw std::out_of_range("negative slot index");
  if (seq.graphs.empty()) {
    SlotKey ref{0, 1, day_of_week(seq.start_day)};
    return slot_key_at(absolute, seq.slots_per_day, ref);
  }
  return slot_key_at(absolute, seq.slots_per_day, seq.graphs.front().key());
}

const SlotGraph& Dataset::graph_at(long absolute) const {
  if (absolute < 0 || absolute >= total_slots()) {
    throw std::out_of_range("slot " + std::to_string(absolute) + " is outside the store (" +
                            std::to_string(total_slots()) + " slots)");
  }
  return seq.graphs[static_cast<std::size_t>(absolute)];
}

Tensor Dataset::degree_features_at(long absolute) const {
  return degree_features(graph_at(absolute), degree_scale);
}

Tensor Dataset::ha_demand(const SlotKey& key) const {
  return Tensor(cells(), 1, ha.demand(key.slot, key.day_of_week));
}

Tensor Dataset::ha_od(const SlotKey& key) const {
  return Tensor(cells(), cells(), ha.od(key.slot));
}

Tensor Dataset::actual_demand(long absolute) const {
  return Tensor(cells(), 1, demand_vector(graph_at(absolute)));
}

Tensor Dataset::actual_od(long absolute) const {
  return Tensor(cells(), cells(), graph_at(absolute).dense());
}

}  // namespace odflow
