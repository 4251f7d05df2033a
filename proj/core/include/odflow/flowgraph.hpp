#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "odflow/geogrid.hpp"
#include "odflow/ingest.hpp"

namespace odflow {

enum class WeightMode { Passengers, Trips };

struct OdEntry {
  std::uint32_t origin = 0;  // 0-based cell position
  std::uint32_t dest = 0;
  std::int64_t count = 0;

  friend bool operator==(const OdEntry&, const OdEntry&) = default;
};

/// OD request matrix for one (day, slot). Stored as sorted sparse triplets;
/// absent pairs have weight 0.
class SlotGraph {
 public:
  SlotGraph() = default;
  SlotGraph(SlotKey key, std::size_t n) : key_(key), n_(n) {}

  /// Duplicates are summed and zero entries dropped. Throws
  /// std::invalid_argument on negative counts or out-of-range cells.
  static SlotGraph from_entries(SlotKey key, std::size_t n, std::vector<OdEntry> entries);

  const SlotKey& key() const { return key_; }
  std::size_t cells() const { return n_; }
  const std::vector<OdEntry>& entries() const { return entries_; }

  std::int64_t weight(std::size_t i, std::size_t j) const;
  std::int64_t total() const;
  /// Row-major n*n.
  std::vector<double> dense() const;

  friend bool operator==(const SlotGraph&, const SlotGraph&) = default;

 private:
  SlotKey key_;
  std::size_t n_ = 0;
  std::vector<OdEntry> entries_;
};

/// Every (day, slot) from dataset day 0 to the last day, in chronological
/// order: graphs[day * slots_per_day + slot - 1].
struct GraphSequence {
  std::size_t cells = 0;
  int slots_per_day = 24;
  int num_days = 0;
  std::int64_t start_day = 0;  // day number of dataset day 0
  std::vector<SlotGraph> graphs;

  int slot_minutes() const { return 1440 / slots_per_day; }
  const SlotGraph& at(int day, int slot) const {
    return graphs[static_cast<std::size_t>(day) * static_cast<std::size_t>(slots_per_day) +
                  static_cast<std::size_t>(slot - 1)];
  }
};

struct GraphBuildStats {
  std::size_t accepted = 0;
  std::size_t out_of_bbox = 0;
};

/// Aggregates trips into per-slot OD graphs. Slots without trips are present
/// as empty graphs. Trips with an endpoint outside the grid bbox are counted
/// in `stats` and skipped. `start_day` defaults to the earliest pickup day.
GraphSequence build_slot_graphs(const std::vector<TripRecord>& trips, const GridSpec& grid,
                                int slot_minutes, WeightMode mode = WeightMode::Passengers,
                                GraphBuildStats* stats = nullptr,
                                std::optional<std::int64_t> start_day = std::nullopt);

/// f_i: cells j != i with Delta_ij > 0, ascending.
std::vector<std::size_t> forward_neighbors(const SlotGraph& g, std::size_t i);
/// b_i: cells j != i with Delta_ji > 0, ascending.
std::vector<std::size_t> backward_neighbors(const SlotGraph& g, std::size_t i);

struct Degrees {
  std::int64_t in = 0;
  std::int64_t out = 0;
  friend bool operator==(const Degrees&, const Degrees&) = default;
};

Degrees degrees(const SlotGraph& g, std::size_t k);
std::vector<Degrees> all_degrees(const SlotGraph& g);

/// delta_i = sum_j Delta_ij.
std::vector<double> demand_vector(const SlotGraph& g);

}  // namespace odflow
