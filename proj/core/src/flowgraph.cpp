#include "odflow/flowgraph.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>

namespace odflow {

SlotGraph SlotGraph::from_entries(SlotKey key, std::size_t n, std::vector<OdEntry> entries) {
  std::sort(entries.begin(), entries.end(), [](const OdEntry& a, const OdEntry& b) {
    return a.origin != b.origin ? a.origin < b.origin : a.dest < b.dest;
  });
  SlotGraph g(key, n);
  for (const auto& e : entries) {
    if (e.origin >= n || e.dest >= n) {
      throw std::invalid_argument("OD entry references cell outside the grid");
    }
    if (e.count < 0) throw std::invalid_argument("OD entry has a negative count");
    if (e.count == 0) continue;
    if (!g.entries_.empty() && g.entries_.back().origin == e.origin &&
        g.entries_.back().dest == e.dest) {
      g.entries_.back().count += e.count;
    } else {
      g.entries_.push_back(e);
    }
  }
  return g;
}

std::int64_t SlotGraph::weight(std::size_t i, std::size_t j) const {
  const OdEntry probe{static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), 0};
  auto it = std::lower_bound(entries_.begin(), entries_.end(), probe,
                             [](const OdEntry& a, const OdEntry& b) {
                               return a.origin != b.origin ? a.origin < b.origin
                                                           : a.dest < b.dest;
                             });
  if (it != entries_.end() && it->origin == i && it->dest == j) return it->count;
  return 0;
}

std::int64_t SlotGraph::total() const {
  std::int64_t sum = 0;
  for (const auto& e : entries_) sum += e.count;
  return sum;
}

std::vector<double> SlotGraph::dense() const {
  std::vector<double> m(n_ * n_, 0.0);
  for (const auto& e : entries_) m[e.origin * n_ + e.dest] = static_cast<double>(e.count);
  return m;
}

GraphSequence build_slot_graphs(const std::vector<TripRecord>& trips, const GridSpec& grid,
                                int slot_minutes, WeightMode mode, GraphBuildStats* stats,
                                std::optional<std::int64_t> start_day) {
  if (slot_minutes <= 0 || 1440 % slot_minutes != 0) {
    throw std::invalid_argument("slot length must divide 1440 minutes");
  }
  GraphSequence seq;
  seq.cells = grid.size();
  seq.slots_per_day = 1440 / slot_minutes;
  seq.start_day = start_day.value_or(dataset_start_day(trips));

  GraphBuildStats local;
  // (absolute slot, origin, dest) -> weight; std::map keeps output ordering
  // independent of insertion order.
  std::map<std::size_t, std::vector<OdEntry>> buckets;
  int last_day = -1;
  for (const auto& trip : trips) {
    const auto from = assign_cell(grid, trip.pickup_lat, trip.pickup_lon);
    const auto to = assign_cell(grid, trip.dropoff_lat, trip.dropoff_lon);
    if (!from || !to) {
      ++local.out_of_bbox;
      continue;
    }
    const SlotKey key = slot_of(trip.pickup_time, slot_minutes, seq.start_day);
    const std::size_t abs = static_cast<std::size_t>(key.day_index) *
                                static_cast<std::size_t>(seq.slots_per_day) +
                            static_cast<std::size_t>(key.slot - 1);
    const std::int64_t w = mode == WeightMode::Passengers ? trip.passenger_count : 1;
    buckets[abs].push_back({static_cast<std::uint32_t>(from->position()),
                            static_cast<std::uint32_t>(to->position()), w});
    last_day = std::max(last_day, key.day_index);
    ++local.accepted;
  }

  seq.num_days = last_day + 1;
  const std::size_t total = static_cast<std::size_t>(seq.num_days) *
                            static_cast<std::size_t>(seq.slots_per_day);
  seq.graphs.reserve(total);
  for (std::size_t abs = 0; abs < total; ++abs) {
    const int day = static_cast<int>(abs / static_cast<std::size_t>(seq.slots_per_day));
    SlotKey key;
    key.day_index = day;
    key.slot = static_cast<int>(abs % static_cast<std::size_t>(seq.slots_per_day)) + 1;
    key.day_of_week = day_of_week(seq.start_day + day);
    auto it = buckets.find(abs);
    if (it == buckets.end()) {
      seq.graphs.emplace_back(key, seq.cells);
    } else {
      seq.graphs.push_back(SlotGraph::from_entries(key, seq.cells, std::move(it->second)));
    }
  }
  if (stats) *stats = local;
  return seq;
}

std::vector<std::size_t> forward_neighbors(const SlotGraph& g, std::size_t i) {
  std::vector<std::size_t> out;
  for (const auto& e : g.entries()) {
    if (e.origin == i && e.dest != i) out.push_back(e.dest);
  }
  return out;
}

std::vector<std::size_t> backward_neighbors(const SlotGraph& g, std::size_t i) {
  std::vector<std::size_t> out;
  for (const auto& e : g.entries()) {
    if (e.dest == i && e.origin != i) out.push_back(e.origin);
  }
  return out;
}

Degrees degrees(const SlotGraph& g, std::size_t k) {
  Degrees d;
  for (const auto& e : g.entries()) {
    if (e.origin == k) d.out += e.count;
    if (e.dest == k) d.in += e.count;
  }
  return d;
}

std::vector<Degrees> all_degrees(const SlotGraph& g) {
  std::vector<Degrees> d(g.cells());
  for (const auto& e : g.entries()) {
    d[e.origin].out += e.count;
    d[e.dest].in += e.count;
  }
  return d;
}

std::vector<double> demand_vector(const SlotGraph& g) {
  std::vector<double> delta(g.cells(), 0.0);
  for (const auto& e : g.entries()) delta[e.origin] += static_cast<double>(e.count);
  return delta;
}

}  // namespace odflow
