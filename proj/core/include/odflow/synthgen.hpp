#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "odflow/geogrid.hpp"
#include "odflow/ingest.hpp"

namespace odflow {

/// Multiplies the rates of every flow leaving `cells` during slots
/// [first_slot, last_slot] of `day`.
struct EventShock {
  int day = 0;          // 0-based
  int first_slot = 1;   // 1-based, inclusive
  int last_slot = 1;
  std::vector<std::size_t> cells;  // 0-based positions
  double multiplier = 1.0;
};

struct SynthConfig {
  int rows = 5;
  int cols = 5;
  double cell_km = 2.5;
  LatLon northwest{40.80, -74.02};
  int days = 28;
  std::string start_date = "2016-02-01";
  std::uint64_t seed = 7;

  std::vector<std::size_t> residential;  // 0-based positions
  std::vector<std::size_t> commercial;

  double background = 0.0;      // rate per ordered pair per slot, slots 7-22
  double morning = 0.0;         // per residential->commercial pair, slots 8-10
  double evening = 0.0;         // per commercial->residential pair, slots 17-19
  double return_rate = 0.0;     // lambda_ret: share of a realized flow that returns
  int return_lag = 6;           // slots until the return
  double weekend_multiplier = 1.0;  // on morning and evening flows, Saturday and Sunday
  std::vector<EventShock> events;

  /// Throws ConfigError for negative intensities or cells outside the grid.
  void validate() const;
};

/// "commuter" or "commuter+events". Event shocks are drawn from the seed.
SynthConfig synth_preset(const std::string& name, int rows, int cols, int days, std::uint64_t seed);

/// JSON object with the SynthConfig field names; absent keys keep `base`.
SynthConfig synth_config_from_json(const std::string& text, SynthConfig base = {});

/// The bbox whose grid at cell_km has exactly rows x cols cells.
BoundingBox synth_bbox(const SynthConfig& config);

/// Poisson trips for every (origin, destination, slot), with coordinates
/// uniform inside the cells and times uniform inside the slot.
std::vector<TripRecord> generate_trips(const SynthConfig& config);

void write_synth_csv(std::ostream& out, const SynthConfig& config);

}  // namespace odflow
