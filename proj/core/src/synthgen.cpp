#include "odflow/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include "json.hpp"
#include "odflow/errors.hpp"

namespace odflow {

namespace {

constexpr int kSlotsPerDay = 24;

std::int64_t parse_date(const std::string& text) {
  const auto t = parse_timestamp(text + " 00:00:00");
  if (!t) throw ConfigError("invalid start date '" + text + "' (expected YYYY-MM-DD)");
  return day_number(*t);
}

bool is_weekend(std::int64_t day) { return day_of_week(day) >= 5; }

}  // namespace

void SynthConfig::validate() const {
  if (rows < 1 || cols < 1) throw ConfigError("synthetic grid needs at least one cell");
  if (days < 1) throw ConfigError("synthetic data needs at least one day");
  if (!(cell_km > 0.0)) throw ConfigError("cell size must be positive");
  for (double v : {background, morning, evening, return_rate, weekend_multiplier}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("intensities must be finite and >= 0");
  }
  if (return_lag < 1) throw ConfigError("return lag must be at least one slot");
  const std::size_t n = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  auto check_cells = [&](const std::vector<std::size_t>& cells, const char* what) {
    for (std::size_t c : cells) {
      if (c >= n) throw ConfigError(std::string(what) + " cell " + std::to_string(c + 1) + " is outside the grid");
    }
  };
  check_cells(residential, "residential");
  check_cells(commercial, "commercial");
  for (const EventShock& e : events) {
    check_cells(e.cells, "event");
    if (e.first_slot < 1 || e.last_slot > kSlotsPerDay || e.first_slot > e.last_slot) {
      throw ConfigError("event slot range is invalid");
    }
    if (!(e.multiplier >= 0.0)) throw ConfigError("event multiplier must be >= 0");
  }
  parse_date(start_date);
}

SynthConfig synth_preset(const std::string& name, int rows, int cols, int days, std::uint64_t seed) {
  SynthConfig c;
  c.rows = rows;
  c.cols = cols;
  c.days = days;
  c.seed = seed;
  const std::size_t n = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  // Residential cells on the west and east edges, commercial in the middle
  // column band.
  for (std::size_t p = 0; p < n; ++p) {
    const int col = static_cast<int>(p % static_cast<std::size_t>(cols));
    const int row = static_cast<int>(p / static_cast<std::size_t>(cols));
    if ((col == 0 || col == cols - 1) && row % 2 == 0) c.residential.push_back(p);
    else if (col == cols / 2 && row >= rows / 4 && row <= rows - 1 - rows / 4) c.commercial.push_back(p);
  }
  if (c.residential.empty()) c.residential.push_back(0);
  if (c.commercial.empty()) c.commercial.push_back(n - 1);

  c.background = 0.02;
  c.morning = 240.0;
  c.evening = 160.0;
  c.return_rate = 0.5;
  c.return_lag = 6;
  c.weekend_multiplier = 0.15;

  if (name == "commuter") return c;
  if (name != "commuter+events") {
    throw ConfigError("unknown preset '" + name + "' (expected commuter or commuter+events)");
  }
  // One morning shock per day on a random half of the residential cells.
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> mult(0.2, 2.5);
  for (int day = 0; day < days; ++day) {
    EventShock e;
    e.day = day;
    e.first_slot = 8;
    e.last_slot = 10;
    for (std::size_t cell : c.residential) {
      if (rng() & 1U) e.cells.push_back(cell);
    }
    e.multiplier = mult(rng);
    if (!e.cells.empty()) c.events.push_back(std::move(e));
  }
  return c;
}

SynthConfig synth_config_from_json(const std::string& text, SynthConfig c) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_object()) throw ConfigError("synthetic config must be a JSON object");
    auto read = [&](const char* key, auto& out) {
      if (j.contains(key)) out = j.at(key).get<std::decay_t<decltype(out)>>();
    };
    read("rows", c.rows);
    read("cols", c.cols);
    read("cell_km", c.cell_km);
    if (j.contains("northwest")) c.northwest = {j.at("northwest").at(0).get<double>(), j.at("northwest").at(1).get<double>()};
    read("days", c.days);
    read("start_date", c.start_date);
    read("seed", c.seed);
    read("residential", c.residential);
    read("commercial", c.commercial);
    read("background", c.background);
    read("morning", c.morning);
    read("evening", c.evening);
    read("return_rate", c.return_rate);
    read("return_lag", c.return_lag);
    read("weekend_multiplier", c.weekend_multiplier);
    if (j.contains("events")) {
      c.events.clear();
      for (const auto& e : j.at("events")) {
        c.events.push_back({e.at("day").get<int>(), e.at("first_slot").get<int>(),
                            e.at("last_slot").get<int>(), e.at("cells").get<std::vector<std::size_t>>(),
                            e.at("multiplier").get<double>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid synthetic config: ") + e.what());
  }
  return c;
}

BoundingBox synth_bbox(const SynthConfig& config) {
  return bbox_from_extent(config.northwest, config.rows * config.cell_km, config.cols * config.cell_km);
}

std::vector<TripRecord> generate_trips(const SynthConfig& config) {
  config.validate();
  const GridSpec grid = build_grid(synth_bbox(config), config.cell_km);
  if (grid.rows != config.rows || grid.cols != config.cols) {
    throw std::logic_error("synthetic bbox does not reproduce the requested grid");
  }
  const std::size_t n = grid.size();
  const std::int64_t first_day = parse_date(config.start_date);
  const long total_slots = static_cast<long>(config.days) * kSlotsPerDay;

  std::vector<std::uint8_t> is_res(n, 0), is_com(n, 0);
  for (std::size_t c : config.residential) is_res[c] = 1;
  for (std::size_t c : config.commercial) is_com[c] = 1;

  // realized[abs % (lag + 1)] holds the counts of slot abs, for the return term
  const std::size_t ring = static_cast<std::size_t>(config.return_lag) + 1;
  std::vector<std::vector<std::int64_t>> realized(ring, std::vector<std::int64_t>(n * n, 0));

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.01, 0.99);
  std::vector<TripRecord> trips;
  std::vector<double> shock(n);

  for (long abs = 0; abs < total_slots; ++abs) {
    const int day = static_cast<int>(abs / kSlotsPerDay);
    const int slot = static_cast<int>(abs % kSlotsPerDay) + 1;
    const std::int64_t day_num = first_day + day;
    const double commute_scale = is_weekend(day_num) ? config.weekend_multiplier : 1.0;
    std::fill(shock.begin(), shock.end(), 1.0);
    for (const EventShock& e : config.events) {
      if (e.day != day || slot < e.first_slot || slot > e.last_slot) continue;
      for (std::size_t c : e.cells) shock[c] *= e.multiplier;
    }
    const auto& past = realized[static_cast<std::size_t>((abs + 1) % static_cast<long>(ring))];
    const bool has_past = abs >= config.return_lag;
    auto& now = realized[static_cast<std::size_t>(abs % static_cast<long>(ring))];

    std::vector<TripRecord> slot_trips;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double rate = 0.0;
        if (i != j && slot >= 7 && slot <= 22) rate += config.background;
        if (is_res[i] && is_com[j] && slot >= 8 && slot <= 10) rate += config.morning * commute_scale;
        if (is_com[i] && is_res[j] && slot >= 17 && slot <= 19) rate += config.evening * commute_scale;
        rate *= shock[i];
        if (has_past) rate += config.return_rate * static_cast<double>(past[j * n + i]);
        std::int64_t count = 0;
        if (rate > 0.0) count = std::poisson_distribution<std::int64_t>(rate)(rng);
        now[i * n + j] = count;
        for (std::int64_t k = 0; k < count; ++k) {
          TripRecord r;
          const LatLon o{grid.bbox.max_lat - (static_cast<double>(i / grid.cols) + unit(rng)) * grid.lat_step_deg,
                         grid.bbox.min_lon + (static_cast<double>(i % grid.cols) + unit(rng)) * grid.lon_step_deg};
          const LatLon d{grid.bbox.max_lat - (static_cast<double>(j / grid.cols) + unit(rng)) * grid.lat_step_deg,
                         grid.bbox.min_lon + (static_cast<double>(j % grid.cols) + unit(rng)) * grid.lon_step_deg};
          const auto second = static_cast<Timestamp>(unit(rng) * 3600.0);
          r.pickup_time = (day_num * 86400) + static_cast<Timestamp>(slot - 1) * 3600 + second;
          r.pickup_lat = o.lat;
          r.pickup_lon = o.lon;
          r.dropoff_lat = d.lat;
          r.dropoff_lon = d.lon;
          r.passenger_count = 1;
          slot_trips.push_back(r);
        }
      }
    }
    std::stable_sort(slot_trips.begin(), slot_trips.end(),
                     [](const TripRecord& a, const TripRecord& b) { return a.pickup_time < b.pickup_time; });
    trips.insert(trips.end(), slot_trips.begin(), slot_trips.end());
  }
  return trips;
}

void write_synth_csv(std::ostream& out, const SynthConfig& config) {
  write_trips_csv(out, generate_trips(config));
}

}  // namespace odflow
