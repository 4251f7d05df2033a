#include "odflow/graph_store.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "odflow/errors.hpp"

namespace odflow {

using nlohmann::json;

std::string to_json_line(const SlotGraph& g) {
  std::string out = "{\"day\":" + std::to_string(g.key().day_index) +
                    ",\"slot\":" + std::to_string(g.key().slot) +
                    ",\"dow\":" + std::to_string(g.key().day_of_week) + ",\"od\":[";
  bool first = true;
  for (const auto& e : g.entries()) {
    if (!first) out += ',';
    first = false;
    out += '[' + std::to_string(e.origin + 1) + ',' + std::to_string(e.dest + 1) + ',' +
           std::to_string(e.count) + ']';
  }
  out += "]}";
  return out;
}

SlotGraph slot_graph_from_json_line(std::string_view line, std::size_t cells) {
  const json j = json::parse(line);
  SlotKey key;
  key.day_index = j.at("day").get<int>();
  key.slot = j.at("slot").get<int>();
  key.day_of_week = j.at("dow").get<int>();
  std::vector<OdEntry> entries;
  for (const auto& t : j.at("od")) {
    const auto i = t.at(0).get<std::int64_t>();
    const auto k = t.at(1).get<std::int64_t>();
    if (i < 1 || k < 1 || static_cast<std::size_t>(i) > cells ||
        static_cast<std::size_t>(k) > cells) {
      throw std::runtime_error("graph store cell index out of range");
    }
    entries.push_back({static_cast<std::uint32_t>(i - 1), static_cast<std::uint32_t>(k - 1),
                       t.at(2).get<std::int64_t>()});
  }
  return SlotGraph::from_entries(key, cells, std::move(entries));
}

std::filesystem::path meta_path(const std::filesystem::path& store) {
  return std::filesystem::path(store.string() + ".meta.json");
}

std::string_view to_string(WeightMode mode) {
  return mode == WeightMode::Passengers ? "passengers" : "trips";
}

WeightMode parse_weight_mode(std::string_view text) {
  if (text == "passengers") return WeightMode::Passengers;
  if (text == "trips") return WeightMode::Trips;
  throw ConfigError("weight mode must be 'passengers' or 'trips'");
}

void write_graph_store(const std::filesystem::path& store, const GraphStore& data) {
  {
    std::ofstream out(store, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write graph store " + store.string());
    for (const auto& g : data.sequence.graphs) out << to_json_line(g) << '\n';
  }
  json meta = json::object();
  meta["format"] = "odflow-graphs";
  meta["version"] = 1;
  meta["bbox"] = {data.grid.bbox.min_lat, data.grid.bbox.min_lon, data.grid.bbox.max_lat,
                  data.grid.bbox.max_lon};
  meta["cell_km"] = data.grid.cell_km;
  meta["rows"] = data.grid.rows;
  meta["cols"] = data.grid.cols;
  meta["slot_minutes"] = data.sequence.slot_minutes();
  meta["start_day"] = data.sequence.start_day;
  meta["start_date"] = format_timestamp(data.sequence.start_day * 86400).substr(0, 10);
  meta["days"] = data.sequence.num_days;
  meta["weight"] = std::string(to_string(data.weight));
  std::ofstream out(meta_path(store), std::ios::binary);
  if (!out) throw std::runtime_error("cannot write graph store metadata");
  out << meta.dump(2) << '\n';
}

GraphStore read_graph_store(const std::filesystem::path& store) {
  std::ifstream meta_in(meta_path(store));
  if (!meta_in) {
    throw ConfigError("graph store metadata " + meta_path(store).string() + " not found");
  }
  const json meta = json::parse(meta_in);
  if (meta.value("format", "") != "odflow-graphs") {
    throw ConfigError("unrecognised graph store metadata format");
  }
  GraphStore data;
  const auto& b = meta.at("bbox");
  data.grid = build_grid({b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                          b.at(3).get<double>()},
                         meta.at("cell_km").get<double>());
  if (data.grid.rows != meta.at("rows").get<int>() ||
      data.grid.cols != meta.at("cols").get<int>()) {
    throw ConfigError("graph store metadata grid dimensions are inconsistent");
  }
  data.weight = parse_weight_mode(meta.at("weight").get<std::string>());

  GraphSequence& seq = data.sequence;
  seq.cells = data.grid.size();
  const int slot_minutes = meta.at("slot_minutes").get<int>();
  if (slot_minutes <= 0 || 1440 % slot_minutes != 0) {
    throw ConfigError("graph store slot length must divide 1440");
  }
  seq.slots_per_day = 1440 / slot_minutes;
  seq.start_day = meta.at("start_day").get<std::int64_t>();
  seq.num_days = meta.at("days").get<int>();

  std::ifstream in(store);
  if (!in) throw ConfigError("cannot open graph store " + store.string());
  const std::size_t expected = static_cast<std::size_t>(seq.num_days) *
                               static_cast<std::size_t>(seq.slots_per_day);
  seq.graphs.assign(expected, SlotGraph());
  std::vector<bool> seen(expected, false);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    SlotGraph g = slot_graph_from_json_line(line, seq.cells);
    const auto& k = g.key();
    if (k.day_index < 0 || k.day_index >= seq.num_days || k.slot < 1 ||
        k.slot > seq.slots_per_day) {
      throw std::runtime_error("graph store record outside the declared calendar");
    }
    const std::size_t abs = static_cast<std::size_t>(k.day_index) *
                                static_cast<std::size_t>(seq.slots_per_day) +
                            static_cast<std::size_t>(k.slot - 1);
    seq.graphs[abs] = std::move(g);
    seen[abs] = true;
  }
  for (std::size_t abs = 0; abs < expected; ++abs) {
    if (!seen[abs]) throw std::runtime_error("graph store is missing a (day, slot) record");
  }
  return data;
}

}  // namespace odflow
