#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "odflow/flowgraph.hpp"
#include "odflow/geogrid.hpp"

namespace odflow {

// On-disk graph store: a JSON-lines file with one record per (day, slot),
//   {"day":d,"slot":t,"dow":w,"od":[[i,j,c],...]}
// with 1-based cell indices, plus a sidecar "<store>.meta.json" holding the
// grid and calendar needed to interpret it.

struct GraphStore {
  GridSpec grid;
  WeightMode weight = WeightMode::Passengers;
  GraphSequence sequence;
};

std::string to_json_line(const SlotGraph& g);
SlotGraph slot_graph_from_json_line(std::string_view line, std::size_t cells);

std::filesystem::path meta_path(const std::filesystem::path& store);

void write_graph_store(const std::filesystem::path& store, const GraphStore& data);
GraphStore read_graph_store(const std::filesystem::path& store);

std::string_view to_string(WeightMode mode);
WeightMode parse_weight_mode(std::string_view text);

}  // namespace odflow
