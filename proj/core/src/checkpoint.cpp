#include "odflow/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "odflow/errors.hpp"

namespace odflow {

using json = nlohmann::ordered_json;

namespace {

json model_to_json(const ModelConfig& m) {
  json j;
  j["embed_dim"] = m.embed_dim;
  j["hidden_dim"] = m.hidden_dim;
  j["heads"] = m.heads;
  j["h"] = m.history_hours;
  j["demand_hidden"] = m.demand_hidden;
  j["leaky_slope"] = m.leaky_slope;
  j["channels"] = channel_list(m);
  j["historical_average"] = m.use_historical_average;
  return j;
}

json train_to_json(const TrainConfig& c) {
  json j;
  j["model"] = model_to_json(c.model);
  j["epochs"] = c.epochs;
  j["lr"] = c.learning_rate;
  j["seed"] = c.seed;
  j["train_fraction"] = c.train_fraction;
  j["validation_fraction"] = c.validation_fraction;
  j["optimizer"] = to_string(c.optimizer);
  j["task"] = to_string(c.task);
  j["demand_weight"] = c.demand_weight;
  j["od_weight"] = c.od_weight;
  j["geo_threshold_km"] = c.geo_threshold_km;
  return j;
}

template <typename T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

ModelConfig model_from_json(const json& j, ModelConfig m) {
  read_if(j, "embed_dim", m.embed_dim);
  read_if(j, "hidden_dim", m.hidden_dim);
  read_if(j, "heads", m.heads);
  read_if(j, "h", m.history_hours);
  read_if(j, "demand_hidden", m.demand_hidden);
  read_if(j, "leaky_slope", m.leaky_slope);
  if (j.contains("channels")) apply_channel_list(m, j.at("channels").get<std::string>());
  read_if(j, "historical_average", m.use_historical_average);
  return m;
}

TrainConfig train_from_json(const json& j, TrainConfig c) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (j.contains("model")) c.model = model_from_json(j.at("model"), c.model);
  read_if(j, "epochs", c.epochs);
  read_if(j, "lr", c.learning_rate);
  read_if(j, "seed", c.seed);
  read_if(j, "train_fraction", c.train_fraction);
  read_if(j, "validation_fraction", c.validation_fraction);
  if (j.contains("optimizer")) c.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
  if (j.contains("task")) c.task = parse_task(j.at("task").get<std::string>());
  read_if(j, "demand_weight", c.demand_weight);
  read_if(j, "od_weight", c.od_weight);
  read_if(j, "geo_threshold_km", c.geo_threshold_km);
  return c;
}

}  // namespace

std::string config_json(const TrainConfig& config) { return train_to_json(config).dump(); }

TrainConfig train_config_from_json(const std::string& text, TrainConfig base) {
  try {
    return train_from_json(json::parse(text), base);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
}

std::string to_json(const Checkpoint& c) {
  json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["config"] = train_to_json(c.config);
  json grid;
  grid["bbox"] = {c.grid.bbox.min_lat, c.grid.bbox.min_lon, c.grid.bbox.max_lat, c.grid.bbox.max_lon};
  grid["cell_km"] = c.grid.cell_km;
  grid["rows"] = c.grid.rows;
  grid["cols"] = c.grid.cols;
  grid["slots_per_day"] = c.slots_per_day;
  grid["weight"] = std::string(to_string(c.weight));
  grid["geo_threshold_km"] = c.geo_threshold_km;
  j["grid"] = grid;
  j["degree_scale"] = {{"in", c.degree_scale.in}, {"out", c.degree_scale.out}};
  j["epoch"] = c.epoch;
  j["rng"] = c.rng_state;
  json tensors = json::array();
  for (const auto& p : c.params.all()) {
    for (double v : p.value.values()) {
      if (!std::isfinite(v)) throw std::runtime_error("parameter " + p.name + " is not finite");
    }
    json t;
    t["name"] = p.name;
    t["shape"] = {p.value.rows(), p.value.cols()};
    t["values"] = p.value.storage();
    tensors.push_back(std::move(t));
  }
  j["tensors"] = std::move(tensors);
  return j.dump(1) + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
  Checkpoint c;
  try {
    const json j = json::parse(text);
    if (j.value("format", "") != kCheckpointFormat) throw ConfigError("not an odflow checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw ConfigError("unsupported checkpoint version " + j.at("version").dump());
    }
    c.config = train_from_json(j.at("config"), TrainConfig{});
    const json& g = j.at("grid");
    const auto& b = g.at("bbox");
    c.grid = build_grid({b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                         b.at(3).get<double>()},
                        g.at("cell_km").get<double>());
    if (c.grid.rows != g.at("rows").get<int>() || c.grid.cols != g.at("cols").get<int>()) {
      throw ConfigError("checkpoint grid dimensions are inconsistent with its bbox");
    }
    c.slots_per_day = g.at("slots_per_day").get<int>();
    c.weight = parse_weight_mode(g.at("weight").get<std::string>());
    c.geo_threshold_km = g.at("geo_threshold_km").get<double>();
    c.degree_scale = {j.at("degree_scale").at("in").get<double>(),
                      j.at("degree_scale").at("out").get<double>()};
    c.epoch = j.at("epoch").get<int>();
    c.rng_state = j.at("rng").get<std::string>();
    for (const auto& t : j.at("tensors")) {
      const auto rows = t.at("shape").at(0).get<std::size_t>();
      const auto cols = t.at("shape").at(1).get<std::size_t>();
      auto values = t.at("values").get<std::vector<double>>();
      if (values.size() != rows * cols) {
        throw ConfigError("tensor " + t.at("name").get<std::string>() + " has " +
                          std::to_string(values.size()) + " values for shape " +
                          std::to_string(rows) + "x" + std::to_string(cols));
      }
      c.params.add(t.at("name").get<std::string>(), tc::Tensor(rows, cols, std::move(values)));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const std::string text = to_json(checkpoint);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << text;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("checkpoint " + path.string() + " not found");
  std::ostringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_json(buf.str());
}

void check_compatible(const Checkpoint& checkpoint, const GraphStore& store) {
  const GridSpec& a = checkpoint.grid;
  const GridSpec& b = store.grid;
  if (a.rows != b.rows || a.cols != b.cols || a.cell_km != b.cell_km || !(a.bbox == b.bbox)) {
    throw ConfigError("checkpoint grid " + std::to_string(a.rows) + "x" + std::to_string(a.cols) +
                      " @ " + std::to_string(a.cell_km) + " km does not match the store grid " +
                      std::to_string(b.rows) + "x" + std::to_string(b.cols) + " @ " +
                      std::to_string(b.cell_km) + " km");
  }
  if (checkpoint.slots_per_day != store.sequence.slots_per_day) {
    throw ConfigError("checkpoint uses " + std::to_string(checkpoint.slots_per_day) +
                      " slots per day but the store has " +
                      std::to_string(store.sequence.slots_per_day));
  }
}

}  // namespace odflow
