#include "odflow/model_config.hpp"

#include <sstream>

#include "odflow/errors.hpp"

namespace odflow {

std::string to_string(Task task) {
  switch (task) {
    case Task::Both: return "both";
    case Task::Od: return "od";
    case Task::Demand: return "demand";
  }
  return "both";
}

Task parse_task(const std::string& text) {
  if (text == "both") return Task::Both;
  if (text == "od") return Task::Od;
  if (text == "demand") return Task::Demand;
  throw ConfigError("unknown task '" + text + "' (expected od, demand or both)");
}

void ModelConfig::validate() const {
  if (embed_dim < 1) throw ConfigError("embedding width must be positive");
  if (heads < 1) throw ConfigError("head count must be positive");
  if (demand_hidden < 1) throw ConfigError("demand hidden width must be positive");
  if (hidden_dim <= input_dim()) {
    throw ConfigError("hidden dim " + std::to_string(hidden_dim) + " must exceed the input dim " +
                      std::to_string(input_dim()) + " (5 x embed + 2)");
  }
  if (use_recent && history_hours < 1) throw ConfigError("h must be at least 1");
  if (channel_count() == 0) throw ConfigError("at least one temporal channel must be enabled");
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) throw ConfigError("leaky slope must be in [0, 1)");
}

void apply_channel_list(ModelConfig& config, const std::string& list) {
  config.use_prev_hour = config.use_next_hour = config.use_same_hour = config.use_recent = false;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "prev") config.use_prev_hour = true;
    else if (item == "next") config.use_next_hour = true;
    else if (item == "same") config.use_same_hour = true;
    else if (item == "recent") config.use_recent = true;
    else if (!item.empty()) throw ConfigError("unknown channel '" + item + "' (expected prev, next, same, recent)");
  }
}

std::string channel_list(const ModelConfig& config) {
  std::string out;
  auto append = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += ',';
    out += name;
  };
  append(config.use_prev_hour, "prev");
  append(config.use_next_hour, "next");
  append(config.use_same_hour, "same");
  append(config.use_recent, "recent");
  return out;
}

}  // namespace odflow
