#pragma once

#include <string>

namespace odflow {

enum class Task { Both, Od, Demand };

std::string to_string(Task task);
Task parse_task(const std::string& text);

struct ModelConfig {
  int embed_dim = 8;       // width of each categorical embedding table
  int hidden_dim = 64;     // z', projected embedding width
  int heads = 4;           // spatial attention heads
  int history_hours = 6;   // h, length of the recent (non-linear) channel
  int demand_hidden = 32;  // hidden width of the demand feed-forward head
  double leaky_slope = 0.2;

  bool use_prev_hour = true;
  bool use_next_hour = true;
  bool use_same_hour = true;
  bool use_recent = true;  // the non-linear channel
  bool use_historical_average = true;

  /// z = five categorical tables plus in/out degree.
  int input_dim() const { return 5 * embed_dim + 2; }
  int channel_count() const {
    return int(use_prev_hour) + int(use_next_hour) + int(use_same_hour) + int(use_recent);
  }

  /// Throws ConfigError if dimensions are inconsistent (z' must exceed z).
  void validate() const;
};

/// Applies a channel subset such as "prev,next,same,recent".
void apply_channel_list(ModelConfig& config, const std::string& list);
std::string channel_list(const ModelConfig& config);

}  // namespace odflow
