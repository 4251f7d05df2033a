#pragma once

#include <random>
#include <string_view>
#include <vector>

#include "odflow/ingest.hpp"
#include "odflow/model_config.hpp"
#include "odflow/params.hpp"
#include "odflow/tensor.hpp"

namespace odflow {

// Temporal attention: four channels of historical slots, each attended by
// scaled dot attention, summed per channel and fused per cell.

enum class ChannelKind { PrevHour, NextHour, SameHour, Recent };

inline constexpr int kHistoryDays = 7;

std::string_view to_string(ChannelKind kind);

struct ChannelSpec {
  ChannelKind kind = ChannelKind::SameHour;
  int h = 6;  // only used by Recent
};

/// Absolute slot index: day * slots_per_day + slot - 1.
long absolute_slot(const SlotKey& key, int slots_per_day);
/// Inverse of absolute_slot, with day_of_week derived from `reference`.
SlotKey slot_key_at(long absolute, int slots_per_day, const SlotKey& reference);

/// Historical slots feeding one channel for `target`. Linear channels list
/// days d-1 .. d-7 in that order; the recent channel lists the h preceding
/// slots oldest first. Throws std::out_of_range when history is missing.
std::vector<SlotKey> channel_slots(const SlotKey& target, const ChannelSpec& spec,
                                   int slots_per_day);

/// Enabled channels of a config, in fusion order.
std::vector<ChannelSpec> active_channels(const ModelConfig& config);

/// Earliest absolute slot that has complete history for every enabled channel.
long first_eligible_slot(const ModelConfig& config, int slots_per_day);

struct AttentionVars {
  tc::Var w_q, w_k, w_v;  // z' x z'
};

struct TemporalVars {
  tc::Var w_query_in;  // z x z': lifts the target-slot initial embedding
  AttentionVars slot_attention;
  AttentionVars fusion;
};

void register_temporal_params(ParamStore& store, const ModelConfig& config, std::mt19937_64& rng);
TemporalVars bind_temporal(tc::Tape& tape, ParamStore& store);

/// softmax((E_t W^Q)(E_h W^K)^T / sqrt(z')) (E_h W^V). When `weights` is set
/// it receives the n x n normalized similarity matrix.
tc::Var scaled_dot_attend(tc::Var target, tc::Var history, const AttentionVars& vars,
                          tc::Tensor* weights = nullptr);

struct TemporalTrace {
  std::vector<tc::Tensor> slot_weights;  // one n x n matrix per attended slot
  tc::Tensor fusion_weights;             // n x channels
  std::vector<tc::Tensor> channel_representations;
};

/// Sums attended history within each channel, then fuses the channels per
/// cell using the target embedding as query. `query` is n x z'; `channels`
/// holds the spatial embeddings of each channel's slots.
tc::Var temporal_layer(const TemporalVars& vars, tc::Var query,
                       const std::vector<std::vector<tc::Var>>& channels,
                       TemporalTrace* trace = nullptr);

/// Per-cell attention over channel representations (each n x z').
tc::Var fuse_channels(const AttentionVars& vars, tc::Var query,
                      const std::vector<tc::Var>& representations,
                      tc::Tensor* weights = nullptr);

}  // namespace odflow
