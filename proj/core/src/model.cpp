#include "odflow/model.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>

namespace odflow {

using tc::Tensor;
using tc::Var;

OdFlowModel::OdFlowModel(const ModelConfig& config, int rows, int cols, int slots_per_day,
                         std::mt19937_64& rng)
    : config_(config) {
  config_.validate();
  register_embedding_params(params_, config_, rows, cols, slots_per_day, rng);
  register_spatial_params(params_, config_, rng);
  register_temporal_params(params_, config_, rng);
  register_transfer_params(params_, config_, rng);
}

bool has_history(const ModelConfig& config, long target, int slots_per_day, long total_slots) {
  if (target < first_eligible_slot(config, slots_per_day)) return false;
  // next-hour on the previous day is the latest slot any channel reads,
  // apart from the recent channel which ends at target - 1
  long latest = target - 1;
  if (config.use_next_hour) latest = std::max(latest, target - slots_per_day + 1);
  return latest < total_slots;
}

ForwardResult OdFlowModel::forward(tc::Tape& tape, const Dataset& data, long target,
                                   ForwardTrace* trace) {
  const int S = data.slots_per_day();
  if (!has_history(config_, target, S, data.total_slots())) {
    const SlotKey first = data.key_at(first_eligible_slot(config_, S));
    throw std::out_of_range("slot " + std::to_string(target) +
                            " lacks channel history; the earliest valid target is day " +
                            std::to_string(first.day_index) + " slot " +
                            std::to_string(first.slot));
  }
  const SlotKey key = data.key_at(target);
  const double slope = config_.leaky_slope;

  const EmbeddingVars emb = bind_embedding(tape, params_);
  const SpatialVars spatial = bind_spatial(tape, params_, config_);
  const TemporalVars temporal = bind_temporal(tape, params_);
  const TransferVars transfer = bind_transfer(tape, params_);

  // Channels share slots only rarely, but the cache also keeps the trace
  // to one entry per slot.
  std::map<long, Var> spatial_cache;
  auto embed_slot = [&](long abs) {
    if (auto it = spatial_cache.find(abs); it != spatial_cache.end()) return it->second;
    const Var initial = initial_embedding(emb, data.codes, data.key_at(abs), data.degree_features_at(abs));
    SpatialTrace st;
    const Var out = spatial_layer(spatial, initial, data.neighbors[static_cast<std::size_t>(abs)],
                                  slope, trace ? &st : nullptr);
    if (trace != nullptr) trace->spatial.push_back(std::move(st));
    spatial_cache.emplace(abs, out);
    return out;
  };

  std::vector<std::vector<Var>> channels;
  for (const ChannelSpec& spec : active_channels(config_)) {
    std::vector<Var> slots;
    for (const SlotKey& k : channel_slots(key, spec, S)) slots.push_back(embed_slot(absolute_slot(k, S)));
    channels.push_back(std::move(slots));
  }

  // The target slot's flows are unknown, so its query uses zero degrees.
  const Var target_initial = initial_embedding(emb, data.codes, key, Tensor(data.cells(), 2));
  const Var query = tc::matmul(target_initial, temporal.w_query_in);
  const Var final_embedding =
      temporal_layer(temporal, query, channels, trace ? &trace->temporal : nullptr);

  const bool use_ha = config_.use_historical_average;
  ForwardResult r;
  r.final_embedding = final_embedding;
  r.demand = demand_head(transfer, final_embedding, data.ha_demand(key), use_ha, slope);
  r.probabilities = transfer_probabilities(transfer, final_embedding, slope);
  r.od = compose_od(r.demand, r.probabilities, data.ha_od(key), transfer.gate_od, use_ha);
  return r;
}

}  // namespace odflow
