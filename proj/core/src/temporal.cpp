#include "odflow/temporal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace odflow {

using tc::Tensor;
using tc::Var;

std::string_view to_string(ChannelKind kind) {
  switch (kind) {
    case ChannelKind::PrevHour: return "prev";
    case ChannelKind::NextHour: return "next";
    case ChannelKind::SameHour: return "same";
    case ChannelKind::Recent: return "recent";
  }
  return "unknown";
}

long absolute_slot(const SlotKey& key, int slots_per_day) {
  return static_cast<long>(key.day_index) * slots_per_day + (key.slot - 1);
}

SlotKey slot_key_at(long absolute, int slots_per_day, const SlotKey& reference) {
  SlotKey key;
  key.day_index = static_cast<int>(absolute / slots_per_day);
  key.slot = static_cast<int>(absolute % slots_per_day) + 1;
  const int shift = (key.day_index - reference.day_index) % 7;
  key.day_of_week = ((reference.day_of_week + shift) % 7 + 7) % 7;
  return key;
}

std::vector<SlotKey> channel_slots(const SlotKey& target, const ChannelSpec& spec,
                                   int slots_per_day) {
  if (spec.kind == ChannelKind::Recent && spec.h < 1) {
    throw std::invalid_argument("recent channel needs h >= 1");
  }
  const long a = absolute_slot(target, slots_per_day);
  const long day = slots_per_day;
  std::vector<long> abs;
  switch (spec.kind) {
    case ChannelKind::PrevHour:
      for (int k = 1; k <= kHistoryDays; ++k) abs.push_back(a - k * day - 1);
      break;
    case ChannelKind::NextHour:
      for (int k = 1; k <= kHistoryDays; ++k) abs.push_back(a - k * day + 1);
      break;
    case ChannelKind::SameHour:
      for (int k = 1; k <= kHistoryDays; ++k) abs.push_back(a - k * day);
      break;
    case ChannelKind::Recent:
      for (int k = spec.h; k >= 1; --k) abs.push_back(a - k);
      break;
  }
  std::vector<SlotKey> keys;
  keys.reserve(abs.size());
  for (long x : abs) {
    if (x < 0) {
      throw std::out_of_range("insufficient history for the " + std::string(to_string(spec.kind)) +
                              " channel of day " + std::to_string(target.day_index) + " slot " +
                              std::to_string(target.slot));
    }
    keys.push_back(slot_key_at(x, slots_per_day, target));
  }
  return keys;
}

std::vector<ChannelSpec> active_channels(const ModelConfig& config) {
  std::vector<ChannelSpec> out;
  if (config.use_prev_hour) out.push_back({ChannelKind::PrevHour, config.history_hours});
  if (config.use_next_hour) out.push_back({ChannelKind::NextHour, config.history_hours});
  if (config.use_same_hour) out.push_back({ChannelKind::SameHour, config.history_hours});
  if (config.use_recent) out.push_back({ChannelKind::Recent, config.history_hours});
  return out;
}

long first_eligible_slot(const ModelConfig& config, int slots_per_day) {
  const long day = slots_per_day;
  long need = 0;
  if (config.use_prev_hour) need = std::max(need, kHistoryDays * day + 1);
  if (config.use_same_hour) need = std::max(need, kHistoryDays * day);
  if (config.use_next_hour) need = std::max(need, kHistoryDays * day - 1);
  if (config.use_recent) need = std::max(need, static_cast<long>(config.history_hours));
  return need;
}

void register_temporal_params(ParamStore& store, const ModelConfig& config, std::mt19937_64& rng) {
  const auto z = static_cast<std::size_t>(config.input_dim());
  const auto zp = static_cast<std::size_t>(config.hidden_dim);
  store.add("temporal.W_query_in", glorot_uniform(z, zp, rng));
  for (const char* unit : {"temporal.slot.", "temporal.fusion."}) {
    const std::string prefix(unit);
    store.add(prefix + "W_Q", glorot_uniform(zp, zp, rng));
    store.add(prefix + "W_K", glorot_uniform(zp, zp, rng));
    store.add(prefix + "W_V", glorot_uniform(zp, zp, rng));
  }
}

TemporalVars bind_temporal(tc::Tape& tape, ParamStore& store) {
  TemporalVars vars;
  vars.w_query_in = tape.parameter(store.at("temporal.W_query_in"));
  vars.slot_attention = {tape.parameter(store.at("temporal.slot.W_Q")),
                         tape.parameter(store.at("temporal.slot.W_K")),
                         tape.parameter(store.at("temporal.slot.W_V"))};
  vars.fusion = {tape.parameter(store.at("temporal.fusion.W_Q")),
                 tape.parameter(store.at("temporal.fusion.W_K")),
                 tape.parameter(store.at("temporal.fusion.W_V"))};
  return vars;
}

namespace {

Var attend_projected(Var projected_query, Var history, const AttentionVars& vars,
                     Tensor* weights) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(projected_query.cols()));
  const Var keys = tc::matmul(history, vars.w_k);
  const Var values = tc::matmul(history, vars.w_v);
  const Var similarity = tc::scale(tc::matmul(projected_query, tc::transpose(keys)), scale);
  const Var normalized = tc::softmax_rows(similarity);
  if (weights != nullptr) *weights = normalized.value();
  return tc::matmul(normalized, values);
}

}  // namespace

Var scaled_dot_attend(Var target, Var history, const AttentionVars& vars, Tensor* weights) {
  if (target.cols() != history.cols()) {
    throw std::invalid_argument("scaled_dot_attend: incompatible shapes " +
                                target.value().shape_string() + " and " +
                                history.value().shape_string());
  }
  return attend_projected(tc::matmul(target, vars.w_q), history, vars, weights);
}

Var fuse_channels(const AttentionVars& vars, Var query, const std::vector<Var>& representations,
                  Tensor* weights) {
  if (representations.empty()) throw std::invalid_argument("fuse_channels: no channels");
  const double scale = 1.0 / std::sqrt(static_cast<double>(query.cols()));
  const Var q = tc::matmul(query, vars.w_q);
  std::vector<Var> scores;
  std::vector<Var> values;
  for (const Var& rep : representations) {
    scores.push_back(tc::row_dot(q, tc::matmul(rep, vars.w_k)));
    values.push_back(tc::matmul(rep, vars.w_v));
  }
  const Var normalized = tc::softmax_rows(tc::scale(tc::concat_cols(scores), scale));
  if (weights != nullptr) *weights = normalized.value();
  std::vector<Var> terms;
  for (std::size_t c = 0; c < values.size(); ++c) {
    terms.push_back(tc::scale_rows(values[c], tc::column(normalized, c)));
  }
  return tc::add_n(terms);
}

Var temporal_layer(const TemporalVars& vars, Var query,
                   const std::vector<std::vector<Var>>& channels, TemporalTrace* trace) {
  const Var projected = tc::matmul(query, vars.slot_attention.w_q);
  std::vector<Var> representations;
  for (const auto& slots : channels) {
    if (slots.empty()) throw std::invalid_argument("temporal_layer: empty channel");
    std::vector<Var> attended;
    for (const Var& history : slots) {
      Tensor w;
      attended.push_back(
          attend_projected(projected, history, vars.slot_attention, trace ? &w : nullptr));
      if (trace != nullptr) trace->slot_weights.push_back(std::move(w));
    }
    representations.push_back(tc::add_n(attended));
    if (trace != nullptr) trace->channel_representations.push_back(representations.back().value());
  }
  return fuse_channels(vars.fusion, query, representations,
                       trace ? &trace->fusion_weights : nullptr);
}

}  // namespace odflow
