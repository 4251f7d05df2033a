#include "odflow/transfer.hpp"

#include <stdexcept>

namespace odflow {

using tc::Tensor;
using tc::Var;

HistoricalAverage HistoricalAverage::build(const GraphSequence& seq, std::span<const int> days) {
  HistoricalAverage ha;
  ha.n_ = seq.cells;
  ha.slots_per_day_ = seq.slots_per_day;
  const std::size_t n = seq.cells;
  const auto slots = static_cast<std::size_t>(seq.slots_per_day);
  ha.demand_.assign(slots * 7 * n, 0.0);
  ha.od_.assign(slots * n * n, 0.0);

  int per_dow[7] = {0, 0, 0, 0, 0, 0, 0};
  for (int day : days) {
    if (day < 0 || day >= seq.num_days) throw std::out_of_range("training day outside the store");
    per_dow[seq.at(day, 1).key().day_of_week] += 1;
  }
  for (int day : days) {
    for (int slot = 1; slot <= seq.slots_per_day; ++slot) {
      const SlotGraph& g = seq.at(day, slot);
      const auto dow = static_cast<std::size_t>(g.key().day_of_week);
      const auto s = static_cast<std::size_t>(slot - 1);
      const double demand_w = 1.0 / per_dow[dow];
      const double od_w = 1.0 / static_cast<double>(days.size());
      for (const auto& e : g.entries()) {
        const double c = static_cast<double>(e.count);
        ha.demand_[(s * 7 + dow) * n + e.origin] += c * demand_w;
        ha.od_[(s * n + e.origin) * n + e.dest] += c * od_w;
      }
    }
  }
  return ha;
}

std::vector<double> HistoricalAverage::demand(int slot, int day_of_week) const {
  const auto s = static_cast<std::size_t>(slot - 1);
  const auto base = (s * 7 + static_cast<std::size_t>(day_of_week)) * n_;
  return {demand_.begin() + static_cast<long>(base), demand_.begin() + static_cast<long>(base + n_)};
}

std::vector<double> HistoricalAverage::od(int slot) const {
  const auto base = static_cast<std::size_t>(slot - 1) * n_ * n_;
  return {od_.begin() + static_cast<long>(base), od_.begin() + static_cast<long>(base + n_ * n_)};
}

double HistoricalAverage::od(int slot, std::size_t i, std::size_t j) const {
  return od_[(static_cast<std::size_t>(slot - 1) * n_ + i) * n_ + j];
}

void register_transfer_params(ParamStore& store, const ModelConfig& config, std::mt19937_64& rng) {
  const auto zp = static_cast<std::size_t>(config.hidden_dim);
  const auto hidden = static_cast<std::size_t>(config.demand_hidden);
  store.add("transfer.demand.W1", glorot_uniform(zp, hidden, rng));
  store.add("transfer.demand.b1", Tensor(1, hidden, 0.0));
  store.add("transfer.demand.W2", glorot_uniform(hidden, 1, rng));
  store.add("transfer.demand.b2", Tensor(1, 1, 0.0));
  store.add("transfer.W_p", glorot_uniform(zp, zp, rng));
  store.add("transfer.a_p", glorot_uniform(2 * zp, 1, rng));
  store.add("transfer.gate_demand", Tensor(1, 1, 0.0));
  store.add("transfer.gate_od", Tensor(1, 1, 0.0));
}

TransferVars bind_transfer(tc::Tape& tape, ParamStore& store) {
  TransferVars v;
  v.w1 = tape.parameter(store.at("transfer.demand.W1"));
  v.b1 = tape.parameter(store.at("transfer.demand.b1"));
  v.w2 = tape.parameter(store.at("transfer.demand.W2"));
  v.b2 = tape.parameter(store.at("transfer.demand.b2"));
  v.w_p = tape.parameter(store.at("transfer.W_p"));
  v.a_p = tape.parameter(store.at("transfer.a_p"));
  v.gate_demand = tape.parameter(store.at("transfer.gate_demand"));
  v.gate_od = tape.parameter(store.at("transfer.gate_od"));
  return v;
}

Var raw_demand(const TransferVars& vars, Var final_embedding, double slope) {
  const Var hidden = tc::leaky_relu(tc::add_row(tc::matmul(final_embedding, vars.w1), vars.b1), slope);
  return tc::softplus(tc::add_row(tc::matmul(hidden, vars.w2), vars.b2));
}

Var blend_with_history(Var network, const Tensor& historical, Var gate_logit, bool use_ha) {
  if (!use_ha) return network;
  tc::Tape& tape = *network.tape();
  const Var ha = tape.constant(historical);
  // ha + g (network - ha) == g network + (1 - g) ha
  return tc::add(ha, tc::scale_by(tc::sub(network, ha), tc::sigmoid(gate_logit)));
}

Var demand_head(const TransferVars& vars, Var final_embedding, const Tensor& ha_demand,
                bool use_ha, double slope) {
  return blend_with_history(raw_demand(vars, final_embedding, slope), ha_demand, vars.gate_demand,
                            use_ha);
}

Var transfer_probabilities(const TransferVars& vars, Var final_embedding, double slope) {
  const std::size_t n = final_embedding.rows();
  const Var projected = tc::matmul(final_embedding, vars.w_p);
  const std::size_t zp = projected.cols();
  const Var origin = tc::matmul(projected, tc::slice_rows(vars.a_p, 0, zp));
  const Var dest = tc::matmul(projected, tc::slice_rows(vars.a_p, zp, zp));
  const Var score = tc::leaky_relu(
      tc::add(tc::broadcast_col(origin, n), tc::broadcast_row(tc::transpose(dest), n)), slope);
  return tc::softmax_rows(score);
}

Var compose_od(Var demand, Var probabilities, const Tensor& ha_od, Var gate_logit, bool use_ha) {
  return blend_with_history(tc::scale_rows(probabilities, demand), ha_od, gate_logit, use_ha);
}

}  // namespace odflow
