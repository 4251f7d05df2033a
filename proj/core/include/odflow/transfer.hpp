#pragma once

#include <random>
#include <span>
#include <vector>

#include "odflow/flowgraph.hpp"
#include "odflow/model_config.hpp"
#include "odflow/params.hpp"
#include "odflow/tensor.hpp"

namespace odflow {

/// Mean demand per (cell, slot, day of week) and mean OD flow per
/// (origin, destination, slot) over a set of training days. Keys never
/// observed default to 0.
class HistoricalAverage {
 public:
  HistoricalAverage() = default;
  static HistoricalAverage build(const GraphSequence& seq, std::span<const int> days);

  std::size_t cells() const { return n_; }
  /// Length-n demand table entry.
  std::vector<double> demand(int slot, int day_of_week) const;
  /// Row-major n x n OD table entry.
  std::vector<double> od(int slot) const;
  double od(int slot, std::size_t i, std::size_t j) const;

  friend bool operator==(const HistoricalAverage&, const HistoricalAverage&) = default;

 private:
  std::size_t n_ = 0;
  int slots_per_day_ = 0;
  std::vector<double> demand_;  // [slot][dow][cell]
  std::vector<double> od_;      // [slot][origin][dest]
};

struct TransferVars {
  tc::Var w1, b1, w2, b2;  // demand feed-forward: z' -> hidden -> 1
  tc::Var w_p;             // z' x z'
  tc::Var a_p;             // 2z' x 1
  tc::Var gate_demand;     // 1 x 1 logit
  tc::Var gate_od;         // 1 x 1 logit
};

void register_transfer_params(ParamStore& store, const ModelConfig& config, std::mt19937_64& rng);
TransferVars bind_transfer(tc::Tape& tape, ParamStore& store);

/// Network-only demand softplus(FF(e)) as n x 1.
tc::Var raw_demand(const TransferVars& vars, tc::Var final_embedding, double slope);

/// sigma(gate) * network + (1 - sigma(gate)) * historical. With `use_ha`
/// false the network output is returned unchanged.
tc::Var blend_with_history(tc::Var network, const tc::Tensor& historical, tc::Var gate_logit,
                           bool use_ha);

/// demand_hat (n x 1, non-negative).
tc::Var demand_head(const TransferVars& vars, tc::Var final_embedding,
                    const tc::Tensor& ha_demand, bool use_ha, double slope);

/// Row-stochastic P with p_ij = softmax_j leaky_relu(a_p^T [W_p e_i ; W_p e_j]).
tc::Var transfer_probabilities(const TransferVars& vars, tc::Var final_embedding, double slope);

/// Delta_hat_ij = blend(demand_i * p_ij, HA_od).
tc::Var compose_od(tc::Var demand, tc::Var probabilities, const tc::Tensor& ha_od,
                   tc::Var gate_logit, bool use_ha);

}  // namespace odflow
