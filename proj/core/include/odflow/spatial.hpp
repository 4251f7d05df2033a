#pragma once

#include <cstddef>
#include <random>
#include <utility>
#include <vector>

#include "odflow/flowgraph.hpp"
#include "odflow/geogrid.hpp"
#include "odflow/model_config.hpp"
#include "odflow/params.hpp"
#include "odflow/tensor.hpp"

namespace odflow {

// Initial node embeddings and the spatial attention layer.

/// Stabiliser added to the flow-share denominators.
inline constexpr double kPreweightStabilizer = 1e-6;

/// Per-cell neighbor lists of one class, each entry (neighbor, preweight).
using WeightedNeighbors = std::vector<std::vector<std::pair<std::size_t, double>>>;

struct SpatialNeighbors {
  WeightedNeighbors forward;   // alpha
  WeightedNeighbors backward;  // beta
  WeightedNeighbors geo;       // gamma
};

struct Preweights {
  std::vector<std::pair<std::size_t, double>> alpha;
  std::vector<std::pair<std::size_t, double>> beta;
  std::vector<std::pair<std::size_t, double>> gamma;
};

/// alpha_j = D_ij / (sum_{k in f_i} D_ik + s), beta_j = D_ji / (sum_{k in b_i}
/// D_ki + s), gamma_j = (1/d_ij) / sum_{k in q_i} (1/d_ik).
Preweights preweights(const SlotGraph& g, const DistanceGraph& distances,
                      const NeighborSets& geo, std::size_t i);

SpatialNeighbors spatial_neighbors(const SlotGraph& g, const DistanceGraph& distances,
                                   const NeighborSets& geo);

/// Categorical codes of every cell, shared by all slots of a grid.
struct CellCodes {
  std::vector<std::size_t> cell;
  std::vector<std::size_t> row;
  std::vector<std::size_t> col;
};

CellCodes cell_codes(int rows, int cols);

/// Divisors for the degree features: value / (max over training slots + 1).
struct DegreeScale {
  double in = 1.0;
  double out = 1.0;
};

/// n x 2 [in, out] degree features of a slot, normalized.
tc::Tensor degree_features(const SlotGraph& g, const DegreeScale& scale);

struct EmbeddingVars {
  tc::Var cell, row, col, slot, dow;
};

struct SpatialHeadVars {
  tc::Var w_c;  // z x z'
  tc::Var w_s;  // z' x z'
  tc::Var a;    // 2z' x 1: [self; neighbor]
};

struct SpatialVars {
  std::vector<SpatialHeadVars> heads;
  tc::Var gate_logits;  // 1 x H
  tc::Var w_out;        // Hz' x z'
};

void register_embedding_params(ParamStore& store, const ModelConfig& config, int rows, int cols,
                               int slots_per_day, std::mt19937_64& rng);
void register_spatial_params(ParamStore& store, const ModelConfig& config, std::mt19937_64& rng);

EmbeddingVars bind_embedding(tc::Tape& tape, ParamStore& store);
SpatialVars bind_spatial(tc::Tape& tape, ParamStore& store, const ModelConfig& config);

/// n x z concatenation of the five categorical embeddings and the degree
/// features. Throws std::out_of_range for a code outside its table.
tc::Var initial_embedding(const EmbeddingVars& vars, const CellCodes& codes, const SlotKey& key,
                          const tc::Tensor& degree_features);

/// leaky_relu(a^T [e_i ; w' e_j]) for embeddings already projected by W_c.
double attention_score(const tc::Tensor& e_i, const tc::Tensor& e_j, double preweight,
                       const tc::Tensor& a, double slope);

/// Normalized neighbor weights recorded by spatial_layer, per head.
struct SpatialTrace {
  std::vector<tc::Tensor> forward, backward, geo;  // n x n each
};

/// Spatial embeddings (n x z') from initial embeddings (n x z).
tc::Var spatial_layer(const SpatialVars& vars, tc::Var initial, const SpatialNeighbors& neighbors,
                      double slope, SpatialTrace* trace = nullptr);

}  // namespace odflow
