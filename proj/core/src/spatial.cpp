#include "odflow/spatial.hpp"

#include <cassert>
#include <stdexcept>
#include <string>

namespace odflow {

using tc::Tensor;
using tc::Var;

Preweights preweights(const SlotGraph& g, const DistanceGraph& distances,
                      const NeighborSets& geo, std::size_t i) {
  Preweights w;
  double out_total = 0.0;
  double in_total = 0.0;
  for (const auto& e : g.entries()) {
    if (e.origin == i && e.dest != i) {
      w.alpha.emplace_back(e.dest, static_cast<double>(e.count));
      out_total += static_cast<double>(e.count);
    }
    if (e.dest == i && e.origin != i) {
      w.beta.emplace_back(e.origin, static_cast<double>(e.count));
      in_total += static_cast<double>(e.count);
    }
  }
  for (auto& [j, v] : w.alpha) v /= out_total + kPreweightStabilizer;
  for (auto& [j, v] : w.beta) v /= in_total + kPreweightStabilizer;

  double inv_total = 0.0;
  for (std::size_t j : geo[i]) {
    const double d = distances(i, j);
    assert(d > 0.0 && "geographical neighbor at zero distance");
    w.gamma.emplace_back(j, 1.0 / d);
    inv_total += 1.0 / d;
  }
  for (auto& [j, v] : w.gamma) v /= inv_total;
  return w;
}

SpatialNeighbors spatial_neighbors(const SlotGraph& g, const DistanceGraph& distances,
                                   const NeighborSets& geo) {
  const std::size_t n = g.cells();
  SpatialNeighbors out;
  out.forward.resize(n);
  out.backward.resize(n);
  out.geo.resize(n);

  std::vector<double> out_total(n, 0.0), in_total(n, 0.0);
  for (const auto& e : g.entries()) {
    if (e.origin == e.dest) continue;
    out_total[e.origin] += static_cast<double>(e.count);
    in_total[e.dest] += static_cast<double>(e.count);
  }
  for (const auto& e : g.entries()) {
    if (e.origin == e.dest) continue;
    const double c = static_cast<double>(e.count);
    out.forward[e.origin].emplace_back(e.dest, c / (out_total[e.origin] + kPreweightStabilizer));
    out.backward[e.dest].emplace_back(e.origin, c / (in_total[e.dest] + kPreweightStabilizer));
  }
  for (std::size_t i = 0; i < n; ++i) {
    double inv_total = 0.0;
    for (std::size_t j : geo[i]) inv_total += 1.0 / distances(i, j);
    for (std::size_t j : geo[i]) out.geo[i].emplace_back(j, (1.0 / distances(i, j)) / inv_total);
  }
  return out;
}

CellCodes cell_codes(int rows, int cols) {
  CellCodes codes;
  const auto n = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  for (std::size_t i = 0; i < n; ++i) {
    codes.cell.push_back(i);
    codes.row.push_back(i / static_cast<std::size_t>(cols));
    codes.col.push_back(i % static_cast<std::size_t>(cols));
  }
  return codes;
}

Tensor degree_features(const SlotGraph& g, const DegreeScale& scale) {
  Tensor f(g.cells(), 2);
  for (const auto& e : g.entries()) {
    f(e.dest, 0) += static_cast<double>(e.count);
    f(e.origin, 1) += static_cast<double>(e.count);
  }
  for (std::size_t i = 0; i < g.cells(); ++i) {
    f(i, 0) /= scale.in;
    f(i, 1) /= scale.out;
  }
  return f;
}

void register_embedding_params(ParamStore& store, const ModelConfig& config, int rows, int cols,
                               int slots_per_day, std::mt19937_64& rng) {
  const auto e = static_cast<std::size_t>(config.embed_dim);
  store.add("embed.cell", tc::Tensor(glorot_uniform(static_cast<std::size_t>(rows * cols), e, rng)));
  store.add("embed.row", glorot_uniform(static_cast<std::size_t>(rows), e, rng));
  store.add("embed.col", glorot_uniform(static_cast<std::size_t>(cols), e, rng));
  store.add("embed.slot", glorot_uniform(static_cast<std::size_t>(slots_per_day), e, rng));
  store.add("embed.dow", glorot_uniform(7, e, rng));
}

void register_spatial_params(ParamStore& store, const ModelConfig& config, std::mt19937_64& rng) {
  const auto z = static_cast<std::size_t>(config.input_dim());
  const auto zp = static_cast<std::size_t>(config.hidden_dim);
  const auto heads = static_cast<std::size_t>(config.heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::string prefix = "spatial.head" + std::to_string(h) + ".";
    store.add(prefix + "W_c", glorot_uniform(z, zp, rng));
    store.add(prefix + "W_s", glorot_uniform(zp, zp, rng));
    store.add(prefix + "a", glorot_uniform(2 * zp, 1, rng));
  }
  store.add("spatial.gate_logits", Tensor(1, heads, 0.0));
  store.add("spatial.W_out", glorot_uniform(heads * zp, zp, rng));
}

EmbeddingVars bind_embedding(tc::Tape& tape, ParamStore& store) {
  return {tape.parameter(store.at("embed.cell")), tape.parameter(store.at("embed.row")),
          tape.parameter(store.at("embed.col")), tape.parameter(store.at("embed.slot")),
          tape.parameter(store.at("embed.dow"))};
}

SpatialVars bind_spatial(tc::Tape& tape, ParamStore& store, const ModelConfig& config) {
  SpatialVars vars;
  for (int h = 0; h < config.heads; ++h) {
    const std::string prefix = "spatial.head" + std::to_string(h) + ".";
    vars.heads.push_back({tape.parameter(store.at(prefix + "W_c")),
                          tape.parameter(store.at(prefix + "W_s")),
                          tape.parameter(store.at(prefix + "a"))});
  }
  vars.gate_logits = tape.parameter(store.at("spatial.gate_logits"));
  vars.w_out = tape.parameter(store.at("spatial.W_out"));
  return vars;
}

Var initial_embedding(const EmbeddingVars& vars, const CellCodes& codes, const SlotKey& key,
                      const Tensor& degree_features) {
  tc::Tape& tape = *vars.cell.tape();
  const std::size_t n = codes.cell.size();
  if (degree_features.rows() != n || degree_features.cols() != 2) {
    throw std::invalid_argument("degree features must be " + std::to_string(n) + "x2, got " +
                                degree_features.shape_string());
  }
  if (key.slot < 1 || key.day_of_week < 0 || key.day_of_week > 6) {
    throw std::out_of_range("slot key outside the calendar tables");
  }
  const std::vector<std::size_t> slot(n, static_cast<std::size_t>(key.slot - 1));
  const std::vector<std::size_t> dow(n, static_cast<std::size_t>(key.day_of_week));
  const Var parts[] = {tc::gather_rows(vars.cell, codes.cell), tc::gather_rows(vars.row, codes.row),
                       tc::gather_rows(vars.col, codes.col), tc::gather_rows(vars.slot, slot),
                       tc::gather_rows(vars.dow, dow), tape.constant(degree_features)};
  return tc::concat_cols(parts);
}

double attention_score(const Tensor& e_i, const Tensor& e_j, double preweight, const Tensor& a,
                       double slope) {
  const std::size_t zp = e_i.size();
  if (e_j.size() != zp || a.size() != 2 * zp) {
    throw std::invalid_argument("attention_score: expected a of length " +
                                std::to_string(2 * zp) + ", got " + a.shape_string());
  }
  double s = 0.0;
  for (std::size_t k = 0; k < zp; ++k) s += a[k] * e_i[k] + a[zp + k] * preweight * e_j[k];
  return s > 0.0 ? s : slope * s;
}

namespace {

struct DenseClass {
  std::vector<std::uint8_t> mask;
  Tensor preweight;
};

DenseClass densify(const WeightedNeighbors& lists, std::size_t n) {
  DenseClass d{std::vector<std::uint8_t>(n * n, 0), Tensor(n, n)};
  for (std::size_t i = 0; i < lists.size(); ++i) {
    for (const auto& [j, w] : lists[i]) {
      d.mask[i * n + j] = 1;
      d.preweight(i, j) = w;
    }
  }
  return d;
}

}  // namespace

Var spatial_layer(const SpatialVars& vars, Var initial, const SpatialNeighbors& neighbors,
                  double slope, SpatialTrace* trace) {
  tc::Tape& tape = *initial.tape();
  const std::size_t n = initial.rows();
  const DenseClass classes[] = {densify(neighbors.forward, n), densify(neighbors.backward, n),
                                densify(neighbors.geo, n)};
  Var preweight_vars[3];
  for (int c = 0; c < 3; ++c) preweight_vars[c] = tape.constant(classes[c].preweight);

  std::vector<Var> head_outputs;
  for (std::size_t h = 0; h < vars.heads.size(); ++h) {
    const SpatialHeadVars& head = vars.heads[h];
    const Var projected = tc::matmul(initial, head.w_c);  // n x z'
    const std::size_t zp = projected.cols();
    const Var self_score = tc::matmul(projected, tc::slice_rows(head.a, 0, zp));
    const Var neigh_score = tc::matmul(projected, tc::slice_rows(head.a, zp, zp));
    const Var self_grid = tc::broadcast_col(self_score, n);
    const Var neigh_grid = tc::broadcast_row(tc::transpose(neigh_score), n);

    Var weights[3];
    for (int c = 0; c < 3; ++c) {
      const Var score = tc::leaky_relu(
          tc::add(self_grid, tc::mul(preweight_vars[c], neigh_grid)), slope);
      weights[c] = tc::masked_softmax_rows(score, classes[c].mask);
    }
    if (trace != nullptr) {
      trace->forward.push_back(weights[0].value());
      trace->backward.push_back(weights[1].value());
      trace->geo.push_back(weights[2].value());
    }

    const Var messages = tc::matmul(projected, head.w_s);  // W_s e_j for all j
    const Var mixing = tc::add_n(weights);
    const Var merged = tc::add(messages, tc::matmul(mixing, messages));
    const Var gate = tc::sigmoid(tc::column(vars.gate_logits, h));
    head_outputs.push_back(tc::scale_by(merged, gate));
  }
  return tc::matmul(tc::concat_cols(head_outputs), vars.w_out);
}

}  // namespace odflow
