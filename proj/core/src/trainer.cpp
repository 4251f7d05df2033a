#include "odflow/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "odflow/errors.hpp"

namespace odflow {

using tc::Tensor;
using tc::Var;

void TrainConfig::validate() const {
  model.validate();
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be a non-negative number");
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train fraction must lie in (0, 1)");
  }
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation fraction must lie in (0, 1)");
  }
  if (demand_weight < 0.0 || od_weight < 0.0) throw ConfigError("loss weights must be non-negative");
  if (geo_threshold_km < 0.0) throw ConfigError("geographic threshold must be non-negative");
}

DaySplit split_days(int num_days, double train_fraction, double validation_fraction) {
  if (num_days < kMinimumDays) {
    throw ConfigError("need at least " + std::to_string(kMinimumDays) + " days of data, got " +
                      std::to_string(num_days));
  }
  // the epsilon keeps exact products such as 28 * 0.75 from flooring low
  const int train_total = static_cast<int>(std::floor(num_days * train_fraction + 1e-9));
  const int validation =
      std::max(1, static_cast<int>(std::floor(train_total * validation_fraction + 1e-9)));
  if (train_total - validation < 1 || train_total >= num_days) {
    throw ConfigError("split fractions leave an empty partition for " + std::to_string(num_days) +
                      " days");
  }
  DaySplit s;
  for (int d = 0; d < num_days; ++d) {
    if (d < train_total - validation) s.train.push_back(d);
    else if (d < train_total) s.validation.push_back(d);
    else s.test.push_back(d);
  }
  return s;
}

std::vector<long> eligible_targets(const ModelConfig& config, const Dataset& data,
                                   const std::vector<int>& days, std::size_t* skipped) {
  std::vector<long> out;
  const int S = data.slots_per_day();
  for (int day : days) {
    for (int slot = 1; slot <= S; ++slot) {
      const long abs = static_cast<long>(day) * S + slot - 1;
      if (has_history(config, abs, S, data.total_slots())) out.push_back(abs);
      else if (skipped != nullptr) ++*skipped;
    }
  }
  return out;
}

Var target_loss(const TrainConfig& config, const ForwardResult& r, const Dataset& data, long target) {
  tc::Tape& tape = *r.demand.tape();
  std::vector<Var> terms;
  if (config.task != Task::Od) {
    const Var l = tc::smooth_l1(r.demand, tape.constant(data.actual_demand(target)));
    terms.push_back(config.demand_weight == 1.0 ? l : tc::scale(l, config.demand_weight));
  }
  if (config.task != Task::Demand) {
    const Var l = tc::smooth_l1(r.od, tape.constant(data.actual_od(target)));
    terms.push_back(config.od_weight == 1.0 ? l : tc::scale(l, config.od_weight));
  }
  return terms.size() == 1 ? terms.front() : tc::add_n(terms);
}

Dataset training_dataset(const TrainConfig& config, const GraphStore& store, const DaySplit& split) {
  std::optional<double> threshold;
  if (config.geo_threshold_km > 0.0) threshold = config.geo_threshold_km;
  return Dataset::build(store.grid, store.sequence, split.train, threshold);
}

double mean_loss(const TrainConfig& config, OdFlowModel& model, const Dataset& data,
                 const std::vector<long>& targets) {
  double total = 0.0;
  for (long t : targets) {
    tc::Tape tape;
    total += target_loss(config, model.forward(tape, data, t), data, t).value()[0];
  }
  return targets.empty() ? 0.0 : total / static_cast<double>(targets.size());
}

namespace {

std::string describe(const Dataset& data, long target) {
  const SlotKey k = data.key_at(target);
  return "day " + std::to_string(k.day_index) + " slot " + std::to_string(k.slot);
}

std::string rng_state(const std::mt19937_64& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

}  // namespace

TrainResult train(const TrainConfig& config, const GraphStore& store, const EpochCallback& on_epoch) {
  config.validate();
  const DaySplit split =
      split_days(store.sequence.num_days, config.train_fraction, config.validation_fraction);
  const Dataset data = training_dataset(config, store, split);

  std::mt19937_64 rng(config.seed);
  OdFlowModel model(config.model, store.grid.rows, store.grid.cols, store.sequence.slots_per_day, rng);
  Optimizer optimizer(config.optimizer, config.learning_rate);

  TrainResult result;
  std::vector<long> train_targets = eligible_targets(config.model, data, split.train, &result.skipped_targets);
  const std::vector<long> val_targets = eligible_targets(config.model, data, split.validation);
  if (train_targets.empty()) {
    throw ConfigError("no training slot has enough history; the first " +
                      std::to_string(split.train.size()) + " training days do not cover " +
                      std::to_string(kHistoryDays) + " days plus the channel offsets");
  }
  result.train_targets = train_targets.size();
  result.validation_targets = val_targets.size();

  Checkpoint& best = result.best;
  best.config = config;
  best.grid = store.grid;
  best.slots_per_day = store.sequence.slots_per_day;
  best.weight = store.weight;
  best.geo_threshold_km = data.geo_threshold_km;
  best.degree_scale = data.degree_scale;
  double best_loss = INFINITY;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(train_targets.begin(), train_targets.end(), rng);
    double total = 0.0;
    for (long target : train_targets) {
      model.params().zero_grad();
      tc::Tape tape;
      const Var loss = target_loss(config, model.forward(tape, data, target), data, target);
      const double value = loss.value()[0];
      if (!std::isfinite(value)) {
        throw std::runtime_error("non-finite training loss at " + describe(data, target) +
                                 " (epoch " + std::to_string(epoch) + ")");
      }
      total += value;
      tape.backward(loss);
      optimizer.step(model.params());
    }
    EpochLog entry{epoch, total / static_cast<double>(train_targets.size()), std::nullopt};
    if (!val_targets.empty()) {
      const double v = mean_loss(config, model, data, val_targets);
      if (!std::isfinite(v)) {
        throw std::runtime_error("non-finite validation loss in epoch " + std::to_string(epoch));
      }
      entry.val_loss = v;
    }
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);

    const double selection = entry.val_loss.value_or(entry.train_loss);
    if (selection < best_loss) {
      best_loss = selection;
      best.epoch = epoch;
      best.params = model.params();
      best.rng_state = rng_state(rng);
    }
  }
  for (auto& p : best.params.all()) p.grad = Tensor();
  return result;
}

void write_loss_log(std::ostream& out, const std::vector<EpochLog>& log) {
  out << "epoch,train_loss,val_loss\n";
  char buf[64];
  for (const EpochLog& e : log) {
    out << e.epoch << ',';
    std::snprintf(buf, sizeof buf, "%.17g", e.train_loss);
    out << buf << ',';
    if (e.val_loss) {
      std::snprintf(buf, sizeof buf, "%.17g", *e.val_loss);
      out << buf;
    }
    out << '\n';
  }
}

OdFlowModel model_from_checkpoint(const Checkpoint& checkpoint) {
  std::mt19937_64 rng(checkpoint.config.seed);
  OdFlowModel model(checkpoint.config.model, checkpoint.grid.rows, checkpoint.grid.cols,
                    checkpoint.slots_per_day, rng);
  for (auto& p : model.params().all()) {
    if (!checkpoint.params.contains(p.name)) {
      throw ConfigError("checkpoint is missing tensor " + p.name);
    }
    const tc::Tensor& v = checkpoint.params.at(p.name).value;
    if (v.rows() != p.value.rows() || v.cols() != p.value.cols()) {
      throw ConfigError("checkpoint tensor " + p.name + " has shape " + v.shape_string() +
                        ", expected " + p.value.shape_string());
    }
    p.value = v;
  }
  if (checkpoint.params.size() != model.params().size()) {
    throw ConfigError("checkpoint holds tensors the model does not use");
  }
  return model;
}

}  // namespace odflow
