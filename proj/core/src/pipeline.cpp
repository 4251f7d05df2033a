#include "odflow/pipeline.hpp"

#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "odflow/errors.hpp"

namespace odflow {

using json = nlohmann::ordered_json;

GraphStore build_store(const std::vector<TripRecord>& trips, const BoundingBox& bbox, double cell_km,
                       int slot_minutes, WeightMode mode, GraphBuildStats* stats) {
  GraphStore store;
  store.grid = build_grid(bbox, cell_km);
  store.weight = mode;
  store.sequence = build_slot_graphs(trips, store.grid, slot_minutes, mode, stats);
  return store;
}

Evaluation train_and_evaluate(const TrainConfig& config, const GraphStore& store) {
  const TrainResult result = train(config, store);
  return evaluate(result.best, store, EvalSplit::Test);
}

namespace {

SweepRow run_leg(const std::string& label, double value, const auto& body) {
  SweepRow row;
  row.label = label;
  row.value = value;
  try {
    row.evaluation = body();
    row.ok = true;
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  return row;
}

std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

SweepTable sweep_grid(const std::vector<TripRecord>& trips, const BoundingBox& bbox,
                      const std::vector<double>& cell_km, const TrainConfig& config,
                      int slot_minutes, WeightMode mode) {
  SweepTable table{"cell_km", {}};
  for (double km : cell_km) {
    table.rows.push_back(run_leg(format_value(km), km, [&] {
      return train_and_evaluate(config, build_store(trips, bbox, km, slot_minutes, mode));
    }));
  }
  return table;
}

SweepTable sweep_hours(const GraphStore& store, const std::vector<int>& hours,
                       const TrainConfig& config, bool ablation) {
  SweepTable table{"h", {}};
  for (int h : hours) {
    table.rows.push_back(run_leg(std::to_string(h), h, [&] {
      TrainConfig c = config;
      c.model.history_hours = h;
      c.model.use_recent = true;
      return train_and_evaluate(c, store);
    }));
  }
  if (ablation) {
    table.rows.push_back(run_leg("no-recent", 0.0, [&] {
      TrainConfig c = config;
      c.model.use_recent = false;
      return train_and_evaluate(c, store);
    }));
  }
  return table;
}

std::optional<double> sweep_metric(const SweepRow& row, Task task, const std::string& metric, int k) {
  if (!row.ok) return std::nullopt;
  for (const MetricReport& r : row.evaluation.reports) {
    if (r.task != task) continue;
    const auto& values = metric == "mape" ? r.model.mape : r.model.mae;
    if (auto it = values.find(k); it != values.end()) return it->second;
  }
  return std::nullopt;
}

std::string sweep_csv(const SweepTable& table) {
  std::ostringstream out;
  out << "parameter,value,status";
  for (Task task : {Task::Od, Task::Demand}) {
    for (const char* metric : {"mape", "mae"}) {
      for (int k : kThresholds) out << ',' << to_string(task) << '_' << metric << '_' << k;
    }
  }
  out << '\n';
  char buf[64];
  for (const SweepRow& row : table.rows) {
    out << table.parameter << ',' << row.label << ',' << (row.ok ? "ok" : "failed");
    for (Task task : {Task::Od, Task::Demand}) {
      for (const char* metric : {"mape", "mae"}) {
        for (int k : kThresholds) {
          out << ',';
          if (auto v = sweep_metric(row, task, metric, k)) {
            std::snprintf(buf, sizeof buf, "%.17g", *v);
            out << buf;
          }
        }
      }
    }
    out << '\n';
  }
  return out.str();
}

std::string sweep_json(const SweepTable& table) {
  json rows = json::array();
  for (const SweepRow& row : table.rows) {
    json j;
    j["parameter"] = table.parameter;
    j["value"] = row.label;
    j["status"] = row.ok ? "ok" : "failed";
    if (!row.ok) j["error"] = row.error;
    for (Task task : {Task::Od, Task::Demand}) {
      json t;
      for (const char* metric : {"mape", "mae"}) {
        json m = json::object();
        for (int k : kThresholds) {
          const auto v = sweep_metric(row, task, metric, k);
          m[std::to_string(k)] = v ? json(*v) : json(nullptr);
        }
        t[metric] = m;
      }
      j[to_string(task)] = t;
    }
    rows.push_back(std::move(j));
  }
  return rows.dump(2) + "\n";
}

Prediction predict(const Checkpoint& checkpoint, const GraphStore& store, int day, int slot) {
  check_compatible(checkpoint, store);
  const TrainConfig& config = checkpoint.config;
  const int S = store.sequence.slots_per_day;
  if (day < 0 || slot < 1 || slot > S) {
    throw ConfigError("target day " + std::to_string(day) + " slot " + std::to_string(slot) +
                      " is not a valid slot");
  }
  const DaySplit split =
      split_days(store.sequence.num_days, config.train_fraction, config.validation_fraction);
  Dataset data = training_dataset(config, store, split);
  data.degree_scale = checkpoint.degree_scale;
  OdFlowModel model = model_from_checkpoint(checkpoint);

  Prediction p;
  p.absolute = static_cast<long>(day) * S + slot - 1;
  if (!has_history(config.model, p.absolute, S, data.total_slots())) {
    const long first = first_eligible_slot(config.model, S);
    const SlotKey k = data.key_at(first);
    throw ConfigError("day " + std::to_string(day) + " slot " + std::to_string(slot) +
                      " lacks channel history; the earliest valid target is day " +
                      std::to_string(k.day_index) + " slot " + std::to_string(k.slot));
  }
  p.key = data.key_at(p.absolute);
  tc::Tape tape;
  const ForwardResult r = model.forward(tape, data, p.absolute);
  p.demand = r.demand.value();
  p.od = r.od.value();
  if (p.absolute < data.total_slots()) {
    Evaluation e;
    e.split = EvalSplit::Test;
    e.targets = 1;
    const tc::Tensor od_actual = data.actual_od(p.absolute);
    const tc::Tensor d_actual = data.actual_demand(p.absolute);
    const tc::Tensor od_ha = data.ha_od(p.key);
    const tc::Tensor d_ha = data.ha_demand(p.key);
    e.reports.push_back({Task::Od, compute_metrics(p.od.storage(), od_actual.storage()),
                         compute_metrics(od_ha.storage(), od_actual.storage())});
    e.reports.push_back({Task::Demand, compute_metrics(p.demand.storage(), d_actual.storage()),
                         compute_metrics(d_ha.storage(), d_actual.storage())});
    p.metrics = std::move(e);
  }
  return p;
}

std::string prediction_json(const Prediction& p, double threshold) {
  json j;
  j["day"] = p.key.day_index;
  j["slot"] = p.key.slot;
  j["dow"] = p.key.day_of_week;
  j["demand"] = p.demand.storage();
  json od = json::array();
  const std::size_t n = p.od.rows();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const double v = p.od(i, k);
      if (v > threshold) od.push_back({i + 1, k + 1, v});
    }
  }
  j["od"] = std::move(od);
  if (p.metrics) {
    json m = json::parse(report_json(*p.metrics, {}));
    for (auto& r : m) r.erase("config");
    j["metrics"] = std::move(m);
  } else {
    j["metrics"] = nullptr;
  }
  return j.dump(2) + "\n";
}

}  // namespace odflow
