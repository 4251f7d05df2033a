#include "odflow/metrics.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "odflow/errors.hpp"
#include "odflow/trainer.hpp"

namespace odflow {

using json = nlohmann::ordered_json;

namespace {

void require_equal_length(std::span<const double> pred, std::span<const double> actual) {
  if (pred.size() != actual.size()) {
    throw std::invalid_argument("prediction has " + std::to_string(pred.size()) +
                                " entries but actuals have " + std::to_string(actual.size()));
  }
}

}  // namespace

std::optional<double> mape(std::span<const double> pred, std::span<const double> actual, double k) {
  require_equal_length(pred, actual);
  double total = 0.0;
  std::size_t m = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (actual[i] < k) continue;
    total += std::abs((pred[i] - actual[i]) / (actual[i] + 1.0));
    ++m;
  }
  if (m == 0) return std::nullopt;
  return total / static_cast<double>(m);
}

std::optional<double> mae(std::span<const double> pred, std::span<const double> actual, double k) {
  require_equal_length(pred, actual);
  double total = 0.0;
  std::size_t m = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (actual[i] < k) continue;
    total += std::abs(pred[i] - actual[i]);
    ++m;
  }
  if (m == 0) return std::nullopt;
  return total / static_cast<double>(m);
}

std::size_t count_at_least(std::span<const double> actual, double k) {
  std::size_t m = 0;
  for (double a : actual) m += a >= k ? 1 : 0;
  return m;
}

MetricSet compute_metrics(std::span<const double> pred, std::span<const double> actual,
                          std::span<const int> thresholds) {
  MetricSet s;
  for (int k : thresholds) {
    s.mape[k] = mape(pred, actual, k);
    s.mae[k] = mae(pred, actual, k);
    s.counts[k] = count_at_least(actual, k);
  }
  return s;
}

std::string to_string(EvalSplit split) {
  switch (split) {
    case EvalSplit::Train: return "train";
    case EvalSplit::Validation: return "validation";
    case EvalSplit::Test: return "test";
  }
  return "test";
}

EvalSplit parse_eval_split(const std::string& text) {
  if (text == "train") return EvalSplit::Train;
  if (text == "validation" || text == "val") return EvalSplit::Validation;
  if (text == "test") return EvalSplit::Test;
  throw ConfigError("unknown split '" + text + "' (expected train, validation or test)");
}

Evaluation evaluate(const Checkpoint& checkpoint, const GraphStore& store, EvalSplit which) {
  check_compatible(checkpoint, store);
  const TrainConfig& config = checkpoint.config;
  const DaySplit split =
      split_days(store.sequence.num_days, config.train_fraction, config.validation_fraction);
  Dataset data = training_dataset(config, store, split);
  data.degree_scale = checkpoint.degree_scale;
  OdFlowModel model = model_from_checkpoint(checkpoint);

  const std::vector<int>& days = which == EvalSplit::Train        ? split.train
                                 : which == EvalSplit::Validation ? split.validation
                                                                  : split.test;
  const std::vector<long> targets = eligible_targets(config.model, data, days);

  std::vector<double> od_pred, od_ha, od_actual, d_pred, d_ha, d_actual;
  for (long t : targets) {
    tc::Tape tape;
    const ForwardResult r = model.forward(tape, data, t);
    const SlotKey key = data.key_at(t);
    auto append = [](std::vector<double>& dst, const tc::Tensor& src) {
      dst.insert(dst.end(), src.storage().begin(), src.storage().end());
    };
    append(od_pred, r.od.value());
    append(od_ha, data.ha_od(key));
    append(od_actual, data.actual_od(t));
    append(d_pred, r.demand.value());
    append(d_ha, data.ha_demand(key));
    append(d_actual, data.actual_demand(t));
  }

  Evaluation e;
  e.split = which;
  e.targets = targets.size();
  if (config.task != Task::Demand) {
    e.reports.push_back({Task::Od, compute_metrics(od_pred, od_actual), compute_metrics(od_ha, od_actual)});
  }
  if (config.task != Task::Od) {
    e.reports.push_back(
        {Task::Demand, compute_metrics(d_pred, d_actual), compute_metrics(d_ha, d_actual)});
  }
  return e;
}

namespace {

json metric_map(const std::map<int, std::optional<double>>& values) {
  json j = json::object();
  for (const auto& [k, v] : values) {
    if (v) j[std::to_string(k)] = *v;
    else j[std::to_string(k)] = nullptr;
  }
  return j;
}

json metric_set_json(const MetricSet& s) {
  json j;
  j["mape"] = metric_map(s.mape);
  j["mae"] = metric_map(s.mae);
  json counts = json::object();
  for (const auto& [k, c] : s.counts) counts[std::to_string(k)] = c;
  j["counts"] = counts;
  return j;
}

}  // namespace

std::string report_json(const Evaluation& evaluation, const ReportContext& context) {
  json config = json::parse(context.config_json);
  config["split"] = to_string(evaluation.split);
  config["targets"] = evaluation.targets;
  if (context.timestamp) config["timestamp"] = *context.timestamp;
  json out = json::array();
  for (const MetricReport& r : evaluation.reports) {
    json j;
    j["task"] = to_string(r.task);
    const json m = metric_set_json(r.model);
    j["mape"] = m["mape"];
    j["mae"] = m["mae"];
    j["counts"] = m["counts"];
    j["baseline"] = metric_set_json(r.baseline);
    j["config"] = config;
    out.push_back(std::move(j));
  }
  return out.dump(2) + "\n";
}

std::string report_csv(const Evaluation& evaluation) {
  std::ostringstream out;
  out << "task,source,metric,threshold,value\n";
  char buf[64];
  auto emit = [&](const std::string& task, const char* source, const MetricSet& s) {
    for (const auto& [name, values] : {std::pair{"mape", &s.mape}, std::pair{"mae", &s.mae}}) {
      for (const auto& [k, v] : *values) {
        out << task << ',' << source << ',' << name << ',' << k << ',';
        if (v) {
          std::snprintf(buf, sizeof buf, "%.17g", *v);
          out << buf;
        }
        out << '\n';
      }
    }
    for (const auto& [k, c] : s.counts) {
      out << task << ',' << source << ",count," << k << ',' << c << '\n';
    }
  };
  for (const MetricReport& r : evaluation.reports) {
    emit(to_string(r.task), "model", r.model);
    emit(to_string(r.task), "baseline", r.baseline);
  }
  return out.str();
}

std::string current_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm local{};
  localtime_r(&now, &local);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &local);
  return buf;
}

}  // namespace odflow
