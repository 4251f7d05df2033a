#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "odflow/checkpoint.hpp"
#include "odflow/graph_store.hpp"
#include "odflow/model_config.hpp"

namespace odflow {

inline constexpr int kThresholds[] = {0, 3, 5};

/// mean |pred - actual| / (actual + 1) over entries with actual >= k;
/// nullopt for an empty selection. Throws std::invalid_argument on a length
/// mismatch.
std::optional<double> mape(std::span<const double> pred, std::span<const double> actual, double k);
/// mean |pred - actual| over entries with actual >= k.
std::optional<double> mae(std::span<const double> pred, std::span<const double> actual, double k);
std::size_t count_at_least(std::span<const double> actual, double k);

struct MetricSet {
  std::map<int, std::optional<double>> mape;
  std::map<int, std::optional<double>> mae;
  std::map<int, std::size_t> counts;
};

MetricSet compute_metrics(std::span<const double> pred, std::span<const double> actual,
                          std::span<const int> thresholds = kThresholds);

struct MetricReport {
  Task task = Task::Od;  // Od or Demand
  MetricSet model;
  MetricSet baseline;  // historical average
};

enum class EvalSplit { Train, Validation, Test };

std::string to_string(EvalSplit split);
EvalSplit parse_eval_split(const std::string& text);

struct Evaluation {
  std::vector<MetricReport> reports;
  std::size_t targets = 0;
  EvalSplit split = EvalSplit::Test;
};

/// Predicts every eligible target of the split and scores model and
/// historical average alike. Throws ConfigError if the checkpoint does not
/// match the store.
Evaluation evaluate(const Checkpoint& checkpoint, const GraphStore& store,
                    EvalSplit split = EvalSplit::Test);

/// Extra fields echoed under "config" in reports.
struct ReportContext {
  std::string config_json = "{}";  // JSON object merged into the echo
  std::optional<std::string> timestamp;
};

/// [{"task":"od","mape":{"0":..},"mae":{..},"counts":{..},"baseline":{..},"config":{..}}, ...]
std::string report_json(const Evaluation& evaluation, const ReportContext& context);
/// Long form: task,source,metric,threshold,value
std::string report_csv(const Evaluation& evaluation);

/// Local time as "YYYY-MM-DDTHH:MM:SS".
std::string current_timestamp();

}  // namespace odflow
