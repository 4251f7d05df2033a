#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "odflow/checkpoint.hpp"
#include "odflow/errors.hpp"
#include "odflow/graph_store.hpp"
#include "odflow/ingest.hpp"
#include "odflow/metrics.hpp"
#include "odflow/pipeline.hpp"
#include "odflow/synthgen.hpp"
#include "odflow/trainer.hpp"

namespace fs = std::filesystem;
using namespace odflow;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::optional<std::uint64_t> env_seed() {
  const char* env = std::getenv("ODFLOW_SEED");
  if (env == nullptr || *env == '\0') return std::nullopt;
  try {
    std::size_t used = 0;
    const std::uint64_t seed = std::stoull(env, &used);
    if (env[used] == '\0') return seed;
  } catch (const std::exception&) {
  }
  throw ConfigError(std::string("ODFLOW_SEED is not an integer: ") + env);
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

std::vector<double> parse_doubles(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("'" + item + "' is not a number");
    }
  }
  if (out.empty()) throw ConfigError("empty value list");
  return out;
}

std::vector<int> parse_ints(const std::string& list) {
  std::vector<int> out;
  for (double v : parse_doubles(list)) {
    if (v != static_cast<int>(v)) throw ConfigError("expected integers, got " + list);
    out.push_back(static_cast<int>(v));
  }
  return out;
}

// Column-name flags shared by every command that reads trip CSVs.
struct SchemaFlags {
  CsvSchema schema;
  void add(CLI::App* app) {
    app->add_option("--col-time", schema.pickup_time, "Pickup time column");
    app->add_option("--col-pickup-lat", schema.pickup_lat, "Pickup latitude column");
    app->add_option("--col-pickup-lon", schema.pickup_lon, "Pickup longitude column");
    app->add_option("--col-dropoff-lat", schema.dropoff_lat, "Dropoff latitude column");
    app->add_option("--col-dropoff-lon", schema.dropoff_lon, "Dropoff longitude column");
    app->add_option("--col-passengers", schema.passenger_count, "Passenger count column");
  }
};

// Training flags; values are only applied when given, so a --config file
// supplies the defaults and flags override it.
struct TrainFlags {
  std::string config_file;
  std::optional<int> epochs, h, dim, embed_dim, heads;
  std::optional<double> lr, geo_threshold;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> optimizer, task, channels;
  bool disable_ha = false;
  bool disable_nonlinear = false;

  void add(CLI::App* app) {
    app->add_option("--config", config_file, "JSON training config (flags override it)");
    app->add_option("--epochs", epochs, "Training epochs (default 200)");
    app->add_option("--lr", lr, "Learning rate (default 0.001)");
    app->add_option("--seed", seed, "Random seed (falls back to ODFLOW_SEED)");
    app->add_option("--h", h, "Length of the recent channel in slots (default 6)");
    app->add_option("--dim", dim, "Hidden width z' (default 64)");
    app->add_option("--embed-dim", embed_dim, "Width of each categorical embedding (default 8)");
    app->add_option("--heads", heads, "Spatial attention heads (default 4)");
    app->add_option("--optimizer", optimizer, "adam or sgd")->check(CLI::IsMember({"adam", "sgd"}));
    app->add_option("--task", task, "od, demand or both")->check(CLI::IsMember({"od", "demand", "both"}));
    app->add_option("--channels", channels, "Temporal channels, e.g. prev,next,same,recent");
    app->add_option("--geo-threshold-km", geo_threshold, "Geographic neighbor threshold");
    app->add_flag("--disable-ha", disable_ha, "Do not blend with the historical average");
    app->add_flag("--disable-nonlinear-channel", disable_nonlinear, "Drop the recent channel");
  }

  TrainConfig resolve() const {
    TrainConfig c;
    if (const auto env = env_seed()) c.seed = *env;
    if (!config_file.empty()) c = train_config_from_json(read_file(config_file), c);
    if (epochs) c.epochs = *epochs;
    if (lr) c.learning_rate = *lr;
    if (seed) c.seed = *seed;
    if (h) c.model.history_hours = *h;
    if (dim) c.model.hidden_dim = *dim;
    if (embed_dim) c.model.embed_dim = *embed_dim;
    if (heads) c.model.heads = *heads;
    if (optimizer) c.optimizer = parse_optimizer(*optimizer);
    if (task) c.task = parse_task(*task);
    if (channels) apply_channel_list(c.model, *channels);
    if (geo_threshold) c.geo_threshold_km = *geo_threshold;
    if (disable_ha) c.model.use_historical_average = false;
    if (disable_nonlinear) c.model.use_recent = false;
    c.validate();
    return c;
  }
};

std::vector<TripRecord> load_trips(const std::vector<std::string>& files, const CsvSchema& schema,
                                   RejectTally* rejects = nullptr) {
  std::vector<fs::path> paths(files.begin(), files.end());
  ParseResult parsed = parse_trip_files(paths, schema);
  if (rejects != nullptr) *rejects = parsed.rejects;
  return std::move(parsed.records);
}

std::string rejects_json(std::size_t accepted, const RejectTally& r) {
  nlohmann::ordered_json j;
  j["accepted"] = accepted;
  j["rejected"] = {{"unparsable", r.unparsable},
                   {"out_of_range", r.out_of_range},
                   {"zero_passengers", r.zero_passengers}};
  return j.dump() + "\n";
}

// Bad user-supplied geometry is a validation error, not a runtime failure.
BoundingBox bbox_flag(const std::string& text) {
  try {
    return parse_bbox(text);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("--bbox: ") + e.what());
  }
}

void check_grid_flags(const BoundingBox& bbox, double cell_km) {
  try {
    build_grid(bbox, cell_km);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

int run(int argc, char** argv) {
  CLI::App app{"Origin-destination demand prediction on gridded trip data"};
  app.require_subcommand(1);
  // --h is the recent-channel length, so help is long-form only
  app.set_help_flag("--help", "Print this help message and exit");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic trip CSV with planted patterns");
  std::string synth_grid = "5x5", synth_out, synth_preset_name = "commuter", synth_config;
  int synth_days = 28;
  double synth_cell_km = 2.5;
  std::optional<std::uint64_t> synth_seed;
  synth->add_option("--grid", synth_grid, "Grid size RxC")->capture_default_str();
  synth->add_option("--days", synth_days, "Number of days")->capture_default_str();
  synth->add_option("--seed", synth_seed, "Random seed (falls back to ODFLOW_SEED, then 7)");
  synth->add_option("--cell-km", synth_cell_km, "Cell side in km")->capture_default_str();
  synth->add_option("--preset", synth_preset_name, "commuter or commuter+events")
      ->check(CLI::IsMember({"commuter", "commuter+events"}))
      ->capture_default_str();
  synth->add_option("--config", synth_config, "JSON synthetic config applied over the preset");
  synth->add_option("--out", synth_out, "Output CSV")->required();

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate trip CSVs and write the accepted records");
  std::vector<std::string> ingest_inputs;
  std::string ingest_out;
  SchemaFlags ingest_schema;
  ingest->add_option("--input", ingest_inputs, "Trip CSV files")->required();
  ingest->add_option("--out", ingest_out, "Cleaned CSV")->required();
  ingest_schema.add(ingest);

  // build-graphs
  auto* build = app.add_subcommand("build-graphs", "Grid trips and aggregate per-slot OD graphs");
  std::vector<std::string> build_inputs;
  std::string build_bbox, build_out, build_weight = "passengers";
  double build_cell_km = 2.5;
  int build_slot_minutes = 60;
  SchemaFlags build_schema;
  build->add_option("--trips", build_inputs, "Trip CSV files")->required();
  build->add_option("--bbox", build_bbox, "minlat,minlon,maxlat,maxlon")->required();
  build->add_option("--cell-km", build_cell_km, "Cell side in km")->capture_default_str();
  build->add_option("--slot-minutes", build_slot_minutes, "Slot length")->capture_default_str();
  build->add_option("--weight", build_weight, "passengers or trips")
      ->check(CLI::IsMember({"passengers", "trips"}))
      ->capture_default_str();
  build->add_option("--out", build_out, "Graph store path (JSON lines)")->required();
  build_schema.add(build);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model on a graph store");
  std::string train_graphs, train_checkpoint, train_log;
  TrainFlags train_flags;
  bool train_quiet = false;
  train_cmd->add_option("--graphs", train_graphs, "Graph store")->required();
  train_cmd->add_option("--checkpoint", train_checkpoint, "Checkpoint output")->required();
  train_cmd->add_option("--loss-log", train_log, "Per-epoch loss CSV (default <checkpoint>.loss.csv)");
  train_cmd->add_flag("--quiet", train_quiet, "No per-epoch progress on stderr");
  train_flags.add(train_cmd);

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a checkpoint against the historical average");
  std::string eval_checkpoint, eval_graphs, eval_out, eval_format = "json", eval_split = "test";
  bool eval_no_timestamp = false;
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "Checkpoint")->required();
  eval_cmd->add_option("--graphs", eval_graphs, "Graph store")->required();
  eval_cmd->add_option("--split", eval_split, "train, validation or test")->capture_default_str();
  eval_cmd->add_option("--format", eval_format, "json or csv")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();
  eval_cmd->add_option("--out", eval_out, "Report path (default stdout)");
  eval_cmd->add_flag("--no-timestamp", eval_no_timestamp, "Omit the timestamp from the report");

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "Predict demand and OD flows for one slot");
  std::string predict_checkpoint, predict_graphs, predict_out;
  int predict_day = 0, predict_slot = 1;
  double predict_threshold = 0.0;
  predict_cmd->add_option("--checkpoint", predict_checkpoint, "Checkpoint")->required();
  predict_cmd->add_option("--graphs", predict_graphs, "Graph store")->required();
  predict_cmd->add_option("--day", predict_day, "0-based day of the target")->required();
  predict_cmd->add_option("--slot", predict_slot, "1-based slot of the target")->required();
  predict_cmd->add_option("--threshold", predict_threshold, "Emit OD entries above this value")
      ->capture_default_str();
  predict_cmd->add_option("--out", predict_out, "Prediction path (default stdout)");

  // sweep-grid
  auto* sweep_grid_cmd = app.add_subcommand("sweep-grid", "Retrain and evaluate per cell length");
  std::vector<std::string> sg_inputs;
  std::string sg_bbox, sg_cells = "2.3,2.4,2.5,2.6,2.7", sg_out, sg_format = "csv", sg_weight = "passengers";
  int sg_slot_minutes = 60;
  TrainFlags sg_flags;
  SchemaFlags sg_schema;
  sweep_grid_cmd->add_option("--trips", sg_inputs, "Trip CSV files")->required();
  sweep_grid_cmd->add_option("--bbox", sg_bbox, "minlat,minlon,maxlat,maxlon")->required();
  sweep_grid_cmd->add_option("--cells", sg_cells, "Comma-separated cell lengths in km")
      ->capture_default_str();
  sweep_grid_cmd->add_option("--slot-minutes", sg_slot_minutes, "Slot length")->capture_default_str();
  sweep_grid_cmd->add_option("--weight", sg_weight, "passengers or trips")
      ->check(CLI::IsMember({"passengers", "trips"}));
  sweep_grid_cmd->add_option("--format", sg_format, "csv or json")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();
  sweep_grid_cmd->add_option("--out", sg_out, "Table path (default stdout)");
  sg_flags.add(sweep_grid_cmd);
  sg_schema.add(sweep_grid_cmd);

  // sweep-hours
  auto* sweep_hours_cmd = app.add_subcommand("sweep-hours", "Retrain and evaluate per recent-channel length");
  std::string sh_graphs, sh_hours = "6,23", sh_out, sh_format = "csv";
  bool sh_ablation = false;
  TrainFlags sh_flags;
  sweep_hours_cmd->add_option("--graphs", sh_graphs, "Graph store")->required();
  sweep_hours_cmd->add_option("--hours", sh_hours, "Comma-separated h values")->capture_default_str();
  sweep_hours_cmd->add_flag("--ablation", sh_ablation, "Add a row without the recent channel");
  sweep_hours_cmd->add_option("--format", sh_format, "csv or json")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();
  sweep_hours_cmd->add_option("--out", sh_out, "Table path (default stdout)");
  sh_flags.add(sweep_hours_cmd);

  // report
  auto* report_cmd = app.add_subcommand("report", "Tabulate evaluation reports side by side");
  std::vector<std::string> report_inputs;
  std::string report_out;
  report_cmd->add_option("--inputs", report_inputs, "Evaluation JSON reports")->required();
  report_cmd->add_option("--out", report_out, "Markdown table path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  if (synth->parsed()) {
    int rows = 0, cols = 0;
    char x = 0;
    std::istringstream g(synth_grid);
    if (!(g >> rows >> x >> cols) || x != 'x' || !g.eof()) {
      throw ConfigError("--grid must look like 5x5");
    }
    SynthConfig config = synth_preset(synth_preset_name, rows, cols, synth_days,
                                     synth_seed ? *synth_seed : env_seed().value_or(7));
    config.cell_km = synth_cell_km;
    if (!synth_config.empty()) config = synth_config_from_json(read_file(synth_config), config);
    if (synth_seed) config.seed = *synth_seed;  // the flag beats the config file
    config.validate();
    std::ofstream out(synth_out, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + synth_out);
    write_synth_csv(out, config);
    std::cout << "bbox " << format_bbox(synth_bbox(config)) << "\n";
    return 0;
  }

  if (ingest->parsed()) {
    RejectTally rejects;
    const auto trips = load_trips(ingest_inputs, ingest_schema.schema, &rejects);
    std::ofstream out(ingest_out, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + ingest_out);
    write_trips_csv(out, trips, ingest_schema.schema);
    std::cout << rejects_json(trips.size(), rejects);
    return 0;
  }

  if (build->parsed()) {
    const BoundingBox bbox = bbox_flag(build_bbox);
    check_grid_flags(bbox, build_cell_km);
    if (build_slot_minutes <= 0 || 1440 % build_slot_minutes != 0) {
      throw ConfigError("--slot-minutes must divide 1440");
    }
    RejectTally rejects;
    const auto trips = load_trips(build_inputs, build_schema.schema, &rejects);
    GraphBuildStats stats;
    const GraphStore store = build_store(trips, bbox, build_cell_km, build_slot_minutes,
                                         parse_weight_mode(build_weight), &stats);
    write_graph_store(build_out, store);
    nlohmann::ordered_json j;
    j["cells"] = store.grid.size();
    j["rows"] = store.grid.rows;
    j["cols"] = store.grid.cols;
    j["days"] = store.sequence.num_days;
    j["accepted"] = stats.accepted;
    j["out_of_bbox"] = stats.out_of_bbox;
    j["rejected"] = rejects.total();
    std::cout << j.dump() << "\n";
    return 0;
  }

  if (train_cmd->parsed()) {
    const TrainConfig config = train_flags.resolve();
    const GraphStore store = read_graph_store(train_graphs);
    const TrainResult result = train(config, store, [&](const EpochLog& e) {
      if (train_quiet) return;
      std::cerr << "epoch " << e.epoch << " train " << e.train_loss;
      if (e.val_loss) std::cerr << " val " << *e.val_loss;
      std::cerr << "\n";
    });
    save_checkpoint(train_checkpoint, result.best);
    std::ostringstream log;
    write_loss_log(log, result.log);
    write_output(train_log.empty() ? train_checkpoint + ".loss.csv" : train_log, log.str());
    std::cout << "best epoch " << result.best.epoch << ", " << result.train_targets
              << " training targets, " << result.skipped_targets << " skipped for history\n";
    return 0;
  }

  if (eval_cmd->parsed()) {
    const Checkpoint checkpoint = load_checkpoint(eval_checkpoint);
    const GraphStore store = read_graph_store(eval_graphs);
    const Evaluation e = evaluate(checkpoint, store, parse_eval_split(eval_split));
    ReportContext context;
    context.config_json = config_json(checkpoint.config);
    if (!eval_no_timestamp) context.timestamp = current_timestamp();
    write_output(eval_out, eval_format == "csv" ? report_csv(e) : report_json(e, context));
    return 0;
  }

  if (predict_cmd->parsed()) {
    const Checkpoint checkpoint = load_checkpoint(predict_checkpoint);
    const GraphStore store = read_graph_store(predict_graphs);
    const Prediction p = predict(checkpoint, store, predict_day, predict_slot);
    write_output(predict_out, prediction_json(p, predict_threshold));
    return 0;
  }

  if (sweep_grid_cmd->parsed()) {
    const TrainConfig config = sg_flags.resolve();
    const BoundingBox bbox = bbox_flag(sg_bbox);
    const std::vector<double> lengths = parse_doubles(sg_cells);
    for (double km : lengths) check_grid_flags(bbox, km);
    const auto trips = load_trips(sg_inputs, sg_schema.schema);
    const SweepTable table = sweep_grid(trips, bbox, lengths, config,
                                        sg_slot_minutes, parse_weight_mode(sg_weight));
    write_output(sg_out, sg_format == "json" ? sweep_json(table) : sweep_csv(table));
    for (const auto& row : table.rows) {
      if (!row.ok) std::cerr << "cell_km " << row.label << " failed: " << row.error << "\n";
    }
    return 0;
  }

  if (sweep_hours_cmd->parsed()) {
    const TrainConfig config = sh_flags.resolve();
    const GraphStore store = read_graph_store(sh_graphs);
    const SweepTable table = sweep_hours(store, parse_ints(sh_hours), config, sh_ablation);
    write_output(sh_out, sh_format == "json" ? sweep_json(table) : sweep_csv(table));
    for (const auto& row : table.rows) {
      if (!row.ok) std::cerr << "h " << row.label << " failed: " << row.error << "\n";
    }
    return 0;
  }

  if (report_cmd->parsed()) {
    std::ostringstream out;
    out << "| report | task | MAPE-0 | MAPE-3 | MAPE-5 | MAE-0 | MAE-3 | MAE-5 | HA MAPE-0 |\n"
        << "|---|---|---|---|---|---|---|---|---|\n";
    auto cell = [](const nlohmann::json& v) {
      if (v.is_null()) return std::string("-");
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.4f", v.get<double>());
      return std::string(buf);
    };
    for (const auto& path : report_inputs) {
      nlohmann::json doc;
      try {
        doc = nlohmann::json::parse(read_file(path));
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + " is not a JSON report: " + e.what());
      }
      if (!doc.is_array()) throw ConfigError(path + " is not an evaluation report");
      for (const auto& r : doc) {
        out << "| " << fs::path(path).filename().string() << " | " << r.at("task").get<std::string>();
        for (const char* metric : {"mape", "mae"}) {
          for (const char* k : {"0", "3", "5"}) out << " | " << cell(r.at(metric).at(k));
        }
        out << " | " << cell(r.at("baseline").at("mape").at("0")) << " |\n";
      }
    }
    write_output(report_out, out.str());
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
