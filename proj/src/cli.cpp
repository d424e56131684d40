#include "rttlab/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "rttlab/error.hpp"
#include "rttlab/generator.hpp"
#include "rttlab/metrics.hpp"
#include "rttlab/netem.hpp"
#include "rttlab/similarity.hpp"
#include "rttlab/train.hpp"
#include "rttlab/transfer.hpp"

namespace rttlab::cli {

namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

// Per-stage streams derived from the single --seed.
enum Stage : std::uint64_t { kStageGrid = 1, kStageFineTune = 2, kStageGenerate = 3, kStageEmulate = 4, kStageEval = 5 };

std::string out_path(const PipelineConfig& cfg, const std::string& explicit_path, const std::string& default_name) {
  if (!explicit_path.empty()) return explicit_path;
  fs::create_directories(cfg.out_dir);
  return (fs::path(cfg.out_dir) / default_name).string();
}

double timing(double seconds) { return reproducible_mode() ? 0.0 : seconds; }

void write_json(const std::string& path, const ojson& doc) { write_text_file(path, doc.dump(2) + "\n"); }

// Writes the model and reads it back; a mismatch is an error.
void write_model_checked(const std::string& path, const LstmModel& model) {
  save_model_file(path, model);
  const LstmModel reloaded = load_model_file(path);
  if (!(reloaded.weights == model.weights)) fail(ErrorKind::kIo, "model written to `" + path + "` does not reload");
}

void write_trace_checked(const std::string& path, const RttTrace& trace) {
  write_trace_file(path, trace);
  const RttTrace reloaded = read_trace_file(path);
  if (reloaded.samples != trace.samples) fail(ErrorKind::kIo, "trace written to `" + path + "` does not reload");
}

RttTrace read_trace_with_context(const std::string& path, const std::string& context) {
  RttTrace trace = read_trace_file(path);
  trace.context = context.empty() ? fs::path(path).stem().string() : context;
  return trace;
}

TrainConfig train_config(const PipelineConfig& cfg, Stage stage) {
  TrainConfig tc;
  tc.batch_size = cfg.batch_size;
  tc.epochs = cfg.epochs;
  tc.seed = derive_seed(cfg.seed, stage);
  tc.adam.learning_rate = cfg.learning_rate;
  tc.k_frozen = 0;
  return tc;
}

template <typename T>
void read_key(const nlohmann::json& doc, const char* key, T& out) {
  if (doc.contains(key)) out = doc.at(key).get<T>();
}

std::optional<std::string> find_config_arg(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return std::nullopt;
}

struct Context {
  PipelineConfig cfg;
  std::ostream& out;
  std::ostream& err;
};

int cmd_train_source(Context& ctx, const std::string& trace_path, const std::string& model_out,
                     const std::string& report_out, const std::string& label) {
  const auto& cfg = ctx.cfg;
  const RttTrace trace = read_trace_with_context(trace_path, label);
  const auto parts = split(trace.samples, SplitSpec{0.8});
  const auto train_std = standardize(parts.train);
  const auto test_std = standardize(parts.test);

  HyperGrid grid;
  grid.layers = cfg.layers;
  grid.hidden_units = cfg.hidden_units;
  grid.batch_sizes = cfg.batch_sizes;
  grid.epochs = cfg.epoch_options;
  TrainConfig base = train_config(cfg, kStageGrid);
  auto result = grid_search(train_std.values, test_std.values, test_std.standardizer, grid, base);
  for (const auto& row : result.rows) {
    if (row.error) ctx.err << "warning: grid point L=" << row.layers << " N=" << row.hidden_units << " skipped: " << *row.error << "\n";
  }

  LstmModel model;
  model.weights = std::move(result.best_weights);
  model.standardizer = train_std.standardizer;
  model.metadata.context = trace.context;
  model.metadata.training_length = parts.train.size();
  model.metadata.median_ms = median(parts.train);
  model.metadata.train_smape = evaluate_one_step(model.weights, train_std.values, train_std.standardizer).smape;
  model.metadata.test_smape = result.rows[result.best_row].test_smape;
  model.metadata.created_at = creation_timestamp();

  const std::string model_path = out_path(cfg, model_out, "source.lstm.json");
  const std::string report_path = out_path(cfg, report_out, "grid.csv");
  write_model_checked(model_path, model);
  write_text_file(report_path, grid_report_csv(result.rows, !reproducible_mode()));
  const auto& best = result.rows[result.best_row];
  ctx.out << "selected L=" << best.layers << " N=" << best.hidden_units << " B=" << best.batch_size
          << " epochs=" << best.epochs << " test_mse=" << format_double(best.test_mse)
          << " test_smape=" << format_double(best.test_smape) << "\nmodel: " << model_path
          << "\nreport: " << report_path << "\n";
  return 0;
}

int cmd_library_add(Context& ctx, const std::string& library_dir, const std::string& model_path,
                    const std::string& trace_path) {
  const LstmModel model = load_model_file(model_path);
  const RttTrace source = read_trace_file(trace_path);
  ModelLibrary::add_to_directory(library_dir, model, make_fingerprint(source.samples));
  const auto lib = ModelLibrary::load(library_dir);
  ctx.out << "added `" << model.metadata.context << "`; library now holds " << lib.size() << " entries\n";
  return 0;
}

int cmd_library_list(Context& ctx, const std::string& library_dir) {
  const auto lib = ModelLibrary::load(library_dir);
  ojson list = ojson::array();
  for (const auto& e : lib.entries()) {
    const auto& a = e.model.architecture();
    list.push_back({{"context", e.model.metadata.context},
                    {"model", e.model_file},
                    {"fingerprint", e.fingerprint_file},
                    {"layers", a.num_layers},
                    {"hidden_units", a.hidden_units},
                    {"fingerprint_points", e.fingerprint.size()},
                    {"test_smape", e.model.metadata.test_smape}});
  }
  ctx.out << list.dump(2) << "\n";
  return 0;
}

ojson selection_json(const ModelLibrary& lib, const Selection& sel) {
  ojson distances = ojson::array();
  for (std::size_t k = 0; k < lib.size(); ++k) {
    distances.push_back({{"context", lib.entries()[k].model.metadata.context}, {"normalized_dtw", sel.distances[k]}});
  }
  return {{"source_index", sel.index},
          {"source_context", lib.entries()[sel.index].model.metadata.context},
          {"normalized_dtw", sel.normalized_dtw},
          {"candidates", std::move(distances)}};
}

int cmd_select(Context& ctx, const std::string& library_dir, const std::string& target_path,
               const std::string& report_out) {
  const auto lib = ModelLibrary::load(library_dir);
  const RttTrace target = read_trace_file(target_path);
  const auto sel = select_source(lib, target);
  const ojson doc = selection_json(lib, sel);
  write_json(out_path(ctx.cfg, report_out, "selection.json"), doc);
  ctx.out << doc.dump(2) << "\n";
  return 0;
}

int cmd_finetune(Context& ctx, const std::string& library_dir, const std::string& target_path,
                 const std::string& model_out, const std::string& report_out, const std::string& label) {
  const auto& cfg = ctx.cfg;
  const auto lib = ModelLibrary::load(library_dir);
  if (lib.empty()) fail(ErrorKind::kArgument, "library `" + library_dir + "` is empty");
  const RttTrace target = read_trace_with_context(target_path, label);
  target.validate();
  if (target.size() < kRecommendedTargetSamples) {
    ctx.err << "WARNING: target sample has " << target.size() << " RTTs; at least " << kRecommendedTargetSamples
            << " are recommended for an accurate target model\n";
  }
  const auto sel = select_source(lib, target);
  const auto& source = lib.entries()[sel.index].model;

  const auto parts = split(target.samples, SplitSpec{0.8});
  const RttTrace train_part{parts.train, target.interval_ms, target.context};
  const RttTrace test_part{parts.test, target.interval_ms, target.context};
  int k_frozen = cfg.k_frozen;
  if (k_frozen >= source.architecture().num_layers) {
    k_frozen = source.architecture().num_layers - 1;
    ctx.err << "warning: source `" << source.metadata.context << "` has " << source.architecture().num_layers
            << " LSTM layer(s); freezing " << k_frozen << " instead of " << cfg.k_frozen << "\n";
  }
  auto result = fine_tune(source, train_part, FreezeSpec{k_frozen}, train_config(cfg, kStageFineTune), &test_part);

  const std::string model_path = out_path(cfg, model_out, "target.lstm.json");
  write_model_checked(model_path, result.model);
  ojson doc = selection_json(lib, sel);
  doc["k_frozen"] = k_frozen;
  doc["target_samples"] = target.size();
  doc["train_samples"] = train_part.size();
  doc["test_samples"] = test_part.size();
  doc["train_smape"] = result.model.metadata.train_smape;
  doc["test_mse"] = result.report.test_mse;
  doc["test_smape"] = result.report.test_smape;
  doc["seconds"] = timing(result.report.seconds);
  doc["below_recommended_size"] = target.size() < kRecommendedTargetSamples;
  doc["model"] = model_path;
  write_json(out_path(cfg, report_out, "finetune.json"), doc);
  ctx.out << "source `" << source.metadata.context << "` (normalized DTW " << format_double(sel.normalized_dtw)
          << "), test SMAPE " << format_double(result.report.test_smape) << "%\nmodel: " << model_path << "\n";
  return 0;
}

int cmd_generate(Context& ctx, const std::string& model_path, std::optional<double> seed_value,
                 std::optional<double> sigma, const std::string& trace_out) {
  const LstmModel model = load_model_file(model_path);
  GenerationSpec spec;
  spec.length = ctx.cfg.generation_length;
  spec.seed_value = seed_value;
  spec.sigma = sigma;
  spec.rng_seed = derive_seed(ctx.cfg.seed, kStageGenerate);
  const RttTrace trace = generate(model, spec);
  const std::string path = out_path(ctx.cfg, trace_out, "synthetic.csv");
  write_trace_checked(path, trace);
  ctx.out << "generated " << trace.size() << " samples -> " << path << "\n";
  return 0;
}

int cmd_emulate(Context& ctx, const std::string& trace_path, double offset_ms, const std::string& report_out) {
  const auto& cfg = ctx.cfg;
  if (cfg.runs < 1) fail(ErrorKind::kArgument, "--runs must be >= 1");
  if (cfg.pings < 1) fail(ErrorKind::kArgument, "--pings must be >= 1");
  DelayProfile profile;
  profile.trace = read_trace_file(trace_path);
  profile.update_interval_ms = cfg.update_interval_ms;
  profile.reconfig_cost_ms = cfg.reconfig_cost_ms;
  profile.uplink_fraction = cfg.uplink_fraction;
  const double offset = offset_ms >= 0.0 ? offset_ms : profile.reconfig_cost_ms;
  const auto schedule = PingSchedule::periodic(static_cast<std::size_t>(cfg.pings), cfg.ping_interval_ms, offset);
  const auto runs = run_emulations(profile, schedule, cfg.runs, derive_seed(cfg.seed, kStageEmulate));
  const auto report = evaluate_accuracy(profile.trace.samples, runs);
  const std::string path = out_path(cfg, report_out, "emulation.json");
  write_text_file(path, emulation_report_json(report));
  ctx.out << emulation_report_json(report);
  return 0;
}

int cmd_evaluate(Context& ctx, const std::string& model_path, const std::string& trace_path, int runs,
                 const std::string& mode, const std::string& report_out) {
  const LstmModel model = load_model_file(model_path);
  const RttTrace trace = read_trace_file(trace_path);
  const auto parts = split(trace.samples, SplitSpec{0.8});
  const auto ev = evaluate_model(model, RttTrace{parts.test, trace.interval_ms, trace.context});
  ojson doc = {{"model", model_path}, {"trace", trace_path}, {"test_samples", parts.test.size()},
               {"test_mse", ev.mse}, {"test_smape", ev.smape}};
  if (runs > 0) {
    if (mode != "finetune" && mode != "scratch") fail(ErrorKind::kArgument, "--mode must be finetune or scratch");
    TrainConfig tc = train_config(ctx.cfg, kStageEval);
    tc.k_frozen = mode == "finetune" ? std::min(ctx.cfg.k_frozen, model.architecture().num_layers - 1) : 0;
    const auto v = out_of_sample_validate(model.weights, trace.samples, runs,
                                          mode == "finetune" ? ValidationMode::kFineTune : ValidationMode::kScratch, tc);
    doc["validation"] = {{"mode", mode},       {"runs", runs},
                         {"run_smape", v.run_smape}, {"mean_smape", v.mean_smape},
                         {"ci95_low", v.ci_low}, {"ci95_high", v.ci_high}};
  }
  write_json(out_path(ctx.cfg, report_out, "evaluation.json"), doc);
  ctx.out << doc.dump(2) << "\n";
  return 0;
}

}  // namespace

PipelineConfig load_config(const std::string& path) {
  PipelineConfig cfg;
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
    read_key(doc, "seed", cfg.seed);
    read_key(doc, "out", cfg.out_dir);
    read_key(doc, "batch_size", cfg.batch_size);
    read_key(doc, "epochs", cfg.epochs);
    read_key(doc, "k_frozen", cfg.k_frozen);
    read_key(doc, "learning_rate", cfg.learning_rate);
    read_key(doc, "grid_layers", cfg.layers);
    read_key(doc, "grid_hidden_units", cfg.hidden_units);
    read_key(doc, "grid_batch_sizes", cfg.batch_sizes);
    read_key(doc, "grid_epochs", cfg.epoch_options);
    read_key(doc, "generation_length", cfg.generation_length);
    read_key(doc, "update_interval_ms", cfg.update_interval_ms);
    read_key(doc, "reconfig_cost_ms", cfg.reconfig_cost_ms);
    read_key(doc, "uplink_fraction", cfg.uplink_fraction);
    read_key(doc, "pings", cfg.pings);
    read_key(doc, "ping_interval_ms", cfg.ping_interval_ms);
    read_key(doc, "runs", cfg.runs);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, "config `" + path + "`: " + e.what());
  }
  return cfg;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Context ctx{PipelineConfig{}, out, err};
  try {
    if (auto path = find_config_arg(args)) ctx.cfg = load_config(*path);
  } catch (const Error& e) {
    err << "rttlab: " << e.what() << "\n";
    return 1;
  }
  auto& cfg = ctx.cfg;

  CLI::App app{"RTT trace modeling, transfer learning, synthesis and delay emulation", "rttlab"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--seed", cfg.seed, "Master seed; every stage derives its own stream")->capture_default_str();
  app.add_option("--out", cfg.out_dir, "Output directory")->capture_default_str();
  app.add_option("--config", config_path, "JSON file with pipeline defaults");

  std::string trace_path, model_path, library_dir, target_path, model_out, report_out, trace_out, label;

  auto* train_cmd = app.add_subcommand("train-source", "Grid-search a source model on a trace");
  train_cmd->add_option("--trace", trace_path, "Source trace (trace-csv)")->required();
  train_cmd->add_option("--model-out", model_out, "Model file (default <out>/source.lstm.json)");
  train_cmd->add_option("--report", report_out, "Grid report CSV (default <out>/grid.csv)");
  train_cmd->add_option("--context", label, "Context label stored in the model");
  train_cmd->add_option("--layers", cfg.layers, "Grid: LSTM layer counts")->delimiter(',');
  train_cmd->add_option("--hidden", cfg.hidden_units, "Grid: hidden units")->delimiter(',');
  train_cmd->add_option("--batch", cfg.batch_sizes, "Grid: batch sizes")->delimiter(',');
  train_cmd->add_option("--epochs", cfg.epoch_options, "Grid: epoch counts")->delimiter(',');
  train_cmd->add_option("--learning-rate", cfg.learning_rate);

  auto* lib_cmd = app.add_subcommand("library", "Manage the source-model library");
  lib_cmd->require_subcommand(1);
  auto* lib_add = lib_cmd->add_subcommand("add", "Add a model and its source-trace fingerprint");
  lib_add->add_option("--library", library_dir)->required();
  lib_add->add_option("--model", model_path)->required();
  lib_add->add_option("--trace", trace_path, "The source trace the model was trained on")->required();
  auto* lib_list = lib_cmd->add_subcommand("list", "List library entries as JSON");
  lib_list->add_option("--library", library_dir)->required();

  auto* select_cmd = app.add_subcommand("select", "Pick the source model closest to a target sample (DTW)");
  select_cmd->add_option("--library", library_dir)->required();
  select_cmd->add_option("--target", target_path)->required();
  select_cmd->add_option("--report", report_out, "Selection JSON (default <out>/selection.json)");

  auto* ft_cmd = app.add_subcommand("finetune", "Select a source and fine-tune it on a target sample");
  ft_cmd->add_option("--library", library_dir)->required();
  ft_cmd->add_option("--target", target_path)->required();
  ft_cmd->add_option("--model-out", model_out, "Model file (default <out>/target.lstm.json)");
  ft_cmd->add_option("--report", report_out, "Report JSON (default <out>/finetune.json)");
  ft_cmd->add_option("--context", label, "Context label for the target model");
  ft_cmd->add_option("--k-frozen", cfg.k_frozen, "Initial LSTM layers to freeze")->capture_default_str();
  ft_cmd->add_option("--epochs", cfg.epochs)->capture_default_str();
  ft_cmd->add_option("--batch", cfg.batch_size)->capture_default_str();
  ft_cmd->add_option("--learning-rate", cfg.learning_rate);

  std::optional<double> seed_value, sigma;
  auto* gen_cmd = app.add_subcommand("generate", "Synthesize an RTT trace from a model");
  gen_cmd->add_option("--model", model_path)->required();
  gen_cmd->add_option("--length", cfg.generation_length, "Samples to generate")->capture_default_str();
  gen_cmd->add_option("--seed-value", seed_value, "Seed RTT in ms (default: training median)");
  gen_cmd->add_option("--sigma", sigma, "ProbAct noise override");
  gen_cmd->add_option("--trace-out", trace_out, "Output trace (default <out>/synthetic.csv)");

  double offset_ms = -1.0;
  auto* emu_cmd = app.add_subcommand("emulate", "Replay a trace through the delay simulator");
  emu_cmd->add_option("--trace", trace_path)->required();
  emu_cmd->add_option("--runs", cfg.runs)->capture_default_str();
  emu_cmd->add_option("--pings", cfg.pings)->capture_default_str();
  emu_cmd->add_option("--ping-interval", cfg.ping_interval_ms)->capture_default_str();
  emu_cmd->add_option("--ping-offset", offset_ms, "First send time in ms (default: reconfiguration cost)");
  emu_cmd->add_option("--update-interval", cfg.update_interval_ms)->capture_default_str();
  emu_cmd->add_option("--reconfig-cost", cfg.reconfig_cost_ms)->capture_default_str();
  emu_cmd->add_option("--uplink-fraction", cfg.uplink_fraction)->capture_default_str();
  emu_cmd->add_option("--report", report_out, "Report JSON (default <out>/emulation.json)");

  int eval_runs = 0;
  std::string eval_mode = "finetune";
  auto* eval_cmd = app.add_subcommand("evaluate", "Test SMAPE of a model and optional out-of-sample validation");
  eval_cmd->add_option("--model", model_path)->required();
  eval_cmd->add_option("--trace", trace_path)->required();
  eval_cmd->add_option("--runs", eval_runs, "Rolling-origin validation runs (0 = skip)");
  eval_cmd->add_option("--mode", eval_mode, "finetune | scratch");
  eval_cmd->add_option("--epochs", cfg.epochs)->capture_default_str();
  eval_cmd->add_option("--batch", cfg.batch_size)->capture_default_str();
  eval_cmd->add_option("--report", report_out, "Report JSON (default <out>/evaluation.json)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*train_cmd) return cmd_train_source(ctx, trace_path, model_out, report_out, label);
    if (*lib_add) return cmd_library_add(ctx, library_dir, model_path, trace_path);
    if (*lib_list) return cmd_library_list(ctx, library_dir);
    if (*select_cmd) return cmd_select(ctx, library_dir, target_path, report_out);
    if (*ft_cmd) return cmd_finetune(ctx, library_dir, target_path, model_out, report_out, label);
    if (*gen_cmd) return cmd_generate(ctx, model_path, seed_value, sigma, trace_out);
    if (*emu_cmd) return cmd_emulate(ctx, trace_path, offset_ms, report_out);
    if (*eval_cmd) return cmd_evaluate(ctx, model_path, trace_path, eval_runs, eval_mode, report_out);
  } catch (const Error& e) {
    err << "rttlab: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "rttlab: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace rttlab::cli
