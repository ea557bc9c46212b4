#include <cinttypes>
#include <cstdio>
#include <deque>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "canids/pipeline.hpp"

namespace canids {

namespace {

struct Common {
  std::uint64_t seed = 0;
};

void add_seed(CLI::App& cmd, Common& common) {
  cmd.add_option("--seed", common.seed, "Seed for every PRNG in the run")->envname("CANIDS_SEED");
}

void add_config(CLI::App& cmd) {
  cmd.add_option("--config", "key=value file; command-line options take precedence");
}

bool given(const std::vector<std::string>& args, const std::string& key) {
  for (const auto& a : args) {
    if (a == key || a.rfind(key + "=", 0) == 0) return true;
  }
  return false;
}

// Replaces `--config FILE` with one `--key=value` argument per file entry,
// placed right after the subcommand and skipping keys already on the line.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::optional<std::string> path;
  for (std::size_t i = 2; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (!path) return args;
  if (!std::ifstream(*path)) throw Error(ErrorCode::IoError, "cannot open config '" + *path + "'");
  std::vector<std::string> injected;
  for (const auto& item : CLI::ConfigINI().from_file(*path)) {
    const auto key = "--" + item.name;
    if (given(args, key)) continue;
    for (const auto& v : item.inputs) injected.push_back(key + "=" + v);
  }
  args.insert(args.begin() + 2, injected.begin(), injected.end());
  return args;
}

std::string format_ts(std::uint64_t us) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%" PRIu64 ".%06" PRIu64, us / 1'000'000, us % 1'000'000);
  return buf;
}

std::string_view label_name(GraphLabel label) {
  return label == GraphLabel::Attacked ? "attacked" : "attack_free";
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot open '" + path + "' for writing");
  return f;
}

void report_skipped(const ParseReport& report, std::ostream& err) {
  for (const auto& w : report.warnings) err << "warning: line " << w.line << ": " << w.text << "\n";
  if (!report.errors.empty()) {
    err << "warning: skipped " << report.errors.size() << " malformed line(s), first at line "
        << report.errors.front().line << "\n";
  }
}

// ---- synth -----------------------------------------------------------------

struct SynthArgs {
  std::size_t normal = 500'000;
  std::size_t ids = 40;
  double jitter = 0.1;
  double dos = 0, fuzzy = 0, spoofing = 0, replay = 0;
  std::uint64_t segment_ms = 2000;
  std::uint64_t replay_source_ms = 20;
  std::size_t spoof_targets = 1;
  std::size_t window = 200;
  std::string out;
  std::string manifest;
};

int cmd_synth(const SynthArgs& a, const Common& common, std::ostream& out) {
  SynthConfig config;
  config.normal_frames = a.normal;
  config.id_count = a.ids;
  config.jitter_fraction = a.jitter;
  config.segment_us = a.segment_ms * 1000;
  config.replay_source_us = a.replay_source_ms * 1000;
  config.spoof_targets = a.spoof_targets;
  config.seed = common.seed;
  const std::pair<AttackKind, double> requested[] = {
      {AttackKind::DoS, a.dos}, {AttackKind::Fuzzy, a.fuzzy}, {AttackKind::Spoofing, a.spoofing},
      {AttackKind::Replay, a.replay}};
  for (auto [kind, intensity] : requested) {
    if (intensity < 0.0) throw Error(ErrorCode::InvalidSpec, "intensity must be >= 0");
    if (intensity > 0.0) config.intensity[kind] = intensity;
  }
  if (a.window < 2) throw Error(ErrorCode::WindowTooSmall, "window must be >= 2");

  const auto stream = synthesize(config);
  write_log_file(a.out, stream.frames);
  const auto manifest_path = a.manifest.empty() ? a.out + ".manifest.json" : a.manifest;
  {
    auto f = open_out(manifest_path);
    f << manifest_to_json(stream.manifest, a.window, count_attacked_windows(stream.frames, a.window, a.window))
      << "\n";
  }

  out << "frames " << stream.frames.size() << " normal " << stream.manifest.normal_frames << " injected "
      << stream.manifest.injected_total() << "\n";
  const auto by_kind = stream.manifest.injected_by_kind();
  for (auto kind : kAllAttackKinds) {
    auto it = by_kind.find(kind);
    out << to_string(kind) << " " << (it == by_kind.end() ? 0 : it->second) << "\n";
  }
  return kExitOk;
}

// ---- graph input shared by graphs/train/eval ---------------------------------

struct GraphSource {
  std::string graphs_path;
  std::string log_path;
  std::size_t window = 200;
  std::size_t stride = 0;  // 0 = window
  bool strict = false;
};

void add_graph_source(CLI::App& cmd, GraphSource& src) {
  auto* g = cmd.add_option("--graphs", src.graphs_path, "Graph dump (JSON lines)");
  auto* l = cmd.add_option("--log", src.log_path, "Labeled CAN log; graphs are built on the fly");
  g->excludes(l);
  cmd.add_option("--window", src.window, "Frames per window")->capture_default_str();
  cmd.add_option("--stride", src.stride, "Frames between window starts (default: window)");
  cmd.add_flag("--strict", src.strict, "Fail on the first malformed log line");
}

std::vector<MessageGraph> load_graphs(const GraphSource& src, std::ostream& err) {
  if (!src.graphs_path.empty()) {
    std::ifstream f(src.graphs_path);
    if (!f) throw Error(ErrorCode::IoError, "cannot open '" + src.graphs_path + "'");
    return read_graph_dump(f);
  }
  if (src.log_path.empty()) throw Error(ErrorCode::BadConfig, "one of --graphs or --log is required");
  if (src.window < 2) throw Error(ErrorCode::WindowTooSmall, "window must be >= 2");
  auto parsed = parse_log_file(src.log_path, ParseOptions{src.strict});
  report_skipped(parsed.report, err);
  return build_graphs(parsed.frames, src.window, src.stride == 0 ? src.window : src.stride);
}

std::vector<GraphLabel> labels_of(std::span<const MessageGraph> graphs) {
  std::vector<GraphLabel> labels;
  labels.reserve(graphs.size());
  for (const auto& g : graphs) labels.push_back(g.label);
  return labels;
}

// ---- graphs ----------------------------------------------------------------

int cmd_graphs(const GraphSource& src, const std::string& out_path, std::ostream& out, std::ostream& err) {
  if (src.log_path.empty()) throw Error(ErrorCode::BadConfig, "--log is required");
  const auto graphs = load_graphs(src, err);
  {
    auto f = open_out(out_path);
    write_graph_dump(f, graphs);
    if (!f) throw Error(ErrorCode::IoError, "write failed: '" + out_path + "'");
  }
  std::size_t attacked = 0;
  for (const auto& g : graphs) attacked += g.label == GraphLabel::Attacked;
  out << "windows " << graphs.size() << " attacked " << attacked << " attack_free " << graphs.size() - attacked
      << "\n";
  return kExitOk;
}

// ---- train / eval ----------------------------------------------------------

struct SplitArgs {
  double fraction = 0.8;
  std::optional<std::uint64_t> seed;  // default: --seed
};

void add_split(CLI::App& cmd, SplitArgs& split) {
  cmd.add_option("--split", split.fraction, "Train fraction of the stratified split")->capture_default_str();
  cmd.add_option("--split-seed", split.seed, "Split seed (default: --seed)");
}

struct ModelArgs {
  std::string adjacency = "symnorm";
  bool normalize_features = false;
};

void add_model_args(CLI::App& cmd, ModelArgs& m) {
  cmd.add_option("--adjacency", m.adjacency, "Convolution adjacency: symnorm or raw")->capture_default_str();
  cmd.add_flag("--normalize-features", m.normalize_features, "Divide degree columns by their per-graph max");
}

struct TrainArgs {
  std::string model;
  std::string history;
  double lr = 0.01;
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  std::string optimizer = "adam";
  double dropout = 0.5;
  std::size_t patience = 0;
  bool allow_single_class = false;
};

int cmd_train(const GraphSource& src, const SplitArgs& split_args, const ModelArgs& m, const TrainArgs& a,
              const Common& common, std::ostream& out, std::ostream& err) {
  TrainConfig config;
  config.learning_rate = a.lr;
  config.epochs = a.epochs;
  config.batch_size = a.batch_size;
  if (a.optimizer == "adam") config.optimizer = OptimizerKind::Adam;
  else if (a.optimizer == "sgd") config.optimizer = OptimizerKind::SGD;
  else throw Error(ErrorCode::BadConfig, "unknown optimizer '" + a.optimizer + "'");
  config.dropout_p = a.dropout;
  config.adjacency_mode = parse_adjacency_mode(m.adjacency);
  config.normalize_features = m.normalize_features;
  config.early_stop_patience = a.patience;
  config.allow_single_class = a.allow_single_class;
  config.seed = common.seed;
  validate_config(config);

  const auto graphs = load_graphs(src, err);
  if (graphs.empty()) throw Error(ErrorCode::EmptyDataset, "no graphs to train on");
  const auto labels = labels_of(graphs);
  const auto split = stratified_split(labels, split_args.fraction, split_args.seed.value_or(common.seed));
  const auto train_set = gather<MessageGraph>(graphs, split.train);
  const auto test_set = gather<MessageGraph>(graphs, split.test);

  const auto result = train(train_set, config, test_set);
  save_params(result.params, a.model);
  if (!a.history.empty()) {
    auto f = open_out(a.history);
    for (const auto& r : result.history) f << epoch_to_json(r) << "\n";
  }

  const auto& last = result.history.back();
  char line[160];
  std::snprintf(line, sizeof line, "epochs %zu train_loss %.6f train_accuracy %.6f", result.history.size(),
                last.train_loss, last.train_accuracy);
  out << line;
  if (last.validation_loss) {
    std::snprintf(line, sizeof line, " validation_loss %.6f validation_accuracy %.6f", *last.validation_loss,
                  *last.validation_accuracy);
    out << line;
  }
  out << "\ntrain_graphs " << train_set.size() << " validation_graphs " << test_set.size() << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string model;
  std::string scenario;
  std::string report;
  std::string subset = "test";
  double threshold = 0.5;
};

int cmd_eval(const GraphSource& src, const SplitArgs& split_args, const ModelArgs& m, const EvalArgs& a,
             const Common& common, std::ostream& out, std::ostream& err) {
  const auto scenario = parse_scenario(a.scenario);
  if (a.subset != "test" && a.subset != "all") throw Error(ErrorCode::BadConfig, "--subset must be test or all");
  const auto mode = parse_adjacency_mode(m.adjacency);
  const auto params = load_params(a.model);

  auto graphs = load_graphs(src, err);
  if (graphs.empty()) throw Error(ErrorCode::EmptyInput, "no graphs to evaluate");
  if (a.subset == "test") {
    const auto labels = labels_of(graphs);
    const auto split = stratified_split(labels, split_args.fraction, split_args.seed.value_or(common.seed));
    graphs = gather<MessageGraph>(graphs, split.test);
  }

  std::vector<GraphTensors> tensors(graphs.size());
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < graphs.size(); ++i) tensors[i] = prepare_graph(graphs[i], mode, m.normalize_features);
  const auto predictions = predict_all(tensors, params, a.threshold);

  std::vector<GraphLabel> predicted;
  predicted.reserve(predictions.size());
  for (const auto& p : predictions) predicted.push_back(p.label);
  const auto truth = labels_of(graphs);
  const auto report = scenario_report(scenario, predicted, truth, reference_targets(scenario));
  if (!a.report.empty()) {
    auto f = open_out(a.report);
    f << report_to_json(report) << "\n";
  }
  out << report_to_text(report);
  return kExitOk;
}

// ---- detect ----------------------------------------------------------------

struct DetectArgs {
  std::string model;
  std::string log = "-";
  std::size_t window = 200;
  std::size_t stride = 0;
  double threshold = 0.5;
  bool strict = false;
};

int cmd_detect(const DetectArgs& a, const ModelArgs& m, std::istream& in, std::ostream& out, std::ostream& err) {
  if (a.window < 2) throw Error(ErrorCode::WindowTooSmall, "window must be >= 2");
  const auto stride = a.stride == 0 ? a.window : a.stride;
  if (stride > a.window) throw Error(ErrorCode::InvalidSpec, "stride must be in [1, window]");
  InferenceOptions options;
  options.adjacency_mode = parse_adjacency_mode(m.adjacency);
  options.normalize_features = m.normalize_features;
  options.threshold = a.threshold;
  const auto params = load_params(a.model);

  std::unique_ptr<std::ifstream> file;
  std::istream* source = &in;
  if (a.log != "-") {
    file = std::make_unique<std::ifstream>(a.log);
    if (!*file) throw Error(ErrorCode::IoError, "cannot open '" + a.log + "'");
    source = file.get();
  }

  LogReader reader(*source, ParseOptions{a.strict});
  std::deque<CanFrame> buffer;
  std::vector<CanFrame> window;
  window.reserve(a.window);
  std::size_t since_verdict = 0;
  std::size_t verdicts = 0;
  std::size_t reported_errors = 0;
  bool primed = false;
  while (auto frame = reader.next()) {
    buffer.push_back(*frame);
    if (buffer.size() > a.window) buffer.pop_front();
    ++since_verdict;
    if (buffer.size() == a.window && (!primed || since_verdict == stride)) {
      primed = true;
      since_verdict = 0;
      window.assign(buffer.begin(), buffer.end());
      const auto graph = build_graph(window, verdicts);
      const auto p = predict(graph, params, options);
      char line[160];
      std::snprintf(line, sizeof line, "%zu %s %s %s %.6f\n", verdicts, format_ts(window.front().timestamp_us).c_str(),
                    format_ts(window.back().timestamp_us).c_str(), std::string(label_name(p.label)).c_str(),
                    p.attacked_probability);
      out << line;
      ++verdicts;
    }
    const auto& issues = reader.report().errors;
    for (; reported_errors < issues.size(); ++reported_errors) {
      err << "warning: line " << issues[reported_errors].line << ": skipped ("
          << to_string(issues[reported_errors].kind) << ")\n";
    }
  }
  const auto& issues = reader.report().errors;
  for (; reported_errors < issues.size(); ++reported_errors) {
    err << "warning: line " << issues[reported_errors].line << ": skipped (" << to_string(issues[reported_errors].kind)
        << ")\n";
  }
  out.flush();
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Graph-convolution intrusion detection for CAN bus logs", "canids"};
  app.require_subcommand(1, 1);

  Common common;
  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Generate a labeled synthetic CAN log");
  add_config(*synth);
  add_seed(*synth, common);
  synth->add_option("--normal", synth_args.normal, "Normal frames to generate")->capture_default_str();
  synth->add_option("--ids", synth_args.ids, "Distinct ECU IDs")->capture_default_str();
  synth->add_option("--jitter", synth_args.jitter, "Period jitter fraction")->capture_default_str();
  synth->add_option("--dos", synth_args.dos, "DoS intensity (injected per normal frame)");
  synth->add_option("--fuzzy", synth_args.fuzzy, "Fuzzy intensity");
  synth->add_option("--spoofing", synth_args.spoofing, "Spoofing intensity");
  synth->add_option("--replay", synth_args.replay, "Replay intensity");
  synth->add_option("--segment-ms", synth_args.segment_ms, "Attack-free gap between attacks")->capture_default_str();
  synth->add_option("--replay-source-ms", synth_args.replay_source_ms, "Recorded span re-sent by replay")
      ->capture_default_str();
  synth->add_option("--spoof-targets", synth_args.spoof_targets, "Number of spoofed IDs")->capture_default_str();
  synth->add_option("--window", synth_args.window, "Window size used for manifest counts")->capture_default_str();
  synth->add_option("--out", synth_args.out, "Output log")->required();
  synth->add_option("--manifest", synth_args.manifest, "Manifest JSON (default: <out>.manifest.json)");

  GraphSource graphs_src;
  std::string graphs_out;
  auto* graphs = app.add_subcommand("graphs", "Build windowed message graphs from a log");
  add_config(*graphs);
  add_graph_source(*graphs, graphs_src);
  graphs->add_option("--out", graphs_out, "Graph dump (JSON lines)")->required();

  GraphSource train_src;
  SplitArgs train_split;
  ModelArgs train_model;
  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train the GCN on a stratified split");
  add_config(*train_cmd);
  add_seed(*train_cmd, common);
  add_graph_source(*train_cmd, train_src);
  add_split(*train_cmd, train_split);
  add_model_args(*train_cmd, train_model);
  train_cmd->add_option("--model", train_args.model, "Output model file")->required();
  train_cmd->add_option("--history", train_args.history, "Per-epoch history (JSON lines)");
  train_cmd->add_option("--lr", train_args.lr, "Learning rate")->capture_default_str();
  train_cmd->add_option("--epochs", train_args.epochs, "Epochs")->capture_default_str();
  train_cmd->add_option("--batch-size", train_args.batch_size, "Graphs per mini-batch")->capture_default_str();
  train_cmd->add_option("--optimizer", train_args.optimizer, "adam or sgd")->capture_default_str();
  train_cmd->add_option("--dropout", train_args.dropout, "Readout dropout probability")->capture_default_str();
  train_cmd->add_option("--patience", train_args.patience, "Early-stop patience in epochs (0 = off)");
  train_cmd->add_flag("--allow-single-class", train_args.allow_single_class, "Train even if one label is missing");

  GraphSource eval_src;
  SplitArgs eval_split;
  ModelArgs eval_model;
  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Evaluate a model and compare with reference scores");
  add_config(*eval);
  add_seed(*eval, common);
  add_graph_source(*eval, eval_src);
  add_split(*eval, eval_split);
  add_model_args(*eval, eval_model);
  eval->add_option("--model", eval_args.model, "Model file")->required();
  eval->add_option("--scenario", eval_args.scenario, "dos, fuzzy, spoofing, replay, mixed-dfs or mixed-dfsr")
      ->required();
  eval->add_option("--report", eval_args.report, "Write the JSON report here");
  eval->add_option("--subset", eval_args.subset, "test (held-out split) or all")->capture_default_str();
  eval->add_option("--threshold", eval_args.threshold, "Attacked if probability >= threshold")
      ->capture_default_str();

  DetectArgs detect_args;
  ModelArgs detect_model;
  auto* detect = app.add_subcommand("detect", "Stream verdicts over a log or standard input");
  add_config(*detect);
  add_model_args(*detect, detect_model);
  detect->add_option("--model", detect_args.model, "Model file")->required();
  detect->add_option("--log", detect_args.log, "Log file, or - for standard input")->capture_default_str();
  detect->add_option("--window", detect_args.window, "Frames per window")->capture_default_str();
  detect->add_option("--stride", detect_args.stride, "Frames between verdicts (default: window)");
  detect->add_option("--threshold", detect_args.threshold, "Attacked if probability >= threshold")
      ->capture_default_str();
  detect->add_flag("--strict", detect_args.strict, "Fail on the first malformed line");

  try {
    try {
      std::vector<std::string> args(argv, argv + argc);
      if (args.size() > 2) args = expand_config(std::move(args));
      std::vector<const char*> expanded;
      for (const auto& a : args) expanded.push_back(a.c_str());
      app.parse(static_cast<int>(expanded.size()), expanded.data());
    } catch (const CLI::FileError& e) {
      err << "error: " << e.what() << "\n";
      return kExitIo;
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? kExitOk : kExitConfig;
    }

    if (*synth) return cmd_synth(synth_args, common, out);
    if (*graphs) return cmd_graphs(graphs_src, graphs_out, out, err);
    if (*train_cmd) return cmd_train(train_src, train_split, train_model, train_args, common, out, err);
    if (*eval) return cmd_eval(eval_src, eval_split, eval_model, eval_args, common, out, err);
    if (*detect) return cmd_detect(detect_args, detect_model, in, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitConfig;
}

}  // namespace canids
