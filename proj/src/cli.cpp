#include "drivelm/cli.hpp"

#include <fstream>
#include <memory>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "drivelm/augment.hpp"
#include "drivelm/config.hpp"

namespace drivelm {
namespace {

namespace fs = std::filesystem;

struct Flags {
  fs::path config_file;
  std::vector<std::string> overrides;
  std::string split;
  fs::path out;
  bool dry_run = false;
  std::string log_level = "warn";

  bool merge = false;
  std::string system_id;
  fs::path depth_index;
  fs::path dump_prompts;
  std::vector<fs::path> runs;
  bool references = false;
  fs::path predictions;
  fs::path csv;
  std::vector<fs::path> reports;
};

class RuntimeFailure : public Error {
 public:
  using Error::Error;
};

struct Context {
  PipelineConfig config;
  nlohmann::json snapshot;
  const Flags& flags;
  std::ostream& out;
};

PipelineConfig resolve_config(const Flags& flags) {
  PipelineConfig config = flags.config_file.empty() ? PipelineConfig{} : load_config(flags.config_file);
  for (const auto& entry : flags.overrides) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos) throw ConfigError(entry, "--set expects key=value");
    apply_override(config, trim(entry.substr(0, eq)), entry.substr(eq + 1));
  }
  if (!flags.split.empty()) apply_override(config, "split", flags.split);
  validate_config(config);
  return config;
}

void require_file(const fs::path& path, const std::string& field) {
  if (path.empty()) throw ConfigError(field, "required");
  if (!fs::exists(path)) throw ConfigError(field, "no such file: " + path.string());
}

fs::path output_path(const Context& ctx, const std::string& default_name) {
  return ctx.flags.out.empty() ? ctx.config.paths.output_dir / default_name : ctx.flags.out;
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

void write_json(const fs::path& path, const nlohmann::json& json) {
  ensure_parent(path);
  std::ofstream stream(path, std::ios::trunc);
  stream << json.dump(2) << "\n";
  if (!stream) throw RuntimeFailure("cannot write " + path.string());
}

void write_sidecar(const Context& ctx, const fs::path& artifact) {
  write_json(fs::path(artifact.string() + ".config.json"), ctx.snapshot);
}

std::string destination(const Context& ctx, const fs::path& path) {
  return ctx.flags.dry_run ? "dry run, nothing written" : "-> " + path.generic_string();
}

Corpus corpus_from(const PipelineConfig& config) {
  require_file(config.paths.dataset, "paths.dataset");
  return load_corpus(config.paths.dataset, config.split, load_kind_overrides(config.paths.kind_overrides));
}

DepthIndex depth_index_for(const Context& ctx, const Corpus& corpus) {
  if (!ctx.flags.depth_index.empty()) {
    require_file(ctx.flags.depth_index, "--depth-index");
    return read_depth_index(ctx.flags.depth_index);
  }
  if (ctx.config.paths.depth_dir.empty()) return {};
  return build_depth_index(corpus, ctx.config.paths.depth_dir, ctx.config.depth);
}

int cmd_ingest(Context& ctx) {
  const Corpus corpus = corpus_from(ctx.config);
  nlohmann::json stats = corpus_stats(corpus);
  const fs::path path = output_path(ctx, "stats.json");
  if (!ctx.flags.dry_run) {
    nlohmann::json document = stats;
    document["config"] = ctx.snapshot;
    write_json(path, document);
  }
  ctx.out << fmt::format("ingest: {} frames, {} questions, {} warnings ({})\n", corpus.frames.size(),
                         corpus.question_count(), corpus.warnings.size(), destination(ctx, path));
  return kExitOk;
}

int cmd_augment(Context& ctx) {
  const Corpus corpus = corpus_from(ctx.config);
  if (ctx.flags.merge) {
    const Corpus merged = merge_augmented(corpus);
    const fs::path path = output_path(ctx, "merged.json");
    if (!ctx.flags.dry_run) {
      write_json(path, corpus_to_json(merged));
      write_sidecar(ctx, path);
    }
    ctx.out << fmt::format("augment: merged corpus with {} questions ({})\n", merged.question_count(),
                           destination(ctx, path));
    return kExitOk;
  }
  std::vector<AugmentedQa> generated;
  for (const auto& frame : corpus.frames) {
    auto qas = generate_keyobj_qas(frame);
    generated.insert(generated.end(), std::make_move_iterator(qas.begin()), std::make_move_iterator(qas.end()));
  }
  const fs::path path = output_path(ctx, "augmented.jsonl");
  if (!ctx.flags.dry_run) {
    ensure_parent(path);
    std::ofstream stream(path, std::ios::trunc);
    for (const auto& item : generated) stream << augmented_qa_to_json(item).dump() << "\n";
    if (!stream) throw RuntimeFailure("cannot write " + path.string());
    write_sidecar(ctx, path);
  }
  ctx.out << fmt::format("augment: {} key-object questions ({})\n", generated.size(), destination(ctx, path));
  return kExitOk;
}

int cmd_depth_index(Context& ctx) {
  const Corpus corpus = corpus_from(ctx.config);
  if (ctx.config.paths.depth_dir.empty()) throw ConfigError("paths.depth_dir", "required");
  if (!fs::is_directory(ctx.config.paths.depth_dir)) {
    throw ConfigError("paths.depth_dir", "no such directory: " + ctx.config.paths.depth_dir.string());
  }
  DepthIndexReport report;
  const DepthIndex index = build_depth_index(corpus, ctx.config.paths.depth_dir, ctx.config.depth, &report);
  const fs::path path = output_path(ctx, "depth_index.jsonl");
  if (!ctx.flags.dry_run) {
    ensure_parent(path);
    write_depth_index(index, path);
    write_sidecar(ctx, path);
  }
  ctx.out << fmt::format("depth-index: {} objects, {} skipped ({})\n", index.size(), report.skipped.size(),
                         destination(ctx, path));
  return kExitOk;
}

int cmd_export_train(Context& ctx) {
  const Corpus corpus = corpus_from(ctx.config);
  const DepthIndex index = depth_index_for(ctx, corpus);
  const fs::path path = output_path(ctx, "train_records.jsonl");
  if (ctx.flags.dry_run) {
    ctx.out << fmt::format("export-train: {} questions ({})\n", corpus.question_count(), destination(ctx, path));
    return kExitOk;
  }
  ensure_parent(path);
  const ExportReport report = export_training_records(corpus, index, path, ctx.config.paths.images);
  write_sidecar(ctx, path);
  ctx.out << fmt::format("export-train: {} records, {} skipped ({})\n", report.records, report.skipped.size(),
                         destination(ctx, path));
  return kExitOk;
}

int cmd_infer(Context& ctx) {
  if (!ctx.flags.system_id.empty()) {
    apply_override(ctx.config, "backend.system_id", ctx.flags.system_id);
    validate_config(ctx.config);
    ctx.snapshot = config_to_json(ctx.config);
  }
  const Corpus corpus = corpus_from(ctx.config);
  const DepthIndex index = depth_index_for(ctx, corpus);
  const InferenceConfig inference = inference_config(ctx.config);
  auto backend = make_backend({ctx.config.backend.base_url, std::chrono::milliseconds(ctx.config.backend.timeout_ms),
                               ctx.config.backend.inline_images});
  const fs::path path = output_path(ctx, "predictions." + inference.system_id + ".jsonl");
  if (ctx.flags.dry_run) {
    ctx.out << fmt::format("infer: {} questions for system {} ({})\n", corpus.question_count(),
                           inference.system_id, destination(ctx, path));
    return kExitOk;
  }
  ensure_parent(path);
  InferenceReport report;
  const SystemRun run = run_inference(corpus, *backend, index, inference, path, &report);
  write_sidecar(ctx, path);
  if (!ctx.flags.dump_prompts.empty()) {
    ensure_parent(ctx.flags.dump_prompts);
    std::ofstream stream(ctx.flags.dump_prompts, std::ios::trunc);
    for (const auto& [id, answer] : run.answers) {
      if (answer.prompt) stream << prompt_bundle_to_json(*answer.prompt).dump() << "\n";
    }
    if (!stream) throw RuntimeFailure("cannot write " + ctx.flags.dump_prompts.string());
  }
  for (const auto& omission : report.omissions) spdlog::info("{}", omission);
  ctx.out << fmt::format("infer: {} questions, {} answered, {} resumed, {} errors ({})\n", report.questions,
                         report.answered, report.resumed, report.errors, destination(ctx, path));
  if (report.error_fraction() > inference.max_error_fraction) {
    throw RuntimeFailure(fmt::format("error fraction {:.4f} exceeds backend.max_error_fraction {:.4f}",
                                     report.error_fraction(), inference.max_error_fraction));
  }
  return kExitOk;
}

int cmd_fuse(Context& ctx) {
  if (ctx.flags.runs.size() < 2) throw ConfigError("--runs", "at least two prediction files required");
  std::vector<SystemRun> runs;
  std::vector<std::string> systems;
  for (const auto& path : ctx.flags.runs) {
    require_file(path, "--runs");
    runs.push_back(read_predictions(path));
    systems.push_back(runs.back().system_id);
  }
  const FusionPolicy policy = fusion_policy(ctx.config, systems);
  std::optional<std::map<std::string, std::string>> references;
  if (ctx.flags.references) references = corpus_references(corpus_from(ctx.config));
  FusionReport report;
  const SystemRun fused = fuse(runs, references ? &*references : nullptr, policy, &report);
  const fs::path path = output_path(ctx, "predictions.fusion.jsonl");
  const fs::path report_path(path.string() + ".fusion.json");
  if (!ctx.flags.dry_run) {
    ensure_parent(path);
    write_predictions(fused, path);
    write_sidecar(ctx, path);
    nlohmann::json document = fusion_report_to_json(report);
    document["config"] = ctx.snapshot;
    write_json(report_path, document);
  }
  ctx.out << fmt::format("fuse: {} runs, {} questions, {} missing ({})\n", runs.size(), fused.answers.size(),
                         report.missing.size(), destination(ctx, path));
  return kExitOk;
}

std::unique_ptr<JudgeClient> make_judge(const PipelineConfig& config) {
  if (config.metrics.judge_stub) return std::make_unique<StubJudge>(*config.metrics.judge_stub);
  if (!config.metrics.judge_endpoint.empty()) {
    return std::make_unique<HttpJudge>(config.metrics.judge_endpoint,
                                       std::chrono::milliseconds(config.metrics.judge_timeout_ms));
  }
  return nullptr;
}

int cmd_score(Context& ctx) {
  require_file(ctx.flags.predictions, "--predictions");
  const Corpus corpus = corpus_from(ctx.config);
  const SystemRun run = read_predictions(ctx.flags.predictions);
  auto judge = make_judge(ctx.config);
  const MetricReport report = score_run(corpus, run, metric_config(ctx.config), judge.get());
  const fs::path path = output_path(ctx, "report." + (run.system_id.empty() ? "empty" : run.system_id) + ".json");
  if (!ctx.flags.dry_run) {
    nlohmann::json document = report_to_json(report);
    document["config"] = ctx.snapshot;
    write_json(path, document);
    if (!ctx.flags.csv.empty()) {
      ensure_parent(ctx.flags.csv);
      write_per_question_csv(report, ctx.flags.csv);
    }
  }
  ctx.out << fmt::format("score: {} questions, final {} ({})\n", report.questions,
                         report.final_score ? fmt::format("{:.4f}", *report.final_score) : "n/a",
                         destination(ctx, path));
  return kExitOk;
}

int cmd_report(Context& ctx) {
  if (ctx.flags.reports.empty()) throw ConfigError("--reports", "at least one report file required");
  std::vector<MetricReport> reports;
  for (const auto& path : ctx.flags.reports) {
    require_file(path, "--reports");
    std::ifstream in(path);
    auto json = nlohmann::json::parse(in, nullptr, false);
    if (json.is_discarded()) throw RuntimeFailure("unreadable report " + path.string());
    reports.push_back(report_from_json(json));
  }
  const std::string table = render_report_table(reports);
  ctx.out << table;
  if (!ctx.flags.out.empty() && !ctx.flags.dry_run) {
    ensure_parent(ctx.flags.out);
    std::ofstream stream(ctx.flags.out, std::ios::trunc);
    stream << table;
    if (!stream) throw RuntimeFailure("cannot write " + ctx.flags.out.string());
  }
  ctx.out << fmt::format("report: {} systems\n", reports.size());
  return kExitOk;
}

void print_error(std::ostream& err, const std::string& type, const std::string& message,
                 const std::string& field = {}) {
  nlohmann::json error = {{"type", type}, {"message", message}};
  if (!field.empty()) error["field"] = field;
  err << nlohmann::json{{"error", error}}.dump() << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Flags flags;
  CLI::App app{"Driving-scene VQA pipeline", "drivelm"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("-c,--config", flags.config_file, "Pipeline config file");
  app.add_option("--set", flags.overrides, "Override a config entry: section.key=value")->take_all();
  app.add_option("--split", flags.split, "train or validation");
  app.add_option("-o,--out", flags.out, "Output artifact path");
  app.add_flag("--dry-run", flags.dry_run, "Validate everything, write nothing");
  app.add_option("--log-level", flags.log_level, "trace, debug, info, warn, error or off");

  std::map<std::string, std::function<int(Context&)>> commands;
  auto add = [&](const std::string& name, const std::string& help, std::function<int(Context&)> fn) {
    commands[name] = std::move(fn);
    return app.add_subcommand(name, help);
  };
  add("ingest", "Load a split and write corpus statistics", cmd_ingest);
  add("augment", "Generate key-object description questions", cmd_augment)
      ->add_flag("--merge", flags.merge, "Write the corpus with the questions merged in");
  add("depth-index", "Aggregate depth rasters per key object", cmd_depth_index);
  add("export-train", "Write training records", cmd_export_train)
      ->add_option("--depth-index", flags.depth_index, "Precomputed depth index");
  auto* infer = add("infer", "Answer every question with one backend", cmd_infer);
  infer->add_option("--system-id", flags.system_id, "Label for this run");
  infer->add_option("--depth-index", flags.depth_index, "Precomputed depth index");
  infer->add_option("--dump-prompts", flags.dump_prompts, "Write prompt bundles as JSON Lines");
  auto* fuse_cmd = add("fuse", "Combine several runs", cmd_fuse);
  fuse_cmd->add_option("--runs", flags.runs, "Prediction files")->take_all();
  fuse_cmd->add_flag("--references", flags.references, "Use corpus answers for metric_argmax routing");
  auto* score = add("score", "Score one run", cmd_score);
  score->add_option("--predictions", flags.predictions, "Prediction file");
  score->add_option("--csv", flags.csv, "Per-question CSV");
  add("report", "Render metric reports as a table", cmd_report)
      ->add_option("--reports", flags.reports, "Metric report files")
      ->take_all();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    print_error(err, "usage", e.what());
    return kExitConfig;
  }

  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto logger = std::make_shared<spdlog::logger>("drivelm", sink);
  logger->set_level(spdlog::level::from_str(flags.log_level));
  logger->set_pattern("[%l] %v");
  auto previous = spdlog::default_logger();
  spdlog::set_default_logger(logger);
  struct Restore {
    std::shared_ptr<spdlog::logger> logger;
    ~Restore() { spdlog::set_default_logger(logger); }
  } restore{previous};

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    Context ctx{resolve_config(flags), {}, flags, out};
    ctx.snapshot = config_to_json(ctx.config);
    return commands.at(name)(ctx);
  } catch (const ConfigError& e) {
    print_error(err, "config", e.what(), e.field());
    return kExitConfig;
  } catch (const std::exception& e) {
    print_error(err, "runtime", e.what());
    return kExitRuntime;
  }
}

}  // namespace drivelm
