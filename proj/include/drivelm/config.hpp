#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "drivelm/dataset.hpp"
#include "drivelm/depth.hpp"
#include "drivelm/fusion.hpp"
#include "drivelm/metrics.hpp"
#include "drivelm/orchestrator.hpp"
#include "drivelm/prompting.hpp"

namespace drivelm {

/// Invalid configuration; `field()` names the offending key, e.g.
/// "backend.retries".
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct PipelineConfig {
  Split split = Split::kValidation;

  struct Paths {
    std::filesystem::path dataset;
    std::filesystem::path images;
    std::filesystem::path depth_dir;
    std::filesystem::path output_dir = ".";
    // JSON object question_id -> kind.
    std::filesystem::path kind_overrides;
  } paths;

  struct Backend {
    std::string base_url = "stub://echo";
    std::string system_id = "system";
    int timeout_ms = 60000;
    int retries = 3;
    int retry_delay_ms = 200;
    int concurrency = 4;
    int max_new_tokens = 512;
    double temperature = 0.0;
    bool inline_images = false;
    double max_error_fraction = 0.05;
  } backend;

  DepthConfig depth;

  struct Prompt {
    CotMode cot_mode = CotMode::kNone;
    CotMode stage1_cot_mode = CotMode::kNone;
    std::string zero_shot_cue = "Let's think step by step.";
    std::filesystem::path few_shot_file;
  } prompt;

  struct Fusion {
    std::map<QuestionKind, FusionStrategy> routing = FusionPolicy::defaults({}).routing;
    std::vector<std::string> priority;
    AnswerNormalization normalization;
  } fusion;

  struct Metrics {
    std::map<std::string, double> weights;
    bool renormalize_missing = false;
    double match_threshold = 16.0;
    double cider_sigma = 6.0;
    double rouge_beta = 1.2;
    std::string judge_endpoint;
    std::optional<double> judge_stub;
    int judge_timeout_ms = 60000;
  } metrics;
};

/// Reads a TOML/INI-style file with [paths], [backend], [depth], [prompt],
/// [fusion], [fusion.routing], [metrics] and [metrics.weights] sections.
/// Relative paths are resolved against the file's directory.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});

/// Sets one "section.key" entry; list values are comma separated.
void apply_override(PipelineConfig& config, const std::string& key, const std::string& value);

/// Range checks; throws ConfigError naming the field.
void validate_config(const PipelineConfig& config);

nlohmann::json config_to_json(const PipelineConfig& config);

InferenceConfig inference_config(const PipelineConfig& config);
FusionPolicy fusion_policy(const PipelineConfig& config, const std::vector<std::string>& systems);
MetricConfig metric_config(const PipelineConfig& config);
KindOverrides load_kind_overrides(const std::filesystem::path& path);

}  // namespace drivelm
