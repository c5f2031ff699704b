#include "drivelm/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include <CLI11.hpp>

namespace drivelm {
namespace {

using Inputs = std::vector<std::string>;
using Setter = std::function<void(PipelineConfig&, const Inputs&, const std::filesystem::path&)>;

const std::string& single(const std::string& key, const Inputs& inputs) {
  if (inputs.size() != 1) throw ConfigError(key, "expected a single value");
  return inputs.front();
}

double to_double(const std::string& key, const std::string& text) {
  double value = 0.0;
  const std::string t = trim(text);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw ConfigError(key, "expected a number, got '" + text + "'");
  }
  return value;
}

int to_int(const std::string& key, const std::string& text) {
  int value = 0;
  const std::string t = trim(text);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw ConfigError(key, "expected an integer, got '" + text + "'");
  }
  return value;
}

bool to_bool(const std::string& key, const std::string& text) {
  const std::string t = to_lower(trim(text));
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError(key, "expected a boolean, got '" + text + "'");
}

std::filesystem::path to_path(const std::string& text, const std::filesystem::path& base) {
  std::filesystem::path p(text);
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return (base / p).lexically_normal();
}

CotMode to_cot(const std::string& key, const std::string& text) {
  auto mode = cot_mode_from_name(trim(text));
  if (!mode) throw ConfigError(key, "expected none, zero_shot or few_shot");
  return *mode;
}

DepthBins to_bins(const std::string& key, const Inputs& inputs) {
  std::vector<DepthBin> bins;
  for (const auto& entry : inputs) {
    const auto colon = entry.find(':');
    if (colon == std::string::npos) throw ConfigError(key, "bin '" + entry + "' must be threshold:label");
    bins.push_back({to_double(key, entry.substr(0, colon)), trim(entry.substr(colon + 1))});
  }
  try {
    return DepthBins(std::move(bins));
  } catch (const DepthError& e) {
    throw ConfigError(key, e.what());
  }
}

// Every recognised key; values arrive as the list of raw inputs.
const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto path_field = [&](const std::string& key, std::filesystem::path PipelineConfig::Paths::*field) {
      t[key] = [key, field](PipelineConfig& c, const Inputs& in, const std::filesystem::path& base) {
        c.paths.*field = to_path(single(key, in), base);
      };
    };
    path_field("paths.dataset", &PipelineConfig::Paths::dataset);
    path_field("paths.images", &PipelineConfig::Paths::images);
    path_field("paths.depth_dir", &PipelineConfig::Paths::depth_dir);
    path_field("paths.output_dir", &PipelineConfig::Paths::output_dir);
    path_field("paths.kind_overrides", &PipelineConfig::Paths::kind_overrides);

    t["split"] = [](PipelineConfig& c, const Inputs& in, const std::filesystem::path&) {
      auto split = split_from_name(trim(single("split", in)));
      if (!split) throw ConfigError("split", "expected train or validation");
      c.split = *split;
    };

    auto int_field = [&](const std::string& key, int PipelineConfig::Backend::*field) {
      t[key] = [key, field](PipelineConfig& c, const Inputs& in, const std::filesystem::path&) {
        c.backend.*field = to_int(key, single(key, in));
      };
    };
    int_field("backend.timeout_ms", &PipelineConfig::Backend::timeout_ms);
    int_field("backend.retries", &PipelineConfig::Backend::retries);
    int_field("backend.retry_delay_ms", &PipelineConfig::Backend::retry_delay_ms);
    int_field("backend.concurrency", &PipelineConfig::Backend::concurrency);
    int_field("backend.max_new_tokens", &PipelineConfig::Backend::max_new_tokens);
    t["backend.base_url"] = [](PipelineConfig& c, const Inputs& in, const std::filesystem::path&) {
      c.backend.base_url = trim(single("backend.base_url", in));
    };
    t["backend.system_id"] = [](PipelineConfig& c, const Inputs& in, const std::filesystem::path&) {
      c.backend.system_id = trim(single("backend.system_id", in));
    };
    t["backend.temperature"] = [](PipelineConfig& c, const Inputs& in, const std::filesystem::path&) {
      c.backend.temperature = to_double("backend.temperature", single("backend.temperature", in));
    };
    t["backend.inline_images"] = [](PipelineConfig& c, const Inputs& in, const std::filesystem::path&) {
      c.backend.inline_images = to_bool("backend.inline_images", single("backend.inline_images", in));
    };
    t["backend.max_error_fraction"] = [](PipelineConfig& c, const Inputs& in, const std::filesystem::path&) {
      c.backend.max_error_fraction =
          to_double("backend.max_error_fraction", single("backend.max_error_fraction", in));
    };

    t["depth.percentile"] = [](PipelineConfig& c, const Inputs& in, const std::filesystem::path&) {
      c.depth.percentile = to_double("depth.percentile", single("depth.percentile", in));
    };
    t["depth.window_size"] = [](PipelineConfig& c, const Inputs& in, const std::filesystem::path&) {
      const int size = to_int("depth.window_size", single("depth.window_size", in));
      if (size < 1 || size % 2 == 0) throw ConfigError("depth.window_size", "must be a positive odd number");
      c.depth.window_size = static_cast<std::size_t>(size);
    };
    t["depth.bins"] = [](PipelineConfig& c, const Inputs& in, const std::filesystem::path&) {
      c.depth.bins = to_bins("depth.bins", in);
    };

    t["prompt.cot_mode"] = [](PipelineConfig& c, const Inputs& in, const std::filesystem::path&) {
      c.prompt.cot_mode = to_cot("prompt.cot_mode", single("prompt.cot_mode", in));
    };
    t["prompt.stage1_cot_mode"] = [](PipelineConfig& c, const Inputs& in, const std::filesystem::path&) {
      c.prompt.stage1_cot_mode = to_cot("prompt.stage1_cot_mode", single("prompt.stage1_cot_mode", in));
    };
    t["prompt.zero_shot_cue"] = [](PipelineConfig& c, const Inputs& in, const std::filesystem::path&) {
      c.prompt.zero_shot_cue = single("prompt.zero_shot_cue", in);
    };
    t["prompt.few_shot_file"] = [](PipelineConfig& c, const Inputs& in, const std::filesystem::path& base) {
      c.prompt.few_shot_file = to_path(single("prompt.few_shot_file", in), base);
    };

    for (QuestionKind kind : {QuestionKind::kMultipleChoice, QuestionKind::kYesNo, QuestionKind::kOpen}) {
      const std::string key = "fusion.routing." + std::string(kind_name(kind));
      t[key] = [key, kind](PipelineConfig& c, const Inputs& in, const std::filesystem::path&) {
        try {
          c.fusion.routing[kind] = parse_fusion_strategy(single(key, in));
        } catch (const ConfigError&) {
          throw;
        } catch (const Error& e) {
          throw ConfigError(key, e.what());
        }
      };
    }
    t["fusion.priority"] = [](PipelineConfig& c, const Inputs& in, const std::filesystem::path&) {
      c.fusion.priority.clear();
      for (const auto& item : in) {
        if (!trim(item).empty()) c.fusion.priority.push_back(trim(item));
      }
    };
    auto norm_field = [&](const std::string& key, bool AnswerNormalization::*field) {
      t[key] = [key, field](PipelineConfig& c, const Inputs& in, const std::filesystem::path&) {
        c.fusion.normalization.*field = to_bool(key, single(key, in));
      };
    };
    norm_field("fusion.casefold", &AnswerNormalization::casefold);
    norm_field("fusion.strip_trailing_period", &AnswerNormalization::strip_trailing_period);
    norm_field("fusion.option_letter", &AnswerNormalization::option_letter);

    for (const char* component : kScoreComponents) {
      const std::string key = std::string("metrics.weights.") + component;
      t[key] = [key, component](PipelineConfig& c, const Inputs& in, const std::filesystem::path&) {
        c.metrics.weights[component] = to_double(key, single(key, in));
      };
    }
    t["metrics.renormalize_missing"] = [](PipelineConfig& c, const Inputs& in, const std::filesystem::path&) {
      c.metrics.renormalize_missing =
          to_bool("metrics.renormalize_missing", single("metrics.renormalize_missing", in));
    };
    t["metrics.match_threshold"] = [](PipelineConfig& c, const Inputs& in, const std::filesystem::path&) {
      c.metrics.match_threshold = to_double("metrics.match_threshold", single("metrics.match_threshold", in));
    };
    t["metrics.cider_sigma"] = [](PipelineConfig& c, const Inputs& in, const std::filesystem::path&) {
      c.metrics.cider_sigma = to_double("metrics.cider_sigma", single("metrics.cider_sigma", in));
    };
    t["metrics.rouge_beta"] = [](PipelineConfig& c, const Inputs& in, const std::filesystem::path&) {
      c.metrics.rouge_beta = to_double("metrics.rouge_beta", single("metrics.rouge_beta", in));
    };
    t["metrics.judge_endpoint"] = [](PipelineConfig& c, const Inputs& in, const std::filesystem::path&) {
      c.metrics.judge_endpoint = trim(single("metrics.judge_endpoint", in));
    };
    t["metrics.judge_stub"] = [](PipelineConfig& c, const Inputs& in, const std::filesystem::path&) {
      c.metrics.judge_stub = to_double("metrics.judge_stub", single("metrics.judge_stub", in));
    };
    t["metrics.judge_timeout_ms"] = [](PipelineConfig& c, const Inputs& in, const std::filesystem::path&) {
      c.metrics.judge_timeout_ms = to_int("metrics.judge_timeout_ms", single("metrics.judge_timeout_ms", in));
    };
    return t;
  }();
  return table;
}

void apply(PipelineConfig& config, const std::string& key, const Inputs& inputs,
           const std::filesystem::path& base) {
  auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError(key, "unknown configuration key");
  it->second(config, inputs, base);
}

nlohmann::json path_json(const std::filesystem::path& p) { return p.generic_string(); }

}  // namespace

PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  std::istringstream in(text);
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_config(in);
  } catch (const CLI::Error& e) {
    throw ConfigError("<file>", e.what());
  }
  PipelineConfig config;
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    apply(config, item.fullname(), item.inputs, base_dir);
  }
  validate_config(config);
  return config;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.parent_path());
}

void apply_override(PipelineConfig& config, const std::string& key, const std::string& value) {
  Inputs inputs;
  if (key == "depth.bins" || key == "fusion.priority") {
    std::stringstream stream(value);
    std::string item;
    while (std::getline(stream, item, ',')) inputs.push_back(trim(item));
  } else {
    inputs.push_back(value);
  }
  apply(config, key, inputs, {});
}

void validate_config(const PipelineConfig& config) {
  const auto& b = config.backend;
  if (b.base_url.empty()) throw ConfigError("backend.base_url", "must not be empty");
  if (b.system_id.empty()) throw ConfigError("backend.system_id", "must not be empty");
  if (b.system_id == "fusion") throw ConfigError("backend.system_id", "'fusion' is reserved");
  if (b.timeout_ms < 1) throw ConfigError("backend.timeout_ms", "must be >= 1");
  if (b.retries < 1) throw ConfigError("backend.retries", "must be >= 1 (attempt count)");
  if (b.retry_delay_ms < 0) throw ConfigError("backend.retry_delay_ms", "must be >= 0");
  if (b.concurrency < 1) throw ConfigError("backend.concurrency", "must be >= 1");
  if (b.max_new_tokens < 1) throw ConfigError("backend.max_new_tokens", "must be >= 1");
  if (!(b.temperature >= 0.0)) throw ConfigError("backend.temperature", "must be >= 0");
  if (!(b.max_error_fraction >= 0.0 && b.max_error_fraction <= 1.0)) {
    throw ConfigError("backend.max_error_fraction", "must lie in [0,1]");
  }
  if (!(config.depth.percentile >= 0.0 && config.depth.percentile <= 100.0)) {
    throw ConfigError("depth.percentile", "must lie in [0,100]");
  }
  if (config.depth.window_size == 0 || config.depth.window_size % 2 == 0) {
    throw ConfigError("depth.window_size", "must be a positive odd number");
  }
  if (config.prompt.cot_mode == CotMode::kFewShot && config.prompt.few_shot_file.empty()) {
    throw ConfigError("prompt.few_shot_file", "required when prompt.cot_mode = few_shot");
  }
  if (!config.metrics.weights.empty()) {
    ScoreWeights weights{config.metrics.weights, config.metrics.renormalize_missing};
    try {
      weights.validate();
    } catch (const Error& e) {
      throw ConfigError("metrics.weights", e.what());
    }
  }
  if (!(config.metrics.match_threshold >= 0.0)) throw ConfigError("metrics.match_threshold", "must be >= 0");
  if (!(config.metrics.cider_sigma > 0.0)) throw ConfigError("metrics.cider_sigma", "must be > 0");
  if (!(config.metrics.rouge_beta > 0.0)) throw ConfigError("metrics.rouge_beta", "must be > 0");
  if (config.metrics.judge_stub && !(*config.metrics.judge_stub >= 0.0 && *config.metrics.judge_stub <= 100.0)) {
    throw ConfigError("metrics.judge_stub", "must lie in [0,100]");
  }
}

nlohmann::json config_to_json(const PipelineConfig& config) {
  nlohmann::json j;
  j["split"] = split_name(config.split);
  j["paths"] = {{"dataset", path_json(config.paths.dataset)},
                {"images", path_json(config.paths.images)},
                {"depth_dir", path_json(config.paths.depth_dir)},
                {"output_dir", path_json(config.paths.output_dir)},
                {"kind_overrides", path_json(config.paths.kind_overrides)}};
  const auto& b = config.backend;
  j["backend"] = {{"base_url", b.base_url},           {"system_id", b.system_id},
                  {"timeout_ms", b.timeout_ms},       {"retries", b.retries},
                  {"retry_delay_ms", b.retry_delay_ms}, {"concurrency", b.concurrency},
                  {"max_new_tokens", b.max_new_tokens}, {"temperature", b.temperature},
                  {"inline_images", b.inline_images}, {"max_error_fraction", b.max_error_fraction}};
  nlohmann::json bins = nlohmann::json::array();
  for (const auto& bin : config.depth.bins.bins()) bins.push_back({{"threshold", bin.threshold}, {"label", bin.label}});
  j["depth"] = {{"percentile", config.depth.percentile}, {"window_size", config.depth.window_size}, {"bins", bins}};
  j["prompt"] = {{"cot_mode", cot_mode_name(config.prompt.cot_mode)},
                 {"stage1_cot_mode", cot_mode_name(config.prompt.stage1_cot_mode)},
                 {"zero_shot_cue", config.prompt.zero_shot_cue},
                 {"few_shot_file", path_json(config.prompt.few_shot_file)}};
  nlohmann::json routing = nlohmann::json::object();
  for (const auto& [kind, strategy] : config.fusion.routing) {
    routing[std::string(kind_name(kind))] = format_fusion_strategy(strategy);
  }
  j["fusion"] = {{"routing", routing},
                 {"priority", config.fusion.priority},
                 {"casefold", config.fusion.normalization.casefold},
                 {"strip_trailing_period", config.fusion.normalization.strip_trailing_period},
                 {"option_letter", config.fusion.normalization.option_letter}};
  const auto& m = config.metrics;
  j["metrics"] = {{"weights", m.weights},
                  {"renormalize_missing", m.renormalize_missing},
                  {"match_threshold", m.match_threshold},
                  {"cider_sigma", m.cider_sigma},
                  {"rouge_beta", m.rouge_beta},
                  {"judge_endpoint", m.judge_endpoint},
                  {"judge_stub", m.judge_stub ? nlohmann::json(*m.judge_stub) : nlohmann::json(nullptr)}};
  return j;
}

InferenceConfig inference_config(const PipelineConfig& config) {
  InferenceConfig out;
  out.system_id = config.backend.system_id;
  out.max_new_tokens = config.backend.max_new_tokens;
  out.temperature = config.backend.temperature;
  out.concurrency = static_cast<std::size_t>(config.backend.concurrency);
  out.retry.attempts = config.backend.retries;
  out.retry.base_delay = std::chrono::milliseconds(config.backend.retry_delay_ms);
  out.images_root = config.paths.images;
  out.max_error_fraction = config.backend.max_error_fraction;
  out.prompt.cot_mode = config.prompt.cot_mode;
  out.prompt.zero_shot_cue = config.prompt.zero_shot_cue;
  out.stage1_prompt.cot_mode = config.prompt.stage1_cot_mode;
  out.stage1_prompt.zero_shot_cue = config.prompt.zero_shot_cue;
  if (!config.prompt.few_shot_file.empty()) {
    std::ifstream in(config.prompt.few_shot_file);
    if (!in) throw ConfigError("prompt.few_shot_file", "cannot read " + config.prompt.few_shot_file.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    out.prompt.few_shot_exemplars = buffer.str();
    out.stage1_prompt.few_shot_exemplars = buffer.str();
  }
  return out;
}

FusionPolicy fusion_policy(const PipelineConfig& config, const std::vector<std::string>& systems) {
  FusionPolicy policy;
  policy.routing = config.fusion.routing;
  policy.priority = config.fusion.priority.empty() ? systems : config.fusion.priority;
  policy.normalization = config.fusion.normalization;
  try {
    policy.validate(systems);
  } catch (const Error& e) {
    throw ConfigError("fusion.priority", e.what());
  }
  return policy;
}

MetricConfig metric_config(const PipelineConfig& config) {
  MetricConfig out;
  if (!config.metrics.weights.empty()) {
    out.weights = ScoreWeights{config.metrics.weights, config.metrics.renormalize_missing};
  }
  out.match_threshold = config.metrics.match_threshold;
  out.cider_sigma = config.metrics.cider_sigma;
  out.rouge_beta = config.metrics.rouge_beta;
  out.normalization = config.fusion.normalization;
  return out;
}

KindOverrides load_kind_overrides(const std::filesystem::path& path) {
  KindOverrides overrides;
  if (path.empty()) return overrides;
  std::ifstream in(path);
  if (!in) throw ConfigError("paths.kind_overrides", "cannot read " + path.string());
  auto json = nlohmann::json::parse(in, nullptr, false);
  if (json.is_discarded() || !json.is_object()) {
    throw ConfigError("paths.kind_overrides", "must be a JSON object question_id -> kind");
  }
  for (const auto& [id, value] : json.items()) {
    auto kind = value.is_string() ? kind_from_name(value.get<std::string>()) : std::nullopt;
    if (!kind) throw ConfigError("paths.kind_overrides", "bad kind for " + id);
    overrides.emplace(id, *kind);
  }
  return overrides;
}

}  // namespace drivelm
