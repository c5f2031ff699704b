#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "drivelm/camera.hpp"
#include "drivelm/dataset.hpp"
#include "drivelm/depth.hpp"

namespace drivelm {

enum class CotMode { kNone, kZeroShot, kFewShot };

std::string_view cot_mode_name(CotMode mode);
std::optional<CotMode> cot_mode_from_name(std::string_view name);

struct PromptOptions {
  CotMode cot_mode = CotMode::kNone;
  std::string zero_shot_cue = "Let's think step by step.";
  // Few-shot exemplar block, loaded from the configured file.
  std::string few_shot_exemplars;
};

/// Camera implied by a direction phrase in the question, longest phrase
/// first ("front left" before "front").
std::optional<Camera> detect_direction(std::string_view question);

struct ImageChoice {
  enum class Reason { kTag, kDirection, kDefault };
  Camera camera = Camera::kFront;
  Reason reason = Reason::kDefault;
};

/// Tags win over direction, direction over the forward-facing default.
ImageChoice choose_image(const std::vector<KeyObjectTag>& tags, std::optional<Camera> direction);

Camera select_image(const std::vector<KeyObjectTag>& tags, std::optional<Camera> direction,
                    const Frame& frame);

/// Objects a prompt talks about: the question's tags (first mention of each
/// id), otherwise the key objects seen by the chosen camera, otherwise all
/// key objects. Unresolved question tags are kept; callers decide.
std::vector<KeyObjectTag> prompt_subjects(const Frame& frame, const std::vector<KeyObjectTag>& tags,
                                          const ImageChoice& choice);

/// object_id -> one description+state sentence.
using DescriptionSource = std::map<std::string, std::string>;

/// Metadata descriptions for every key object of the frame.
DescriptionSource metadata_descriptions(const Frame& frame);

/// Space-joined descriptions of the subjects. Subjects that do not resolve to
/// a key object or have no description are appended to `omitted`.
std::string gather_desc_state(const Frame& frame, const std::vector<KeyObjectTag>& subjects,
                              const DescriptionSource& descriptions,
                              std::vector<std::string>* omitted = nullptr);

/// Convenience form taking the question tags and image choice directly.
std::string gather_desc_state(const Frame& frame, const ImageChoice& choice,
                              const std::vector<KeyObjectTag>& tags,
                              const DescriptionSource& descriptions);

/// "<TAG> is <label> to the ego vehicle." for each subject with a depth entry.
std::string depth_sentences(const Frame& frame, const std::vector<KeyObjectTag>& subjects,
                            const DepthIndex& depth_index);

struct PromptParts {
  std::string desc_state;
  std::string depth_text;
  std::string question;
  std::optional<std::string> cot_prefix;
};

/// "USER: <image> {desc}{depth}{question} ASSISTANT:" with single spaces
/// between non-empty parts. Zero-shot CoT inserts the cue before the
/// question's final query sentence; few-shot prepends the exemplars.
std::string compose_prompt(const PromptParts& parts);
std::string compose_prompt(std::string_view desc_state, std::string_view depth_text,
                           std::string_view question, const PromptOptions& options = {});

struct PromptBundle {
  std::string question_id;
  Camera camera = Camera::kFront;
  std::string image_path;
  std::string prompt_text;
  PromptParts parts;
  // Subjects whose description sentence had to be left out.
  std::vector<std::string> omitted;
};

/// Builds the full prompt for one question from the given descriptions.
PromptBundle build_prompt(const Frame& frame, const QaPair& qa, const DescriptionSource& descriptions,
                          const DepthIndex& depth_index, const PromptOptions& options,
                          const std::filesystem::path& images_root = {});

std::string resolve_image_path(const Frame& frame, Camera camera,
                               const std::filesystem::path& images_root);

nlohmann::json prompt_bundle_to_json(const PromptBundle& bundle);

struct ExportReport {
  std::size_t records = 0;
  std::vector<std::string> skipped;
};

/// One JSON line per QA: {question_id, image_path, prompt_text, target}.
/// Prompts use metadata descriptions and no chain-of-thought. When an images
/// root is given, records whose image file is missing are skipped.
ExportReport export_training_records(const Corpus& corpus, const DepthIndex& depth_index,
                                     const std::filesystem::path& out_path,
                                     const std::filesystem::path& images_root = {});

}  // namespace drivelm
