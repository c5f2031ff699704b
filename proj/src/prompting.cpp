#include "drivelm/prompting.hpp"

#include <array>
#include <cctype>
#include <fstream>
#include <set>
#include <utility>

#include <spdlog/spdlog.h>

#include "drivelm/augment.hpp"
#include "drivelm/text.hpp"

namespace drivelm {
namespace {

struct DirectionPhrase {
  std::string_view phrase;
  Camera camera;
};

// Longest phrases first so "front left" never degrades to "front".
constexpr std::array<DirectionPhrase, 12> kDirectionPhrases = {{
    {"front left", Camera::kFrontLeft},
    {"front-left", Camera::kFrontLeft},
    {"front right", Camera::kFrontRight},
    {"front-right", Camera::kFrontRight},
    {"back left", Camera::kBackLeft},
    {"back-left", Camera::kBackLeft},
    {"back right", Camera::kBackRight},
    {"back-right", Camera::kBackRight},
    {"behind", Camera::kBack},
    {"front", Camera::kFront},
    {"back", Camera::kBack},
    {"rear", Camera::kBack},
}};

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

bool contains_word(std::string_view haystack, std::string_view phrase) {
  std::size_t pos = haystack.find(phrase);
  while (pos != std::string_view::npos) {
    const bool left_ok = pos == 0 || !is_word_char(haystack[pos - 1]);
    const std::size_t end = pos + phrase.size();
    const bool right_ok = end == haystack.size() || !is_word_char(haystack[end]);
    if (left_ok && right_ok) return true;
    pos = haystack.find(phrase, pos + 1);
  }
  return false;
}

void append_sentence(std::string& out, std::string_view sentence) {
  if (sentence.empty()) return;
  if (!out.empty()) out.push_back(' ');
  out.append(sentence);
}

// Offset where the sentence holding the last '?' begins.
std::size_t final_query_start(std::string_view question) {
  const std::size_t mark = question.rfind('?');
  if (mark == std::string_view::npos) return 0;
  for (std::size_t i = mark; i-- > 0;) {
    const char c = question[i];
    if ((c == '.' || c == '?' || c == '!') && i + 1 < question.size() &&
        std::isspace(static_cast<unsigned char>(question[i + 1]))) {
      std::size_t start = i + 1;
      while (start < question.size() && std::isspace(static_cast<unsigned char>(question[start]))) ++start;
      return start;
    }
  }
  return 0;
}

std::string with_zero_shot_cue(std::string_view question, std::string_view cue) {
  const std::size_t start = final_query_start(question);
  std::string out;
  append_sentence(out, trim(question.substr(0, start)));
  append_sentence(out, cue);
  append_sentence(out, question.substr(start));
  return out;
}

}  // namespace

std::string_view cot_mode_name(CotMode mode) {
  switch (mode) {
    case CotMode::kNone: return "none";
    case CotMode::kZeroShot: return "zero_shot";
    case CotMode::kFewShot: return "few_shot";
  }
  return "none";
}

std::optional<CotMode> cot_mode_from_name(std::string_view name) {
  for (CotMode mode : {CotMode::kNone, CotMode::kZeroShot, CotMode::kFewShot}) {
    if (cot_mode_name(mode) == name) return mode;
  }
  return std::nullopt;
}

std::optional<Camera> detect_direction(std::string_view question) {
  const std::string lowered = to_lower(question);
  for (const auto& entry : kDirectionPhrases) {
    if (contains_word(lowered, entry.phrase)) return entry.camera;
  }
  return std::nullopt;
}

ImageChoice choose_image(const std::vector<KeyObjectTag>& tags, std::optional<Camera> direction) {
  if (!tags.empty()) {
    for (const auto& tag : tags) {
      if (tag.camera != tags.front().camera) {
        spdlog::debug("question tags span several cameras, using {}", camera_name(tags.front().camera));
        break;
      }
    }
    return {tags.front().camera, ImageChoice::Reason::kTag};
  }
  if (direction) return {*direction, ImageChoice::Reason::kDirection};
  return {Camera::kFront, ImageChoice::Reason::kDefault};
}

Camera select_image(const std::vector<KeyObjectTag>& tags, std::optional<Camera> direction,
                    const Frame& /*frame*/) {
  return choose_image(tags, direction).camera;
}

std::vector<KeyObjectTag> prompt_subjects(const Frame& frame, const std::vector<KeyObjectTag>& tags,
                                          const ImageChoice& choice) {
  std::vector<KeyObjectTag> subjects;
  if (!tags.empty()) {
    std::set<std::string> seen;
    for (const auto& tag : tags) {
      if (!seen.insert(tag.object_id).second) continue;
      const KeyObjectInfo* info = frame.find_object(tag.object_id);
      subjects.push_back(info ? info->tag : tag);
    }
    return subjects;
  }
  for (const auto& [id, info] : frame.key_objects) {
    if (choice.reason == ImageChoice::Reason::kDirection && info.tag.camera != choice.camera) continue;
    subjects.push_back(info.tag);
  }
  return subjects;
}

DescriptionSource metadata_descriptions(const Frame& frame) {
  DescriptionSource out;
  for (const auto& [id, info] : frame.key_objects) {
    std::string sentence = keyobj_answer(info);
    if (!sentence.empty()) out.emplace(id, std::move(sentence));
  }
  return out;
}

std::string gather_desc_state(const Frame& frame, const std::vector<KeyObjectTag>& subjects,
                              const DescriptionSource& descriptions,
                              std::vector<std::string>* omitted) {
  std::string out;
  for (const auto& subject : subjects) {
    auto it = descriptions.find(subject.object_id);
    if (!frame.find_object(subject.object_id) || it == descriptions.end() || it->second.empty()) {
      spdlog::debug("frame {}: no description for {}", frame.frame_id, subject.object_id);
      if (omitted) omitted->push_back(subject.object_id);
      continue;
    }
    append_sentence(out, trim(it->second));
  }
  return out;
}

std::string gather_desc_state(const Frame& frame, const ImageChoice& choice,
                              const std::vector<KeyObjectTag>& tags,
                              const DescriptionSource& descriptions) {
  return gather_desc_state(frame, prompt_subjects(frame, tags, choice), descriptions);
}

std::string depth_sentences(const Frame& frame, const std::vector<KeyObjectTag>& subjects,
                            const DepthIndex& depth_index) {
  std::string out;
  for (const auto& subject : subjects) {
    const ObjectDepth* depth = depth_index.find(frame.frame_id, subject.object_id);
    if (!depth) continue;
    append_sentence(out, format_tag(subject) + " is " + depth->label + " to the ego vehicle.");
  }
  return out;
}

std::string compose_prompt(const PromptParts& parts) {
  std::string body;
  append_sentence(body, trim(parts.desc_state));
  append_sentence(body, trim(parts.depth_text));
  append_sentence(body, trim(parts.question));
  std::string prompt = "USER: <image>";
  append_sentence(prompt, body);
  append_sentence(prompt, "ASSISTANT:");
  return prompt;
}

std::string compose_prompt(std::string_view desc_state, std::string_view depth_text,
                           std::string_view question, const PromptOptions& options) {
  PromptParts parts{std::string(desc_state), std::string(depth_text), trim(question), std::nullopt};
  switch (options.cot_mode) {
    case CotMode::kNone:
      break;
    case CotMode::kZeroShot:
      parts.question = with_zero_shot_cue(parts.question, options.zero_shot_cue);
      break;
    case CotMode::kFewShot: {
      std::string question_with_shots;
      append_sentence(question_with_shots, trim(options.few_shot_exemplars));
      append_sentence(question_with_shots, parts.question);
      parts.question = std::move(question_with_shots);
      break;
    }
  }
  return compose_prompt(parts);
}

std::string resolve_image_path(const Frame& frame, Camera camera,
                               const std::filesystem::path& images_root) {
  auto it = frame.image_paths.find(camera);
  if (it == frame.image_paths.end() || it->second.empty()) return {};
  if (images_root.empty()) return it->second;
  return (images_root / it->second).lexically_normal().string();
}

PromptBundle build_prompt(const Frame& frame, const QaPair& qa, const DescriptionSource& descriptions,
                          const DepthIndex& depth_index, const PromptOptions& options,
                          const std::filesystem::path& images_root) {
  const auto tags = extract_tags(qa.question);
  const ImageChoice choice = choose_image(tags, detect_direction(qa.question));
  const auto subjects = prompt_subjects(frame, tags, choice);

  PromptBundle bundle;
  bundle.question_id = qa.question_id;
  bundle.camera = choice.camera;
  bundle.image_path = resolve_image_path(frame, choice.camera, images_root);
  bundle.parts.desc_state = gather_desc_state(frame, subjects, descriptions, &bundle.omitted);
  bundle.parts.depth_text = depth_sentences(frame, subjects, depth_index);
  bundle.parts.question = qa.question;
  if (options.cot_mode == CotMode::kZeroShot) bundle.parts.cot_prefix = options.zero_shot_cue;
  if (options.cot_mode == CotMode::kFewShot) bundle.parts.cot_prefix = options.few_shot_exemplars;
  bundle.prompt_text =
      compose_prompt(bundle.parts.desc_state, bundle.parts.depth_text, qa.question, options);
  return bundle;
}

nlohmann::json prompt_bundle_to_json(const PromptBundle& bundle) {
  nlohmann::json parts = {{"desc_state", bundle.parts.desc_state},
                          {"depth_text", bundle.parts.depth_text},
                          {"question", bundle.parts.question}};
  parts["cot_prefix"] = bundle.parts.cot_prefix ? nlohmann::json(*bundle.parts.cot_prefix)
                                                : nlohmann::json(nullptr);
  return {{"question_id", bundle.question_id},
          {"camera", camera_name(bundle.camera)},
          {"image_path", bundle.image_path},
          {"prompt_text", bundle.prompt_text},
          {"parts", std::move(parts)},
          {"omitted", bundle.omitted}};
}

ExportReport export_training_records(const Corpus& corpus, const DepthIndex& depth_index,
                                     const std::filesystem::path& out_path,
                                     const std::filesystem::path& images_root) {
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw Error("cannot write training records to " + out_path.string());
  ExportReport report;
  const PromptOptions no_cot;
  for (const auto& frame : corpus.frames) {
    const DescriptionSource descriptions = metadata_descriptions(frame);
    for (const auto& qa : frame.qas) {
      PromptBundle bundle = build_prompt(frame, qa, descriptions, depth_index, no_cot, images_root);
      if (bundle.image_path.empty() ||
          (!images_root.empty() && !std::filesystem::exists(bundle.image_path))) {
        report.skipped.push_back(qa.question_id + ": missing image " + bundle.image_path);
        continue;
      }
      nlohmann::json record = {{"question_id", qa.question_id},
                               {"image_path", bundle.image_path},
                               {"prompt_text", bundle.prompt_text},
                               {"target", qa.answer.value_or("")}};
      out << record.dump() << "\n";
      ++report.records;
    }
  }
  return report;
}

}  // namespace drivelm
