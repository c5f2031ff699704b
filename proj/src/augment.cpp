#include "drivelm/augment.hpp"

#include <cctype>
#include <cstdio>

#include <spdlog/spdlog.h>

#include "drivelm/text.hpp"

namespace drivelm {
namespace {

std::string one_decimal(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.1f", value);
  return buffer;
}

// Sentence fragment for "<TAG> is ___.": trailing periods dropped and the
// first word lowercased unless it is an acronym.
std::string as_fragment(std::string_view text) {
  std::string out = trim(text);
  while (!out.empty() && out.back() == '.') out.pop_back();
  out = trim(out);
  if (out.empty()) return out;
  std::size_t end = 0;
  while (end < out.size() && !std::isspace(static_cast<unsigned char>(out[end]))) ++end;
  bool all_upper = end > 1;
  for (std::size_t i = 0; i < end && all_upper; ++i) {
    all_upper = !std::islower(static_cast<unsigned char>(out[i]));
  }
  if (!all_upper) out[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(out[0])));
  return out;
}

}  // namespace

std::string keyobj_question(const KeyObjectTag& tag) {
  const std::string tag_text = format_tag(tag);
  return "The width and height of the image are 1600 and 900 respectively. " + tag_text +
         " represents the key object that the center coordinates of the bounding box in the " +
         std::string(camera_name(tag.camera)) + " image are (" + one_decimal(tag.center_x) + "," +
         one_decimal(tag.center_y) + "). What is the object " + tag_text +
         "? What is the state of it?";
}

std::string keyobj_answer(const KeyObjectInfo& info) {
  const std::string description = as_fragment(info.visual_description);
  const std::string status = as_fragment(info.status);
  if (description.empty() || status.empty()) return {};
  return format_tag(info.tag) + " is " + description + ". It is " + status + ".";
}

std::vector<AugmentedQa> generate_keyobj_qas(const Frame& frame) {
  std::vector<AugmentedQa> out;
  for (const auto& [id, info] : frame.key_objects) {
    std::string answer = keyobj_answer(info);
    if (answer.empty()) {
      spdlog::info("augment: frame {} object {} lacks description or status, skipped",
                   frame.frame_id, id);
      continue;
    }
    AugmentedQa augmented;
    augmented.source_object_id = id;
    augmented.qa.question_id = frame.scene_id + "/" + frame.frame_id + "/perception/keyobj-" + id;
    augmented.qa.category = QaCategory::kPerception;
    augmented.qa.kind = QuestionKind::kOpen;
    augmented.qa.question = keyobj_question(info.tag);
    augmented.qa.answer = std::move(answer);
    out.push_back(std::move(augmented));
  }
  return out;
}

nlohmann::json augmented_qa_to_json(const AugmentedQa& augmented) {
  const QaPair& qa = augmented.qa;
  return {{"question_id", qa.question_id},
          {"category", category_name(qa.category)},
          {"kind", kind_name(qa.kind)},
          {"Q", qa.question},
          {"A", qa.answer.value_or("")},
          {"source_object_id", augmented.source_object_id}};
}

Corpus merge_augmented(const Corpus& corpus) {
  Corpus merged = corpus;
  for (auto& frame : merged.frames) {
    auto extra = generate_keyobj_qas(frame);
    // Keep the perception block contiguous so reloaded indices stay stable.
    auto insert_at = frame.qas.begin();
    while (insert_at != frame.qas.end() && insert_at->category == QaCategory::kPerception) ++insert_at;
    std::vector<QaPair> pairs;
    for (auto& augmented : extra) pairs.push_back(std::move(augmented.qa));
    frame.qas.insert(insert_at, pairs.begin(), pairs.end());
  }
  return merged;
}

}  // namespace drivelm
