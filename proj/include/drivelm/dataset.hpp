#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "drivelm/camera.hpp"

namespace drivelm {

/// Reference to a key object inside one camera image, written in questions
/// as `<c4,CAM_FRONT,920.8,383.3>`.
struct KeyObjectTag {
  std::string object_id;
  Camera camera = Camera::kFront;
  double center_x = 0.0;
  double center_y = 0.0;

  bool operator==(const KeyObjectTag&) const = default;
};

class TagParseError : public Error {
 public:
  TagParseError(const std::string& message, std::size_t position)
      : Error(message + " at offset " + std::to_string(position)),
        position_(position) {}

  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// Parses exactly one tag token. Optional spaces are accepted after commas;
/// anything else that deviates from `<id,camera,x,y>` throws TagParseError.
KeyObjectTag parse_keyobj_tag(std::string_view text);

/// Canonical rendering, coordinates with one decimal place.
std::string format_tag(const KeyObjectTag& tag);

/// All well-formed tags in order of appearance. Malformed tag-like
/// substrings are skipped.
std::vector<KeyObjectTag> extract_tags(std::string_view text);

struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double center_x() const { return 0.5 * (x_min + x_max); }
  double center_y() const { return 0.5 * (y_min + y_max); }
};

struct KeyObjectInfo {
  KeyObjectTag tag;
  std::string category;
  std::string status;
  std::string visual_description;
  BoundingBox bbox;
  nlohmann::json extra = nlohmann::json::object();
};

enum class QaCategory { kPerception, kPrediction, kPlanning, kBehavior };
enum class QuestionKind { kMultipleChoice, kYesNo, kOpen };

std::string_view category_name(QaCategory category);
std::optional<QaCategory> category_from_name(std::string_view name);
std::string_view kind_name(QuestionKind kind);
std::optional<QuestionKind> kind_from_name(std::string_view name);

struct QaPair {
  std::string question_id;
  QaCategory category = QaCategory::kPerception;
  QuestionKind kind = QuestionKind::kOpen;
  std::string question;
  std::optional<std::string> answer;
  // Fields of the source record we do not interpret (C, con_up, ...).
  nlohmann::json extra = nlohmann::json::object();
};

struct Frame {
  std::string scene_id;
  std::string frame_id;
  std::map<Camera, std::string> image_paths;
  std::map<std::string, KeyObjectInfo> key_objects;
  std::vector<QaPair> qas;
  nlohmann::json extra = nlohmann::json::object();

  const KeyObjectInfo* find_object(const std::string& object_id) const;
};

enum class Split { kTrain, kValidation };

std::string_view split_name(Split split);
std::optional<Split> split_from_name(std::string_view name);

struct LoadWarning {
  std::string where;
  std::string message;
};

struct Corpus {
  Split split = Split::kTrain;
  std::vector<Frame> frames;
  std::vector<LoadWarning> warnings;
  // Scene-level fields (scene_description, ...) keyed by scene id.
  std::map<std::string, nlohmann::json> scene_extras;

  std::size_t question_count() const;
};

class LoadError : public Error {
 public:
  using Error::Error;
};

/// Per-question kind overrides, keyed by question_id.
using KindOverrides = std::map<std::string, QuestionKind>;

/// Builds a corpus from the nested scene / key_frames JSON layout:
/// scene -> key_frames -> frame -> {key_object_infos, QA, image_paths}.
/// Question ids are "<scene>/<frame>/<category>/<index>".
Corpus parse_corpus(const nlohmann::json& document, Split split,
                    const KindOverrides& overrides = {});
Corpus load_corpus(const std::filesystem::path& path, Split split,
                   const KindOverrides& overrides = {});

/// Inverse of parse_corpus; unknown fields are written back unchanged.
nlohmann::json corpus_to_json(const Corpus& corpus);

/// Precedence multiple_choice > yes_no > open.
QuestionKind classify_question(const QaPair& qa);

struct TagOccurrence {
  std::string question_id;
  KeyObjectTag tag;
};

struct TagResolution {
  std::vector<TagOccurrence> resolved;
  std::vector<TagOccurrence> unresolved;
};

/// Splits every tag occurrence of every question into those naming a key
/// object of its frame and those that do not.
TagResolution resolve_tags(const Corpus& corpus);

/// Frame/question counts per split, category and kind plus unresolved tags.
nlohmann::json corpus_stats(const Corpus& corpus);

}  // namespace drivelm
