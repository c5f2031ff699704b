#include "drivelm/dataset.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include <spdlog/spdlog.h>

#include "drivelm/text.hpp"

namespace drivelm {
namespace {

constexpr std::array<QaCategory, 4> kAllCategories = {
    QaCategory::kPerception, QaCategory::kPrediction, QaCategory::kPlanning,
    QaCategory::kBehavior};

constexpr std::array<QuestionKind, 3> kAllKinds = {
    QuestionKind::kMultipleChoice, QuestionKind::kYesNo, QuestionKind::kOpen};

// Cursor over a single tag token.
class TagScanner {
 public:
  explicit TagScanner(std::string_view text) : text_(text) {}

  void expect(char c, const char* what) {
    if (pos_ >= text_.size() || text_[pos_] != c) {
      throw TagParseError(std::string("expected ") + what, pos_);
    }
    ++pos_;
  }

  void skip_spaces() {
    while (pos_ < text_.size() && text_[pos_] == ' ') ++pos_;
  }

  // Field runs until the next ',' or '>'.
  std::pair<std::string_view, std::size_t> field() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && text_[pos_] != ',' && text_[pos_] != '>') ++pos_;
    return {text_.substr(start, pos_ - start), start};
  }

  bool at_end() const { return pos_ == text_.size(); }
  std::size_t pos() const { return pos_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

double parse_coordinate(std::string_view field, std::size_t offset, double upper,
                        const char* axis) {
  // digits[.digits]; from_chars alone would also take "-0", "1." and "inf".
  const std::size_t dot = field.find('.');
  auto all_digits = [](std::string_view part) {
    return !part.empty() && std::all_of(part.begin(), part.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  const bool well_formed = dot == std::string_view::npos
                               ? all_digits(field)
                               : all_digits(field.substr(0, dot)) && all_digits(field.substr(dot + 1));
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value, std::chars_format::fixed);
  if (!well_formed || ec != std::errc() || ptr != last) {
    throw TagParseError(std::string("non-numeric ") + axis + " coordinate '" +
                            std::string(field) + "'",
                        offset);
  }
  if (!std::isfinite(value) || value < 0.0 || value > upper) {
    throw TagParseError(std::string(axis) + " coordinate out of image bounds", offset);
  }
  return value;
}

void validate_object_id(std::string_view id, std::size_t offset) {
  bool ok = id.size() >= 2 && id[0] == 'c';
  for (std::size_t i = 1; ok && i < id.size(); ++i) {
    ok = id[i] >= '0' && id[i] <= '9';
  }
  if (!ok) throw TagParseError("object id must be 'c' followed by digits", offset);
}

std::string text_or_empty(const nlohmann::json& object, const char* key) {
  auto it = object.find(key);
  if (it == object.end() || it->is_null()) return {};
  if (!it->is_string()) return it->dump();
  return it->get<std::string>();
}

// Position just past an option marker like "A." that starts a word and is
// followed by option text, or npos.
std::size_t find_option_marker(std::string_view text, char letter, std::size_t from) {
  for (std::size_t i = from; i + 1 < text.size(); ++i) {
    if (text[i] != letter || text[i + 1] != '.') continue;
    if (i > 0 && !std::isspace(static_cast<unsigned char>(text[i - 1]))) continue;
    std::size_t j = i + 2;
    while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j < text.size()) return i + 2;
  }
  return std::string_view::npos;
}

bool has_enumerated_options(std::string_view question) {
  const std::size_t after_a = find_option_marker(question, 'A', 0);
  if (after_a == std::string_view::npos) return false;
  return find_option_marker(question, 'B', after_a) != std::string_view::npos;
}

std::string where(const std::string& scene, const std::string& frame) {
  return "scene '" + scene + "' frame '" + frame + "'";
}

BoundingBox parse_bbox(const nlohmann::json& value, const std::string& context) {
  if (!value.is_array() || value.size() != 4) {
    throw LoadError(context + ": 2d_bbox must be an array of 4 numbers");
  }
  for (const auto& v : value) {
    if (!v.is_number()) throw LoadError(context + ": 2d_bbox must be numeric");
  }
  BoundingBox box{value[0].get<double>(), value[1].get<double>(), value[2].get<double>(),
                  value[3].get<double>()};
  if (!(box.x_min < box.x_max) || !(box.y_min < box.y_max)) {
    throw LoadError(context + ": 2d_bbox has non-positive extent");
  }
  return box;
}

KeyObjectInfo parse_key_object(const std::string& tag_text, const nlohmann::json& value,
                               const std::string& context, std::vector<LoadWarning>& warnings) {
  KeyObjectInfo info;
  try {
    info.tag = parse_keyobj_tag(tag_text);
  } catch (const TagParseError& e) {
    throw LoadError(context + ": bad key object tag '" + tag_text + "': " + e.what());
  }
  if (!value.is_object()) throw LoadError(context + ": key object entry must be an object");
  const std::string object_context = context + " object " + info.tag.object_id;
  info.category = text_or_empty(value, "Category");
  info.status = text_or_empty(value, "Status");
  info.visual_description = text_or_empty(value, "Visual_description");
  auto bbox = value.find("2d_bbox");
  if (bbox == value.end()) throw LoadError(object_context + ": missing 2d_bbox");
  info.bbox = parse_bbox(*bbox, object_context);

  const auto& b = info.bbox;
  if (b.x_min < 0.0 || b.y_min < 0.0 || b.x_max > kImageWidth || b.y_max > kImageHeight) {
    warnings.push_back({object_context, "2d_bbox extends beyond the image"});
  }
  if (std::abs(b.center_x() - info.tag.center_x) > 1.0 ||
      std::abs(b.center_y() - info.tag.center_y) > 1.0) {
    warnings.push_back({object_context, "2d_bbox center differs from tag center by more than 1 px"});
  }
  for (const auto& [key, field] : value.items()) {
    if (key != "Category" && key != "Status" && key != "Visual_description" && key != "2d_bbox") {
      info.extra[key] = field;
    }
  }
  return info;
}

Frame parse_frame(const std::string& scene_id, const std::string& frame_id,
                  const nlohmann::json& value, const KindOverrides& overrides,
                  std::vector<LoadWarning>& warnings) {
  const std::string context = where(scene_id, frame_id);
  if (!value.is_object()) throw LoadError(context + ": frame must be an object");

  Frame frame;
  frame.scene_id = scene_id;
  frame.frame_id = frame_id;

  auto paths = value.find("image_paths");
  if (paths == value.end() || !paths->is_object()) {
    throw LoadError(context + ": missing image_paths");
  }
  for (const auto& [name, path] : paths->items()) {
    auto camera = camera_from_name(name);
    if (!camera) throw LoadError(context + ": unknown camera '" + name + "' in image_paths");
    if (!path.is_string()) throw LoadError(context + ": image path for " + name + " must be a string");
    frame.image_paths[*camera] = path.get<std::string>();
  }
  for (Camera camera : kAllCameras) {
    if (!frame.image_paths.count(camera)) {
      throw LoadError(context + ": missing image path for " + std::string(camera_name(camera)));
    }
  }

  if (auto objects = value.find("key_object_infos"); objects != value.end() && !objects->is_null()) {
    if (!objects->is_object()) throw LoadError(context + ": key_object_infos must be an object");
    for (const auto& [tag_text, info_json] : objects->items()) {
      KeyObjectInfo info = parse_key_object(tag_text, info_json, context, warnings);
      const std::string id = info.tag.object_id;
      if (!frame.key_objects.emplace(id, std::move(info)).second) {
        throw LoadError(context + ": duplicate key object id " + id);
      }
    }
  }

  auto qa = value.find("QA");
  if (qa == value.end() || !qa->is_object()) throw LoadError(context + ": missing QA");
  for (const auto& [category_text, list] : qa->items()) {
    auto category = category_from_name(category_text);
    if (!category) throw LoadError(context + ": unknown QA category '" + category_text + "'");
  }
  // Categories in task order so question order is stable regardless of key order.
  for (QaCategory category : kAllCategories) {
    auto list = qa->find(std::string(category_name(category)));
    if (list == qa->end() || list->is_null()) continue;
    if (!list->is_array()) {
      throw LoadError(context + ": QA category '" + std::string(category_name(category)) +
                      "' must be a list");
    }
    for (std::size_t i = 0; i < list->size(); ++i) {
      const auto& item = (*list)[i];
      QaPair pair;
      pair.question_id = scene_id + "/" + frame_id + "/" + std::string(category_name(category)) +
                         "/" + std::to_string(i);
      pair.category = category;
      if (!item.is_object() || !item.contains("Q") || !item["Q"].is_string()) {
        throw LoadError(context + ": QA entry " + pair.question_id + " lacks a question string");
      }
      pair.question = item["Q"].get<std::string>();
      if (auto a = item.find("A"); a != item.end() && a->is_string()) {
        pair.answer = a->get<std::string>();
      }
      for (const auto& [key, field] : item.items()) {
        if (key != "Q" && key != "A") pair.extra[key] = field;
      }
      auto override_it = overrides.find(pair.question_id);
      pair.kind = override_it != overrides.end() ? override_it->second : classify_question(pair);
      frame.qas.push_back(std::move(pair));
    }
  }

  for (const auto& [key, field] : value.items()) {
    if (key != "image_paths" && key != "key_object_infos" && key != "QA") frame.extra[key] = field;
  }
  return frame;
}

}  // namespace

KeyObjectTag parse_keyobj_tag(std::string_view text) {
  TagScanner scanner(text);
  scanner.expect('<', "'<'");

  auto [id, id_offset] = scanner.field();
  validate_object_id(id, id_offset);
  scanner.expect(',', "',' after object id");
  scanner.skip_spaces();

  auto [camera_text, camera_offset] = scanner.field();
  auto camera = camera_from_name(camera_text);
  if (!camera) throw TagParseError("unknown camera '" + std::string(camera_text) + "'", camera_offset);
  scanner.expect(',', "',' after camera");
  scanner.skip_spaces();

  auto [x_text, x_offset] = scanner.field();
  const double x = parse_coordinate(x_text, x_offset, kImageWidth, "x");
  scanner.expect(',', "',' after x coordinate");
  scanner.skip_spaces();

  auto [y_text, y_offset] = scanner.field();
  const double y = parse_coordinate(y_text, y_offset, kImageHeight, "y");
  scanner.expect('>', "'>' closing the tag");
  if (!scanner.at_end()) throw TagParseError("trailing characters after tag", scanner.pos());

  return KeyObjectTag{std::string(id), *camera, x, y};
}

std::string format_tag(const KeyObjectTag& tag) {
  char coords[64];
  std::snprintf(coords, sizeof(coords), "%.1f,%.1f", tag.center_x, tag.center_y);
  return "<" + tag.object_id + "," + std::string(camera_name(tag.camera)) + "," + coords + ">";
}

std::vector<KeyObjectTag> extract_tags(std::string_view text) {
  std::vector<KeyObjectTag> tags;
  std::size_t pos = text.find('<');
  while (pos != std::string_view::npos) {
    const std::size_t close = text.find('>', pos);
    if (close == std::string_view::npos) break;
    try {
      tags.push_back(parse_keyobj_tag(text.substr(pos, close - pos + 1)));
      pos = text.find('<', close + 1);
    } catch (const TagParseError& e) {
      spdlog::debug("skipping malformed tag '{}': {}", text.substr(pos, close - pos + 1), e.what());
      pos = text.find('<', pos + 1);
    }
  }
  return tags;
}

std::string_view category_name(QaCategory category) {
  switch (category) {
    case QaCategory::kPerception: return "perception";
    case QaCategory::kPrediction: return "prediction";
    case QaCategory::kPlanning: return "planning";
    case QaCategory::kBehavior: return "behavior";
  }
  return "perception";
}

std::optional<QaCategory> category_from_name(std::string_view name) {
  for (QaCategory category : kAllCategories) {
    if (category_name(category) == name) return category;
  }
  return std::nullopt;
}

std::string_view kind_name(QuestionKind kind) {
  switch (kind) {
    case QuestionKind::kMultipleChoice: return "multiple_choice";
    case QuestionKind::kYesNo: return "yes_no";
    case QuestionKind::kOpen: return "open";
  }
  return "open";
}

std::optional<QuestionKind> kind_from_name(std::string_view name) {
  for (QuestionKind kind : kAllKinds) {
    if (kind_name(kind) == name) return kind;
  }
  return std::nullopt;
}

std::string_view split_name(Split split) {
  return split == Split::kTrain ? "train" : "validation";
}

std::optional<Split> split_from_name(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "validation" || name == "val") return Split::kValidation;
  return std::nullopt;
}

const KeyObjectInfo* Frame::find_object(const std::string& object_id) const {
  auto it = key_objects.find(object_id);
  return it == key_objects.end() ? nullptr : &it->second;
}

std::size_t Corpus::question_count() const {
  std::size_t count = 0;
  for (const auto& frame : frames) count += frame.qas.size();
  return count;
}

QuestionKind classify_question(const QaPair& qa) {
  if (has_enumerated_options(qa.question) ||
      to_lower(qa.question).find("please select") != std::string::npos) {
    return QuestionKind::kMultipleChoice;
  }

  if (qa.answer) {
    const std::string reference = normalize_answer(*qa.answer, {true, true, false});
    if (reference == "yes" || reference == "no") return QuestionKind::kYesNo;
  }

  static constexpr std::array<std::string_view, 20> kAuxiliaries = {
      "is",    "are",  "was",   "were", "do",    "does", "did",   "will", "would", "can",
      "could", "should", "shall", "has", "have", "had",  "may",   "might", "must", "am"};
  const std::string question = trim(qa.question);
  std::size_t end = 0;
  while (end < question.size() && std::isalpha(static_cast<unsigned char>(question[end]))) ++end;
  const std::string first_word = to_lower(std::string_view(question).substr(0, end));
  for (auto aux : kAuxiliaries) {
    if (first_word == aux) return QuestionKind::kYesNo;
  }
  return QuestionKind::kOpen;
}

Corpus parse_corpus(const nlohmann::json& document, Split split, const KindOverrides& overrides) {
  if (!document.is_object()) throw LoadError("dataset root must be an object of scenes");
  Corpus corpus;
  corpus.split = split;
  std::set<std::string> frame_ids;
  for (const auto& [scene_id, scene] : document.items()) {
    if (!scene.is_object()) throw LoadError("scene '" + scene_id + "' must be an object");
    auto frames = scene.find("key_frames");
    if (frames == scene.end() || !frames->is_object()) {
      throw LoadError("scene '" + scene_id + "': missing key_frames");
    }
    nlohmann::json scene_extra = nlohmann::json::object();
    for (const auto& [key, field] : scene.items()) {
      if (key != "key_frames") scene_extra[key] = field;
    }
    corpus.scene_extras[scene_id] = std::move(scene_extra);
    for (const auto& [frame_id, frame] : frames->items()) {
      if (!frame_ids.insert(frame_id).second) {
        throw LoadError(where(scene_id, frame_id) + ": duplicate frame id");
      }
      corpus.frames.push_back(parse_frame(scene_id, frame_id, frame, overrides, corpus.warnings));
    }
  }
  for (const auto& warning : corpus.warnings) {
    spdlog::debug("{}: {}", warning.where, warning.message);
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, Split split, const KindOverrides& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open dataset file " + path.string());
  nlohmann::json document;
  try {
    document = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw LoadError("dataset file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_corpus(document, split, overrides);
}

nlohmann::json corpus_to_json(const Corpus& corpus) {
  nlohmann::json root = nlohmann::json::object();
  for (const auto& [scene_id, extra] : corpus.scene_extras) {
    root[scene_id] = extra;
    root[scene_id]["key_frames"] = nlohmann::json::object();
  }
  for (const auto& frame : corpus.frames) {
    nlohmann::json out = frame.extra;
    for (const auto& [camera, path] : frame.image_paths) {
      out["image_paths"][std::string(camera_name(camera))] = path;
    }
    out["key_object_infos"] = nlohmann::json::object();
    for (const auto& [id, info] : frame.key_objects) {
      nlohmann::json object = info.extra;
      object["Category"] = info.category;
      object["Status"] = info.status;
      object["Visual_description"] = info.visual_description;
      object["2d_bbox"] = {info.bbox.x_min, info.bbox.y_min, info.bbox.x_max, info.bbox.y_max};
      out["key_object_infos"][format_tag(info.tag)] = std::move(object);
    }
    out["QA"] = nlohmann::json::object();
    for (QaCategory category : kAllCategories) {
      out["QA"][std::string(category_name(category))] = nlohmann::json::array();
    }
    for (const auto& qa : frame.qas) {
      nlohmann::json item = qa.extra;
      item["Q"] = qa.question;
      if (qa.answer) item["A"] = *qa.answer;
      out["QA"][std::string(category_name(qa.category))].push_back(std::move(item));
    }
    root[frame.scene_id]["key_frames"][frame.frame_id] = std::move(out);
  }
  return root;
}

TagResolution resolve_tags(const Corpus& corpus) {
  TagResolution resolution;
  for (const auto& frame : corpus.frames) {
    for (const auto& qa : frame.qas) {
      for (auto& tag : extract_tags(qa.question)) {
        auto& bucket = frame.find_object(tag.object_id) ? resolution.resolved : resolution.unresolved;
        bucket.push_back({qa.question_id, std::move(tag)});
      }
    }
  }
  return resolution;
}

nlohmann::json corpus_stats(const Corpus& corpus) {
  nlohmann::json stats;
  stats["split"] = split_name(corpus.split);
  stats["frames"] = corpus.frames.size();
  stats["questions"] = corpus.question_count();
  nlohmann::json by_category = nlohmann::json::object();
  nlohmann::json by_kind = nlohmann::json::object();
  for (QaCategory category : kAllCategories) by_category[std::string(category_name(category))] = 0;
  for (QuestionKind kind : kAllKinds) by_kind[std::string(kind_name(kind))] = 0;
  std::size_t key_objects = 0;
  for (const auto& frame : corpus.frames) {
    key_objects += frame.key_objects.size();
    for (const auto& qa : frame.qas) {
      by_category[std::string(category_name(qa.category))] =
          by_category[std::string(category_name(qa.category))].get<std::size_t>() + 1;
      by_kind[std::string(kind_name(qa.kind))] =
          by_kind[std::string(kind_name(qa.kind))].get<std::size_t>() + 1;
    }
  }
  stats["key_objects"] = key_objects;
  stats["by_category"] = std::move(by_category);
  stats["by_kind"] = std::move(by_kind);

  const TagResolution resolution = resolve_tags(corpus);
  stats["tag_occurrences"] = resolution.resolved.size() + resolution.unresolved.size();
  nlohmann::json unresolved = nlohmann::json::array();
  for (const auto& occurrence : resolution.unresolved) {
    unresolved.push_back({{"question_id", occurrence.question_id},
                          {"tag", format_tag(occurrence.tag)}});
  }
  stats["unresolved_tags"] = std::move(unresolved);
  nlohmann::json warnings = nlohmann::json::array();
  for (const auto& warning : corpus.warnings) {
    warnings.push_back({{"where", warning.where}, {"message", warning.message}});
  }
  stats["warnings"] = std::move(warnings);
  return stats;
}

}  // namespace drivelm
