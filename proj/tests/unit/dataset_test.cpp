#include <doctest.h>

#include <random>

#include "drivelm/dataset.hpp"
#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"

using namespace drivelm;

namespace {

nlohmann::json image_paths() {
  nlohmann::json paths;
  for (Camera camera : kAllCameras) paths[std::string(camera_name(camera))] = std::string(camera_name(camera)) + ".jpg";
  return paths;
}

nlohmann::json one_frame(nlohmann::json qa, nlohmann::json objects = nlohmann::json::object()) {
  return {{"s1", {{"key_frames", {{"f1", {{"key_object_infos", objects}, {"QA", qa}, {"image_paths", image_paths()}}}}}}}};
}

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("parses the literal tag") {
    const auto tag = parse_keyobj_tag("<c4,CAM_FRONT,920.8,383.3>");
    CHECK(tag.object_id == "c4");
    CHECK(tag.camera == Camera::kFront);
    CHECK(tag.center_x == doctest::Approx(920.8));
    CHECK(tag.center_y == doctest::Approx(383.3));
    CHECK(format_tag(tag) == "<c4,CAM_FRONT,920.8,383.3>");
  }

  TEST_CASE("spaces after commas are tolerated") {
    const auto tag = parse_keyobj_tag("<c12, CAM_BACK_LEFT,  10, 20.5>");
    CHECK(format_tag(tag) == "<c12,CAM_BACK_LEFT,10.0,20.5>");
  }

  TEST_CASE("malformed tags report a position") {
    struct Case {
      const char* text;
      std::size_t position;
    };
    const Case cases[] = {
        {"<c4,CAM_FRONT,920.8>", 19},          // wrong arity
        {"<c4,CAM_TOP,1,2>", 4},               // unknown camera
        {"<c4,CAM_FRONT,abc,2>", 14},          // non-numeric
        {"<c4 ,CAM_FRONT,1,2>", 1},            // space before comma
        {"<x4,CAM_FRONT,1,2>", 1},             // bad id
        {"<c4,CAM_FRONT,1601,2>", 14},         // out of bounds
        {"<c4,CAM_FRONT,1,-0>", 16},           // sign
        {"<c4,CAM_FRONT,1,2>x", 18},           // trailing
    };
    for (const auto& c : cases) {
      CAPTURE(c.text);
      try {
        parse_keyobj_tag(c.text);
        FAIL("expected TagParseError");
      } catch (const TagParseError& e) {
        CHECK(e.position() == c.position);
      }
    }
  }

  TEST_CASE("extract_tags keeps order and duplicates, skips malformed") {
    const auto tags = extract_tags("<c1,CAM_FRONT,1.0,2.0> and <bad> then <c2,CAM_BACK,3,4> <c1,CAM_FRONT,1.0,2.0>");
    REQUIRE(tags.size() == 3);
    CHECK(tags[0].object_id == "c1");
    CHECK(tags[1].object_id == "c2");
    CHECK(tags[2] == tags[0]);
    CHECK(extract_tags("Is it safe to turn left?").empty());
    CHECK(extract_tags("<<c1,CAM_FRONT,1,2>").size() == 1);
  }

  TEST_CASE("extract_tags agrees with the brute-force scan") {
    std::mt19937 rng(7);
    const std::vector<std::string> pieces = {"<c3,CAM_FRONT,12.5,7.0>", "<", ">", ",", " ", "c9",
                                             "CAM_BACK", "<c1, CAM_BACK_RIGHT, 1600, 900>", "<c2,CAM_FRONT,1,>",
                                             "word", "1.5", "<c7,CAM_FRONT_LEFT,0.0,0.0>"};
    for (int round = 0; round < 300; ++round) {
      std::string text;
      const int n = static_cast<int>(rng() % 12);
      for (int i = 0; i < n; ++i) text += pieces[rng() % pieces.size()];
      CAPTURE(text);
      CHECK(extract_tags(text) == oracle::scan_tags(text));
    }
  }

  TEST_CASE("classification precedence") {
    QaPair mc{"q", QaCategory::kBehavior, QuestionKind::kOpen,
              "Is it fast? Please select the correct answer from the following options: A. Yes. B. No.", "A"};
    CHECK(classify_question(mc) == QuestionKind::kMultipleChoice);
    QaPair yn{"q", QaCategory::kPrediction, QuestionKind::kOpen, "Would it stop?", std::nullopt};
    CHECK(classify_question(yn) == QuestionKind::kYesNo);
    QaPair by_answer{"q", QaCategory::kPrediction, QuestionKind::kOpen, "Tell me if it stops.", "No."};
    CHECK(classify_question(by_answer) == QuestionKind::kYesNo);
    QaPair open{"q", QaCategory::kPlanning, QuestionKind::kOpen, "What should the ego vehicle do?", "Stop."};
    CHECK(classify_question(open) == QuestionKind::kOpen);
    QaPair not_options{"q", QaCategory::kPlanning, QuestionKind::kOpen, "What is at A.B. street?", "A shop."};
    CHECK(classify_question(not_options) == QuestionKind::kOpen);
  }

  TEST_CASE("mini fixture loads") {
    const Corpus corpus = load_corpus(fixtures::mini_dir() / "dataset.json", Split::kValidation);
    CHECK(corpus.frames.size() == 2);
    CHECK(corpus.question_count() == 14);
    CHECK(corpus.warnings.empty());
    const Frame& a = corpus.frames[0];
    CHECK(a.frame_id == "frame-a");
    CHECK(a.key_objects.size() == 3);
    CHECK(a.qas.front().question_id == "scene-0001/frame-a/perception/0");
    CHECK(corpus.scene_extras.at("scene-0001").at("scene_description") == "Urban intersection in light traffic.");
    const auto stats = corpus_stats(corpus);
    CHECK(stats["frames"] == 2);
    CHECK(stats["questions"] == 14);
    CHECK(stats["by_kind"]["multiple_choice"] == 3);
    CHECK(stats["unresolved_tags"].empty());
  }

  TEST_CASE("round trip through corpus_to_json") {
    const Corpus corpus = load_corpus(fixtures::mini_dir() / "dataset.json", Split::kValidation);
    const Corpus again = parse_corpus(corpus_to_json(corpus), Split::kValidation);
    CHECK(corpus_to_json(again) == corpus_to_json(corpus));
  }

  TEST_CASE("kind overrides win") {
    const Corpus corpus = load_corpus(fixtures::mini_dir() / "dataset.json", Split::kValidation,
                                      {{"scene-0001/frame-a/planning/0", QuestionKind::kYesNo}});
    CHECK(corpus.frames[0].qas[5].question_id == "scene-0001/frame-a/planning/0");
    CHECK(corpus.frames[0].qas[5].kind == QuestionKind::kYesNo);
  }

  TEST_CASE("schema violations") {
    nlohmann::json qa = {{"perception", {{{"Q", "What?"}, {"A", "x"}}}}};
    nlohmann::json doc = one_frame(qa);
    CHECK_NOTHROW(parse_corpus(doc, Split::kTrain));

    auto missing_camera = doc;
    missing_camera["s1"]["key_frames"]["f1"]["image_paths"].erase("CAM_BACK");
    CHECK_THROWS_AS(parse_corpus(missing_camera, Split::kTrain), LoadError);

    auto bad_category = one_frame({{"weather", nlohmann::json::array()}});
    CHECK_THROWS_AS(parse_corpus(bad_category, Split::kTrain), LoadError);

    auto bad_box = one_frame(qa, {{"<c1,CAM_FRONT,10,10>", {{"2d_bbox", {20, 0, 10, 20}}}}});
    CHECK_THROWS_AS(parse_corpus(bad_box, Split::kTrain), LoadError);

    CHECK_THROWS_AS(parse_corpus(nlohmann::json::array(), Split::kTrain), LoadError);
  }

  TEST_CASE("bbox center mismatch is a warning") {
    nlohmann::json qa = {{"perception", {{{"Q", "What is <c1,CAM_FRONT,10,10>? Is <c9,CAM_BACK,5,5> near?"}}}}};
    auto doc = one_frame(qa, {{"<c1,CAM_FRONT,10,10>", {{"2d_bbox", {0, 0, 30, 30}}}}});
    const Corpus corpus = parse_corpus(doc, Split::kTrain);
    REQUIRE(corpus.warnings.size() == 1);
    const auto resolution = resolve_tags(corpus);
    CHECK(resolution.resolved.size() == 1);
    REQUIRE(resolution.unresolved.size() == 1);
    CHECK(resolution.unresolved[0].tag.object_id == "c9");
  }
}
