#include <doctest.h>

#include "drivelm/augment.hpp"
#include "../support/fixtures.hpp"

using namespace drivelm;

TEST_SUITE("augment") {
  TEST_CASE("question template") {
    const KeyObjectTag tag{"c4", Camera::kFront, 920.8, 383.3};
    CHECK(keyobj_question(tag) ==
          "The width and height of the image are 1600 and 900 respectively. <c4,CAM_FRONT,920.8,383.3> "
          "represents the key object that the center coordinates of the bounding box in the CAM_FRONT image "
          "are (920.8,383.3). What is the object <c4,CAM_FRONT,920.8,383.3>? What is the state of it?");
    const auto tags = extract_tags(keyobj_question(tag));
    REQUIRE(tags.size() == 2);
    CHECK(tags[0] == tag);
    CHECK(tags[1] == tag);
  }

  TEST_CASE("answer template") {
    KeyObjectInfo info;
    info.tag = {"c2", Camera::kBack, 10.0, 20.0};
    info.visual_description = "White truck.";
    info.status = "Moving";
    CHECK(keyobj_answer(info) == "<c2,CAM_BACK,10.0,20.0> is white truck. It is moving.");
    info.visual_description = "SUV parked by the curb.";
    CHECK(keyobj_answer(info) == "<c2,CAM_BACK,10.0,20.0> is SUV parked by the curb. It is moving.");
    info.status = "";
    CHECK(keyobj_answer(info).empty());
  }

  TEST_CASE("generation and merge on the fixture") {
    const Corpus corpus = load_corpus(fixtures::mini_dir() / "dataset.json", Split::kTrain);
    const auto generated = generate_keyobj_qas(corpus.frames[0]);
    REQUIRE(generated.size() == 3);
    CHECK(generated[0].qa.question_id == "scene-0001/frame-a/perception/keyobj-c1");
    CHECK(generated[0].qa.kind == QuestionKind::kOpen);
    CHECK(*generated[0].qa.answer == "<c1,CAM_FRONT,800.0,380.0> is white sedan. It is moving.");
    const auto line = augmented_qa_to_json(generated[0]);
    CHECK(line["source_object_id"] == "c1");
    CHECK(line["Q"] == generated[0].qa.question);

    const Corpus merged = merge_augmented(corpus);
    CHECK(merged.question_count() == corpus.question_count() + 5);
    CHECK(merged.frames[0].qas[3].question_id == "scene-0001/frame-a/perception/keyobj-c1");
  }
}
