#pragma once

#include <string>
#include <vector>

#include "drivelm/dataset.hpp"

namespace drivelm {

struct AugmentedQa {
  QaPair qa;
  std::string source_object_id;
};

/// Question asking a model to describe one key object and its state.
std::string keyobj_question(const KeyObjectTag& tag);

/// Reference description of one key object built from corpus metadata:
/// "<TAG> is <description>. It is <status>." Empty when either field is empty.
std::string keyobj_answer(const KeyObjectInfo& info);

/// One perception QA per key object with a description and a status, in
/// object id order. Question ids are "<scene>/<frame>/perception/keyobj-<id>".
std::vector<AugmentedQa> generate_keyobj_qas(const Frame& frame);

/// JSON Lines record in the corpus QA schema plus source_object_id.
nlohmann::json augmented_qa_to_json(const AugmentedQa& augmented);

/// Copy of the corpus with every frame's augmented QAs appended to its
/// perception list.
Corpus merge_augmented(const Corpus& corpus);

}  // namespace drivelm
