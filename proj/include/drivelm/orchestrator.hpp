#pragma once

#include <cstddef>
#include <filesystem>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "drivelm/backend.hpp"
#include "drivelm/dataset.hpp"
#include "drivelm/depth.hpp"
#include "drivelm/prompting.hpp"

namespace drivelm {

struct InferenceConfig {
  std::string system_id = "system";
  int max_new_tokens = 512;
  double temperature = 0.0;
  std::size_t concurrency = 4;
  RetryPolicy retry;
  PromptOptions prompt;
  // Stage-1 description queries run without chain-of-thought by default.
  PromptOptions stage1_prompt;
  std::filesystem::path images_root;
  // Runs whose failed fraction exceeds this are reported as failed.
  double max_error_fraction = 0.05;
};

struct Answer {
  std::string question_id;
  std::string system_id;
  std::string scene_id;
  std::string frame_id;
  QuestionKind kind = QuestionKind::kOpen;
  std::string text;
  std::optional<std::string> stage1_desc_state;
  double latency_ms = 0.0;
  // Set when the backend failed for good; text is then empty.
  std::optional<std::string> error;
  // Subjects whose description was left out of the prompt.
  std::vector<std::string> omitted;
  // Prompt sent in this process; absent for answers read back from disk.
  std::optional<PromptBundle> prompt;
};

struct SystemRun {
  std::string system_id;
  std::map<std::string, Answer> answers;
  nlohmann::json config_snapshot = nlohmann::json::object();
};

/// Stage-1 results per (frame_id, object_id, system_id). Concurrent requests
/// for the same key share one backend call; failures are cached as absent.
class DescriptionCache {
 public:
  using Key = std::tuple<std::string, std::string, std::string>;

  template <typename Compute>
  std::optional<std::string> get_or_compute(const Key& key, Compute&& compute) {
    std::shared_future<std::optional<std::string>> future;
    std::promise<std::optional<std::string>> promise;
    bool owner = false;
    {
      std::lock_guard lock(mutex_);
      auto it = entries_.find(key);
      if (it == entries_.end()) {
        future = promise.get_future().share();
        entries_.emplace(key, future);
        owner = true;
      } else {
        future = it->second;
      }
    }
    if (owner) {
      try {
        promise.set_value(compute());
      } catch (...) {
        promise.set_value(std::nullopt);
      }
    }
    return future.get();
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
  }

 private:
  mutable std::mutex mutex_;
  std::map<Key, std::shared_future<std::optional<std::string>>> entries_;
};

/// One stage-1 call per distinct resolved subject, asking the model to
/// describe the object in its own camera image. Objects whose call failed are
/// listed in `unavailable` and left out of the result.
DescriptionSource describe_key_objects(const Frame& frame, const std::vector<KeyObjectTag>& subjects,
                                       VlmBackend& backend, const InferenceConfig& config,
                                       DescriptionCache& cache,
                                       std::vector<std::string>* unavailable = nullptr);

/// extract tags -> stage-1 descriptions -> depth -> image -> prompt -> call.
/// Backend failure after retries yields an Answer with `error` set.
Answer answer_question(const Frame& frame, const QaPair& qa, VlmBackend& backend,
                       const DepthIndex& depth_index, const InferenceConfig& config,
                       DescriptionCache& cache);

struct InferenceReport {
  std::size_t questions = 0;
  std::size_t resumed = 0;
  std::size_t answered = 0;
  std::size_t errors = 0;
  std::size_t max_in_flight = 0;
  std::vector<std::string> omissions;

  double error_fraction() const {
    return questions == 0 ? 0.0 : static_cast<double>(errors) / static_cast<double>(questions);
  }
};

/// Answers every question of the corpus with at most `concurrency` requests
/// in flight. Answers are appended to `predictions_path` as they complete;
/// entries already present there (without error) are reused. The file is
/// rewritten sorted by question_id when the run ends.
SystemRun run_inference(const Corpus& corpus, VlmBackend& backend, const DepthIndex& depth_index,
                        const InferenceConfig& config,
                        const std::filesystem::path& predictions_path = {},
                        InferenceReport* report = nullptr);

/// Predictions line: {question_id, scene_id, frame_id, system_id, kind,
/// answer, stage1} plus "error" for failed questions.
nlohmann::json answer_to_json(const Answer& answer);
Answer answer_from_json(const nlohmann::json& line);

void write_predictions(const SystemRun& run, const std::filesystem::path& path);
SystemRun read_predictions(const std::filesystem::path& path);

}  // namespace drivelm
