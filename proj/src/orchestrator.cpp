#include "drivelm/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <set>
#include <thread>

#include <spdlog/spdlog.h>

#include "drivelm/augment.hpp"

namespace drivelm {
namespace {

// Tracks the number of concurrent generate() calls going through it.
class InFlightGauge : public VlmBackend {
 public:
  explicit InFlightGauge(VlmBackend& inner) : inner_(inner) {}

  BackendResponse generate(const BackendRequest& request) override {
    const std::size_t now = ++in_flight_;
    std::size_t seen = peak_.load();
    while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
    }
    struct Release {
      std::atomic<std::size_t>& counter;
      ~Release() { --counter; }
    } release{in_flight_};
    return inner_.generate(request);
  }

  std::size_t peak() const { return peak_.load(); }

 private:
  VlmBackend& inner_;
  std::atomic<std::size_t> in_flight_{0};
  std::atomic<std::size_t> peak_{0};
};

BackendRequest make_request(const InferenceConfig& config, std::string prompt, std::string image_path) {
  BackendRequest request;
  request.prompt = std::move(prompt);
  request.image_path = std::move(image_path);
  request.max_new_tokens = config.max_new_tokens;
  request.temperature = config.temperature;
  request.system_id = config.system_id;
  return request;
}

std::map<std::string, Answer> read_resumable(const std::filesystem::path& path) {
  std::map<std::string, Answer> answers;
  if (path.empty() || !std::filesystem::exists(path)) return answers;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      Answer answer = answer_from_json(nlohmann::json::parse(line));
      if (!answer.error) answers.insert_or_assign(answer.question_id, std::move(answer));
    } catch (const std::exception& e) {
      // A run killed mid-write can leave a torn last line.
      spdlog::warn("ignoring unreadable predictions line in {}: {}", path.string(), e.what());
    }
  }
  return answers;
}

}  // namespace

DescriptionSource describe_key_objects(const Frame& frame, const std::vector<KeyObjectTag>& subjects,
                                       VlmBackend& backend, const InferenceConfig& config,
                                       DescriptionCache& cache, std::vector<std::string>* unavailable) {
  DescriptionSource out;
  std::set<std::string> seen;
  for (const auto& subject : subjects) {
    if (!seen.insert(subject.object_id).second) continue;
    const KeyObjectInfo* info = frame.find_object(subject.object_id);
    if (!info) continue;
    const DescriptionCache::Key key{frame.frame_id, info->tag.object_id, config.system_id};
    auto text = cache.get_or_compute(key, [&]() -> std::optional<std::string> {
      const std::string prompt = compose_prompt("", "", keyobj_question(info->tag), config.stage1_prompt);
      auto request = make_request(config, prompt,
                                  resolve_image_path(frame, info->tag.camera, config.images_root));
      try {
        return generate_with_retry(backend, request, config.retry).text;
      } catch (const Error& e) {
        spdlog::warn("stage-1 description failed for frame {} object {}: {}", frame.frame_id,
                     info->tag.object_id, e.what());
        return std::nullopt;
      }
    });
    if (text) {
      out.emplace(info->tag.object_id, std::move(*text));
    } else if (unavailable) {
      unavailable->push_back(info->tag.object_id);
    }
  }
  return out;
}

Answer answer_question(const Frame& frame, const QaPair& qa, VlmBackend& backend,
                       const DepthIndex& depth_index, const InferenceConfig& config,
                       DescriptionCache& cache) {
  const auto start = std::chrono::steady_clock::now();
  Answer answer;
  answer.question_id = qa.question_id;
  answer.system_id = config.system_id;
  answer.scene_id = frame.scene_id;
  answer.frame_id = frame.frame_id;
  answer.kind = qa.kind;

  const auto tags = extract_tags(qa.question);
  const ImageChoice choice = choose_image(tags, detect_direction(qa.question));
  const auto subjects = prompt_subjects(frame, tags, choice);
  const DescriptionSource descriptions = describe_key_objects(frame, subjects, backend, config, cache);

  PromptBundle bundle =
      build_prompt(frame, qa, descriptions, depth_index, config.prompt, config.images_root);
  answer.stage1_desc_state = bundle.parts.desc_state;
  answer.omitted = bundle.omitted;
  answer.prompt = bundle;

  try {
    answer.text =
        generate_with_retry(backend, make_request(config, bundle.prompt_text, bundle.image_path),
                            config.retry)
            .text;
    if (answer.text.empty()) spdlog::warn("{}: backend returned an empty answer", qa.question_id);
  } catch (const Error& e) {
    answer.error = e.what();
    spdlog::error("{}: {}", qa.question_id, e.what());
  }
  answer.latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return answer;
}

SystemRun run_inference(const Corpus& corpus, VlmBackend& backend, const DepthIndex& depth_index,
                        const InferenceConfig& config, const std::filesystem::path& predictions_path,
                        InferenceReport* report) {
  SystemRun run;
  run.system_id = config.system_id;
  InferenceReport local;
  local.questions = corpus.question_count();

  std::map<std::string, Answer> existing = read_resumable(predictions_path);
  std::vector<std::pair<const Frame*, const QaPair*>> work;
  for (const auto& frame : corpus.frames) {
    for (const auto& qa : frame.qas) {
      auto it = existing.find(qa.question_id);
      if (it != existing.end() && it->second.system_id == config.system_id) {
        run.answers.emplace(qa.question_id, it->second);
        ++local.resumed;
      } else {
        work.emplace_back(&frame, &qa);
      }
    }
  }

  std::ofstream stream;
  if (!predictions_path.empty()) {
    // Rewrite first so that a torn or foreign line from an earlier run is dropped.
    write_predictions(run, predictions_path);
    stream.open(predictions_path, std::ios::app);
    if (!stream) throw Error("cannot write predictions to " + predictions_path.string());
  }

  InFlightGauge gauge(backend);
  DescriptionCache cache;
  std::mutex writer_mutex;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < work.size(); i = next++) {
      const auto& [frame, qa] = work[i];
      Answer answer = answer_question(*frame, *qa, gauge, depth_index, config, cache);
      std::lock_guard lock(writer_mutex);
      if (stream.is_open()) {
        stream << answer_to_json(answer).dump() << "\n";
        stream.flush();
      }
      if (answer.error) ++local.errors;
      else ++local.answered;
      for (const auto& id : answer.omitted) {
        local.omissions.push_back(answer.question_id + ": no description for " + id);
      }
      run.answers.insert_or_assign(answer.question_id, std::move(answer));
    }
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(config.concurrency, work.size()));
  if (!work.empty()) {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  stream.close();
  std::sort(local.omissions.begin(), local.omissions.end());
  local.max_in_flight = gauge.peak();

  if (!predictions_path.empty()) write_predictions(run, predictions_path);
  if (report) *report = std::move(local);
  return run;
}

nlohmann::json answer_to_json(const Answer& answer) {
  nlohmann::json line = {{"question_id", answer.question_id},
                         {"scene_id", answer.scene_id},
                         {"frame_id", answer.frame_id},
                         {"system_id", answer.system_id},
                         {"kind", kind_name(answer.kind)},
                         {"answer", answer.text}};
  line["stage1"] = answer.stage1_desc_state ? nlohmann::json(*answer.stage1_desc_state)
                                            : nlohmann::json(nullptr);
  if (answer.error) line["error"] = *answer.error;
  return line;
}

Answer answer_from_json(const nlohmann::json& line) {
  Answer answer;
  answer.question_id = line.at("question_id").get<std::string>();
  answer.scene_id = line.value("scene_id", "");
  answer.frame_id = line.value("frame_id", "");
  answer.system_id = line.at("system_id").get<std::string>();
  const auto kind_text = line.value("kind", "open");
  auto kind = kind_from_name(kind_text);
  if (!kind) throw Error("unknown question kind '" + kind_text + "'");
  answer.kind = *kind;
  answer.text = line.at("answer").get<std::string>();
  if (line.contains("stage1") && line["stage1"].is_string()) {
    answer.stage1_desc_state = line["stage1"].get<std::string>();
  }
  if (line.contains("error") && line["error"].is_string()) answer.error = line["error"].get<std::string>();
  return answer;
}

void write_predictions(const SystemRun& run, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write predictions to " + path.string());
  for (const auto& [id, answer] : run.answers) out << answer_to_json(answer).dump() << "\n";
  if (!out) throw Error("failed writing predictions to " + path.string());
}

SystemRun read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open predictions file " + path.string());
  SystemRun run;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      Answer answer = answer_from_json(nlohmann::json::parse(line));
      if (run.system_id.empty()) run.system_id = answer.system_id;
      if (!run.answers.emplace(answer.question_id, std::move(answer)).second) {
        throw Error("duplicate question_id");
      }
    } catch (const std::exception& e) {
      throw Error("predictions file " + path.string() + " line " + std::to_string(number) + ": " +
                  e.what());
    }
  }
  return run;
}

}  // namespace drivelm
