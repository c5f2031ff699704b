#include <doctest.h>

#include <atomic>
#include <mutex>
#include <set>
#include <thread>

#include "drivelm/orchestrator.hpp"
#include "../support/fixtures.hpp"

using namespace drivelm;

namespace {

bool is_stage1(const BackendRequest& request) {
  return request.prompt.find("represents the key object") != std::string::npos;
}

// Records every call; optional failure injection per prompt.
class MockBackend : public VlmBackend {
 public:
  std::function<void(const BackendRequest&, int attempt)> before;
  std::chrono::milliseconds delay{0};

  BackendResponse generate(const BackendRequest& request) override {
    const std::size_t now = ++in_flight_;
    std::size_t seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {
    }
    struct Leave {
      std::atomic<std::size_t>& n;
      ~Leave() { --n; }
    } leave{in_flight_};
    int attempt = 0;
    {
      std::lock_guard lock(mutex_);
      attempt = ++attempts_[request.prompt];
      (is_stage1(request) ? stage1_calls : answer_calls) += 1;
    }
    if (delay.count() > 0) std::this_thread::sleep_for(delay);
    if (before) before(request, attempt);
    return {is_stage1(request) ? "It is a thing." : "answer to " + request.prompt.substr(request.prompt.size() - 30),
            "mock"};
  }

  std::atomic<std::size_t> peak{0};
  std::size_t stage1_calls = 0;
  std::size_t answer_calls = 0;

 private:
  std::mutex mutex_;
  std::map<std::string, int> attempts_;
  std::atomic<std::size_t> in_flight_{0};
};

Corpus mini() { return load_corpus(fixtures::mini_dir() / "dataset.json", Split::kValidation); }

InferenceConfig fast_config(std::size_t concurrency) {
  InferenceConfig config;
  config.system_id = "mock";
  config.concurrency = concurrency;
  config.retry = {3, std::chrono::milliseconds(1), 2.0};
  return config;
}

std::size_t distinct_subjects(const Corpus& corpus) {
  std::set<std::pair<std::string, std::string>> keys;
  for (const auto& frame : corpus.frames) {
    for (const auto& qa : frame.qas) {
      const auto tags = extract_tags(qa.question);
      for (const auto& subject : prompt_subjects(frame, tags, choose_image(tags, detect_direction(qa.question)))) {
        if (frame.find_object(subject.object_id)) keys.emplace(frame.frame_id, subject.object_id);
      }
    }
  }
  return keys.size();
}

}  // namespace

TEST_SUITE("orchestrator") {
  TEST_CASE("bounded concurrency") {
    const Corpus corpus = mini();
    MockBackend backend;
    backend.delay = std::chrono::milliseconds(5);
    InferenceReport report;
    const auto run = run_inference(corpus, backend, DepthIndex{}, fast_config(3), {}, &report);
    CHECK(run.answers.size() == corpus.question_count());
    CHECK(backend.peak <= 3);
    CHECK(backend.peak >= 2);
    CHECK(report.max_in_flight == backend.peak);
    CHECK(report.answered == corpus.question_count());
    CHECK(report.errors == 0);
  }

  TEST_CASE("one stage-1 call per distinct subject") {
    const Corpus corpus = mini();
    MockBackend backend;
    backend.delay = std::chrono::milliseconds(2);
    run_inference(corpus, backend, DepthIndex{}, fast_config(4));
    CHECK(backend.stage1_calls == distinct_subjects(corpus));
    CHECK(backend.answer_calls == corpus.question_count());
  }

  TEST_CASE("description cache shares concurrent computations") {
    DescriptionCache cache;
    std::atomic<int> computed{0};
    std::vector<std::jthread> threads;
    for (int i = 0; i < 8; ++i) {
      threads.emplace_back([&] {
        auto value = cache.get_or_compute({"f", "c1", "s"}, [&]() -> std::optional<std::string> {
          ++computed;
          std::this_thread::sleep_for(std::chrono::milliseconds(10));
          return "desc";
        });
        CHECK(value == "desc");
      });
    }
    threads.clear();
    CHECK(computed == 1);
    CHECK(cache.size() == 1);
    auto failed = cache.get_or_compute({"f", "c2", "s"}, []() -> std::optional<std::string> { throw Error("x"); });
    CHECK_FALSE(failed.has_value());
  }

  TEST_CASE("transient failures are retried") {
    const Corpus corpus = mini();
    MockBackend backend;
    backend.before = [](const BackendRequest&, int attempt) {
      if (attempt == 1) throw BackendError("busy", 503, true);
    };
    InferenceReport report;
    run_inference(corpus, backend, DepthIndex{}, fast_config(2), {}, &report);
    CHECK(report.errors == 0);
    CHECK(backend.answer_calls == 2 * corpus.question_count());
  }

  TEST_CASE("permanent failures become error answers") {
    const Corpus corpus = mini();
    MockBackend backend;
    backend.before = [](const BackendRequest& request, int) {
      if (request.prompt.find("grey truck centered") != std::string::npos) throw BackendError("bad", 400, false);
    };
    InferenceReport report;
    const auto run = run_inference(corpus, backend, DepthIndex{}, fast_config(2), {}, &report);
    CHECK(report.errors == 1);
    CHECK(report.error_fraction() == doctest::Approx(1.0 / 14.0));
    const Answer& failed = run.answers.at("scene-0001/frame-b/planning/2");
    REQUIRE(failed.error.has_value());
    CHECK(failed.text.empty());
  }

  TEST_CASE("stage-1 failure omits the description but still answers") {
    const Corpus corpus = mini();
    MockBackend backend;
    backend.before = [](const BackendRequest& request, int) {
      if (is_stage1(request) && request.prompt.find("<c3,") != std::string::npos) throw BackendError("no", 400, false);
    };
    InferenceReport report;
    const auto run = run_inference(corpus, backend, DepthIndex{}, fast_config(2), {}, &report);
    CHECK(report.errors == 0);
    CHECK_FALSE(report.omissions.empty());
    const Answer& answer = run.answers.at("scene-0001/frame-a/perception/0");
    CHECK(answer.omitted == std::vector<std::string>{"c3"});
  }

  TEST_CASE("predictions file resume") {
    fixtures::TempDir dir("resume");
    const auto path = dir / "predictions.jsonl";
    const Corpus corpus = mini();
    {
      MockBackend backend;
      backend.before = [](const BackendRequest& request, int) {
        if (request.prompt.find("grey truck centered") != std::string::npos) throw BackendError("bad", 400, false);
      };
      run_inference(corpus, backend, DepthIndex{}, fast_config(2), path);
    }
    const std::string first = fixtures::read_file(path);
    CHECK(first.find("\"error\"") != std::string::npos);

    MockBackend backend;
    InferenceReport report;
    run_inference(corpus, backend, DepthIndex{}, fast_config(2), path, &report);
    CHECK(report.resumed == corpus.question_count() - 1);
    CHECK(report.answered == 1);
    CHECK(backend.answer_calls == 1);

    const SystemRun reread = read_predictions(path);
    CHECK(reread.answers.size() == corpus.question_count());
    CHECK(reread.system_id == "mock");
    std::string previous;
    std::ifstream in(path);
    for (std::string line; std::getline(in, line);) {
      const std::string id = nlohmann::json::parse(line)["question_id"];
      CHECK(previous < id);
      previous = id;
    }
  }

  TEST_CASE("torn trailing line is ignored on resume") {
    fixtures::TempDir dir("torn");
    const auto path = dir / "predictions.jsonl";
    std::ofstream(path) << R"({"question_id":"scene-0001/frame-a/behavior/0","system_id":"mock","kind":"multiple_choice","answer":"B","stage1":null})"
                        << "\n{\"question_id\":\"trunc";
    MockBackend backend;
    InferenceReport report;
    run_inference(mini(), backend, DepthIndex{}, fast_config(1), path, &report);
    CHECK(report.resumed == 1);
    CHECK(read_predictions(path).answers.size() == 14);
  }

  TEST_CASE("answer json round trip") {
    Answer answer;
    answer.question_id = "s/f/planning/0";
    answer.system_id = "x";
    answer.kind = QuestionKind::kYesNo;
    answer.text = "Yes.";
    answer.stage1_desc_state = "D.";
    const Answer back = answer_from_json(answer_to_json(answer));
    CHECK(back.question_id == answer.question_id);
    CHECK(back.kind == QuestionKind::kYesNo);
    CHECK(back.stage1_desc_state == "D.");
    CHECK_FALSE(back.error.has_value());
  }
}
