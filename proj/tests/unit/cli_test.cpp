#include <doctest.h>

#include <sstream>

#include <nlohmann/json.hpp>

#include "drivelm/cli.hpp"
#include "drivelm/orchestrator.hpp"
#include "../support/fixtures.hpp"

using namespace drivelm;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

// Copies the mini fixture into a scratch directory.
struct Workspace {
  fixtures::TempDir dir{"cli"};
  fs::path config;

  Workspace() {
    fs::copy_file(fixtures::mini_dir() / "dataset.json", dir / "dataset.json");
    fs::copy_file(fixtures::mini_dir() / "pipeline.toml", dir / "pipeline.toml");
    config = dir / "pipeline.toml";
  }
  fs::path out(const std::string& name) const { return dir.path() / "out" / name; }
};

std::size_t file_count(const fs::path& root) {
  std::size_t n = 0;
  for (const auto& entry : fs::recursive_directory_iterator(root)) n += entry.is_regular_file();
  return n;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage and config errors exit with 2") {
    CHECK(run({}).code == kExitConfig);
    CHECK(run({"frobnicate"}).code == kExitConfig);
    const Result missing = run({"ingest", "-c", "/nonexistent/pipeline.toml"});
    CHECK(missing.code == kExitConfig);
    const auto error = nlohmann::json::parse(missing.err);
    CHECK(error.at("error").at("type") == "config");

    Workspace ws;
    const Result bad = run({"ingest", "-c", ws.config.string(), "--set", "backend.concurrency=0"});
    CHECK(bad.code == kExitConfig);
    CHECK(nlohmann::json::parse(bad.err).at("error").at("field") == "backend.concurrency");
    CHECK(run({"score", "-c", ws.config.string()}).code == kExitConfig);
    CHECK(run({"fuse", "-c", ws.config.string(), "--runs", "x.jsonl"}).code == kExitConfig);
  }

  TEST_CASE("runtime errors exit with 1") {
    Workspace ws;
    { std::ofstream(ws.dir / "dataset.json", std::ios::trunc) << "{ not json"; }
    const Result r = run({"ingest", "-c", ws.config.string()});
    CHECK(r.code == kExitRuntime);
    CHECK(nlohmann::json::parse(r.err).at("error").at("type") == "runtime");
  }

  TEST_CASE("ingest writes stats") {
    Workspace ws;
    const Result r = run({"ingest", "-c", ws.config.string()});
    REQUIRE(r.code == kExitOk);
    CHECK(r.out.find("14 questions") != std::string::npos);
    const auto stats = nlohmann::json::parse(fixtures::read_file(ws.out("stats.json")));
    CHECK(stats.at("config").at("backend").at("system_id") == "stub-a");
  }

  TEST_CASE("dry run writes nothing") {
    Workspace ws;
    const std::size_t before = file_count(ws.dir.path());
    for (const std::vector<std::string>& args :
         {std::vector<std::string>{"ingest"}, {"augment"}, {"infer"}, {"export-train"}}) {
      std::vector<std::string> full = args;
      for (const char* a : {"--dry-run", "-c"}) full.push_back(a);
      full.push_back(ws.config.string());
      const Result r = run(full);
      CHECK(r.code == kExitOk);
      CHECK(r.out.find("dry run") != std::string::npos);
    }
    CHECK(file_count(ws.dir.path()) == before);
    CHECK_FALSE(fs::exists(ws.dir / "out"));
  }

  TEST_CASE("inference is reproducible byte for byte") {
    Workspace a, b;
    REQUIRE(run({"infer", "-c", a.config.string()}).code == kExitOk);
    REQUIRE(run({"infer", "-c", b.config.string()}).code == kExitOk);
    const std::string first = fixtures::read_file(a.out("predictions.stub-a.jsonl"));
    CHECK_FALSE(first.empty());
    CHECK(first == fixtures::read_file(b.out("predictions.stub-a.jsonl")));
    CHECK(fs::exists(a.out("predictions.stub-a.jsonl.config.json")));
    const Result again = run({"infer", "-c", a.config.string()});
    CHECK(again.out.find("14 resumed") != std::string::npos);
    CHECK(fixtures::read_file(a.out("predictions.stub-a.jsonl")) == first);
  }

  TEST_CASE("fuse, score and report") {
    Workspace ws;
    const std::string cfg = ws.config.string();
    std::vector<std::string> runs;
    for (const char* id : {"stub-a", "stub-b", "stub-c"}) {
      REQUIRE(run({"infer", "-c", cfg, "--system-id", id}).code == kExitOk);
      runs.push_back(ws.out(std::string("predictions.") + id + ".jsonl").string());
    }
    std::vector<std::string> fuse_args = {"fuse", "-c", cfg, "--references", "--runs"};
    fuse_args.insert(fuse_args.end(), runs.begin(), runs.end());
    REQUIRE(run(fuse_args).code == kExitOk);
    REQUIRE(fs::exists(ws.out("predictions.fusion.jsonl.fusion.json")));
    CHECK(read_predictions(ws.out("predictions.fusion.jsonl")).answers.size() == 14);

    const Result scored = run({"score", "-c", cfg, "--predictions", ws.out("predictions.fusion.jsonl").string(),
                               "--csv", ws.out("fusion.csv").string()});
    REQUIRE(scored.code == kExitOk);
    CHECK(fs::exists(ws.out("report.fusion.json")));
    CHECK(fs::exists(ws.out("fusion.csv")));

    const Result table = run({"report", "-c", cfg, "--reports", ws.out("report.fusion.json").string()});
    REQUIRE(table.code == kExitOk);
    CHECK(table.out.find("fusion") != std::string::npos);
  }

  TEST_CASE("references scored against themselves reach the maxima") {
    Workspace ws;
    const Corpus corpus = load_corpus(ws.dir / "dataset.json", Split::kValidation);
    SystemRun identity;
    identity.system_id = "identity";
    for (const auto& frame : corpus.frames) {
      for (const auto& qa : frame.qas) {
        Answer a;
        a.question_id = qa.question_id;
        a.system_id = identity.system_id;
        a.scene_id = frame.scene_id;
        a.frame_id = frame.frame_id;
        a.kind = qa.kind;
        a.text = *qa.answer;
        identity.answers.emplace(a.question_id, a);
      }
    }
    write_predictions(identity, ws.dir / "identity.jsonl");
    const Result r = run({"score", "-c", ws.config.string(), "--set", "metrics.judge_stub=100", "--predictions",
                          (ws.dir / "identity.jsonl").string()});
    REQUIRE(r.code == kExitOk);
    const auto report = nlohmann::json::parse(fixtures::read_file(ws.out("report.identity.json")));
    CHECK(report.at("accuracy").get<double>() == 1.0);
    CHECK(report.at("rouge_l").get<double>() == doctest::Approx(1.0));
    CHECK(report.at("cider").get<double>() == doctest::Approx(10.0));
    CHECK(report.at("final_score").get<double>() == doctest::Approx(1.0));
  }
}
