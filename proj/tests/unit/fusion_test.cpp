#include <doctest.h>

#include "drivelm/fusion.hpp"
#include "../support/oracles.hpp"

using namespace drivelm;

namespace {

Answer make_answer(const std::string& id, const std::string& system, QuestionKind kind, const std::string& text) {
  Answer a;
  a.question_id = id;
  a.system_id = system;
  a.kind = kind;
  a.text = text;
  return a;
}

SystemRun make_run(const std::string& system, const std::vector<std::tuple<std::string, QuestionKind, std::string>>& rows) {
  SystemRun run;
  run.system_id = system;
  for (const auto& [id, kind, text] : rows) run.answers.emplace(id, make_answer(id, system, kind, text));
  return run;
}

const std::vector<std::string> kPriority = {"a", "b", "c"};

}  // namespace

TEST_SUITE("fusion") {
  TEST_CASE("vote: unanimity and majority") {
    CHECK(vote({{"a", "A"}, {"b", "A."}, {"c", "a"}}, kPriority) == "A");
    CHECK(vote({{"a", "Yes."}, {"b", "No."}, {"c", "no"}}, kPriority) == "No.");
    CHECK(vote({{"a", "B. Slow down."}, {"b", "B"}, {"c", "C"}}, kPriority) == "B. Slow down.");
  }

  TEST_CASE("vote: ties go to the highest-priority system") {
    const auto choice = vote_choice({{"c", "A"}, {"b", "B"}, {"a", "C"}}, kPriority);
    CHECK(choice.text == "C");
    CHECK(choice.system_id == "a");
    CHECK(choice.tie);
    CHECK(vote({{"c", "A"}, {"b", "B"}}, kPriority) == "B");
    CHECK(vote({{"c", "A"}, {"b", "B"}}, {"c", "b"}) == "A");
  }

  TEST_CASE("metric_argmax picks the higher ROUGE-L") {
    const std::string reference = "the car turns left at the light";
    const std::string weak = "the car stops";
    const std::string strong = "the car turns left now";
    const double weak_score = oracle::rouge_l(tokenize(weak), {tokenize(reference)});
    const double strong_score = oracle::rouge_l(tokenize(strong), {tokenize(reference)});
    REQUIRE(strong_score > weak_score);
    CHECK(sentence_score(SentenceMetric::kRougeL, weak, reference) == doctest::Approx(weak_score));
    CHECK(metric_argmax({{"a", weak}, {"b", strong}}, reference, SentenceMetric::kRougeL, kPriority) == strong);
    CHECK(metric_argmax({{"a", strong}, {"b", reference}, {"c", weak}}, reference, SentenceMetric::kRougeL,
                        kPriority) == reference);
    const auto tie = metric_argmax_choice({{"c", "x y"}, {"b", "x y"}}, "x y", SentenceMetric::kRougeL, kPriority);
    CHECK(tie.system_id == "b");
    CHECK(tie.tie);
  }

  TEST_CASE("strategy names") {
    CHECK(parse_fusion_strategy("vote").type == FusionStrategy::Type::kVote);
    const auto argmax = parse_fusion_strategy("metric_argmax:bleu_4");
    CHECK(argmax.type == FusionStrategy::Type::kMetricArgmax);
    CHECK(argmax.metric == SentenceMetric::kBleu4);
    CHECK(parse_fusion_strategy("metric_argmax").metric == SentenceMetric::kRougeL);
    CHECK(parse_fusion_strategy("fixed_system:b").system_id == "b");
    for (const char* text : {"vote", "metric_argmax:rouge_l", "fixed_system:b"}) {
      CHECK(format_fusion_strategy(parse_fusion_strategy(text)) == text);
    }
    CHECK_THROWS(parse_fusion_strategy("majority"));
    CHECK_THROWS(parse_fusion_strategy("metric_argmax:meteor"));
    CHECK_THROWS(parse_fusion_strategy("fixed_system:"));
  }

  TEST_CASE("policy validation") {
    auto policy = FusionPolicy::defaults(kPriority);
    CHECK_NOTHROW(policy.validate({"a", "b"}));
    CHECK_THROWS(policy.validate({"a", "z"}));
    policy.routing.erase(QuestionKind::kOpen);
    CHECK_THROWS(policy.validate({"a"}));
  }

  TEST_CASE("fuse routes by kind and reports") {
    using K = QuestionKind;
    const std::vector<SystemRun> runs = {
        make_run("a", {{"q1", K::kMultipleChoice, "A"}, {"q2", K::kYesNo, "Yes."}, {"q3", K::kOpen, "the car stops"}}),
        make_run("b", {{"q1", K::kMultipleChoice, "B"}, {"q2", K::kYesNo, "No."}, {"q3", K::kOpen, "the car turns left"}}),
        make_run("c", {{"q1", K::kMultipleChoice, "B"}, {"q2", K::kYesNo, "No."}, {"q4", K::kOpen, "lonely"}}),
    };
    const std::map<std::string, std::string> refs = {{"q3", "the car turns left at the light"}};
    FusionReport report;
    const SystemRun fused = fuse(runs, &refs, FusionPolicy::defaults(kPriority), &report);
    CHECK(fused.system_id == "fusion");
    CHECK(fused.answers.at("q1").text == "B");
    CHECK(fused.answers.at("q2").text == "No.");
    CHECK(fused.answers.at("q3").text == "the car turns left");
    CHECK(fused.answers.at("q4").text == "lonely");
    CHECK(report.chosen_system.at("q3") == "b");
    CHECK(report.incomplete == std::vector<std::string>{"q3", "q4"});
    CHECK(report.fallbacks == std::vector<std::string>{"q4"});
    CHECK(report.per_kind.at(K::kOpen).questions == 2);
    const auto json = fusion_report_to_json(report);
    CHECK(json.at("fallbacks").size() == 1);
  }

  TEST_CASE("open questions without references fall back to the top system") {
    using K = QuestionKind;
    const std::vector<SystemRun> runs = {make_run("b", {{"q", K::kOpen, "from b"}}),
                                         make_run("a", {{"q", K::kOpen, "from a"}})};
    const SystemRun fused = fuse(runs, nullptr, FusionPolicy::defaults(kPriority));
    CHECK(fused.answers.at("q").text == "from a");
  }

  TEST_CASE("fixed_system and errored answers") {
    using K = QuestionKind;
    std::vector<SystemRun> runs = {make_run("a", {{"q", K::kOpen, "from a"}}),
                                   make_run("b", {{"q", K::kOpen, "from b"}})};
    auto policy = FusionPolicy::defaults(kPriority);
    policy.routing[K::kOpen] = FusionStrategy::fixed("b");
    CHECK(fuse(runs, nullptr, policy).answers.at("q").text == "from b");
    runs[1].answers.at("q").error = "timeout";
    runs[1].answers.at("q").text.clear();
    CHECK(fuse(runs, nullptr, policy).answers.at("q").text == "from a");
    runs[0].answers.at("q").error = "timeout";
    FusionReport report;
    CHECK(fuse(runs, nullptr, policy, &report).answers.empty());
    CHECK(report.missing == std::vector<std::string>{"q"});
  }
}
