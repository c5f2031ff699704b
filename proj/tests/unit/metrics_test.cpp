#include <doctest.h>

#include <cmath>
#include <random>

#include "drivelm/metrics.hpp"
#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"

using namespace drivelm;

namespace {

SystemRun identity_run(const Corpus& corpus) {
  SystemRun run;
  run.system_id = "identity";
  for (const auto& frame : corpus.frames) {
    for (const auto& qa : frame.qas) {
      Answer answer;
      answer.question_id = qa.question_id;
      answer.system_id = run.system_id;
      answer.kind = qa.kind;
      answer.text = *qa.answer;
      run.answers.emplace(qa.question_id, answer);
    }
  }
  return run;
}

ScoreWeights uniform_weights() {
  ScoreWeights weights;
  for (const char* name : kScoreComponents) weights.weights[name] = 1.0 / 9.0;
  return weights;
}

// pycocoevalcap-style CIDEr-D written out directly from the definition.
double cider_oracle(const std::vector<std::string>& cands, const std::vector<std::string>& refs) {
  using Vec = std::map<std::string, double>;
  const std::size_t n_docs = refs.size();
  auto grams = [](const oracle::Tokens& t, std::size_t n) {
    std::map<std::string, double> out;
    for (std::size_t i = 0; i + n <= t.size(); ++i) {
      std::string key;
      for (std::size_t k = 0; k < n; ++k) key += t[i + k] + "\x1f";
      out[key] += 1;
    }
    return out;
  };
  std::map<std::string, double> df;
  for (const auto& r : refs) {
    for (std::size_t n = 1; n <= 4; ++n) {
      for (const auto& [g, c] : grams(tokenize(r), n)) df[g] += 1;
    }
  }
  double total = 0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const auto ct = tokenize(cands[i]);
    const auto rt = tokenize(refs[i]);
    double score = 0;
    double c_len = 0, r_len = 0;
    for (const auto& [g, c] : grams(ct, 2)) c_len += c;
    for (const auto& [g, c] : grams(rt, 2)) r_len += c;
    for (std::size_t n = 1; n <= 4; ++n) {
      Vec cv, rv;
      for (const auto& [g, c] : grams(ct, n)) cv[g] = c * (std::log(double(n_docs)) - std::log(std::max(1.0, df[g])));
      for (const auto& [g, c] : grams(rt, n)) rv[g] = c * (std::log(double(n_docs)) - std::log(std::max(1.0, df[g])));
      double dot = 0, nc = 0, nr = 0;
      for (const auto& [g, w] : cv) {
        nc += w * w;
        if (rv.count(g)) dot += std::min(w, rv[g]) * rv[g];
      }
      for (const auto& [g, w] : rv) nr += w * w;
      double val = (nc > 0 && nr > 0) ? dot / (std::sqrt(nc) * std::sqrt(nr)) : dot;
      val *= std::exp(-((c_len - r_len) * (c_len - r_len)) / (2 * 36.0));
      score += val;
    }
    total += score / 4.0 * 10.0;
  }
  return total / static_cast<double>(cands.size());
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("hand-computed BLEU") {
    CHECK(bleu_n("the cat", {"the cat sat"}, 1) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
    CHECK(bleu_n("the cat sat", {"the cat sat"}, 4) == doctest::Approx(1.0));
    CHECK(bleu_n("dog", {"the cat sat"}, 1) == 0.0);
    // Clipping: "the the the" vs "the cat" -> precision 1/3, BP = 1.
    CHECK(bleu_n("the the the", {"the cat"}, 1) == doctest::Approx(1.0 / 3.0));
    CHECK(bleu_n("", {"the"}, 1) == 0.0);
  }

  TEST_CASE("hand-computed ROUGE-L") {
    // LCS 2, P 2/3, R 1, beta 1.2.
    const double expected = (1 + 1.44) * (2.0 / 3.0) / (1 + 1.44 * 2.0 / 3.0);
    CHECK(rouge_l("a b c", {"a c"}) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(rouge_l("a b c", {"a c"}) == doctest::Approx(0.829932).epsilon(1e-6));
    CHECK(rouge_l("x", {"a c"}) == 0.0);
    CHECK(rouge_l("a c", {"z", "a c"}) == doctest::Approx(1.0));
    CHECK(lcs_length({"a", "b", "c", "d"}, {"b", "d"}) == 2);
  }

  TEST_CASE("random strings agree with the brute-force oracle") {
    std::mt19937 rng(5);
    const std::vector<std::string> vocab = {"a", "b", "c", "d", "e"};
    auto sentence = [&] {
      oracle::Tokens t(rng() % 7);
      for (auto& w : t) w = vocab[rng() % vocab.size()];
      return t;
    };
    for (int i = 0; i < 400; ++i) {
      const auto c = sentence();
      const std::vector<oracle::Tokens> refs = {sentence(), sentence()};
      if (refs[0].empty() || refs[1].empty()) continue;
      for (int n = 1; n <= 4; ++n) CHECK(bleu(c, refs, n) == doctest::Approx(oracle::bleu(c, refs, n)).epsilon(1e-12));
      CHECK(rouge_l(c, refs) == doctest::Approx(oracle::rouge_l(c, refs)).epsilon(1e-12));
      CHECK(lcs_length(c, refs[0]) == oracle::lcs(c, refs[0]));
    }
  }

  TEST_CASE("CIDEr-D against a direct implementation") {
    const std::vector<std::string> refs = {"a white car is parked near the curb", "the pedestrian waits at the crossing",
                                           "a truck turns left at the junction", "the cyclist rides in the bike lane"};
    const std::vector<std::string> cands = {"a white car parked at the curb", "the pedestrian is crossing",
                                            "a truck turns right", "cyclist in the lane"};
    std::vector<std::vector<std::string>> ref_lists;
    for (const auto& r : refs) ref_lists.push_back({r});
    CHECK(cider(cands, ref_lists) == doctest::Approx(cider_oracle(cands, refs)).epsilon(1e-12));
    CHECK(cider(refs, ref_lists) == doctest::Approx(10.0).epsilon(1e-9));
    CHECK_THROWS(cider({"a"}, {}));
  }

  TEST_CASE("match") {
    CHECK(*match_score("at (100.0,100.0)", "at (105.0,108.0)") == 100.0);
    CHECK(*match_score("(0,0)", "(20,0) and (5,5)") == 50.0);
    CHECK_FALSE(match_score("(1,1)", "no pairs here").has_value());
    CHECK(extract_coordinate_pairs("<c1,CAM_FRONT,1,2> at (3.5, 4)").size() == 1);
  }

  TEST_CASE("accuracy ignores open questions") {
    const std::vector<ScoredAnswer> answers = {{"A", "A. Left.", QuestionKind::kMultipleChoice},
                                               {"yes", "Yes.", QuestionKind::kYesNo},
                                               {"B", "C", QuestionKind::kMultipleChoice},
                                               {"x", "y", QuestionKind::kOpen}};
    CHECK(*accuracy(answers) == doctest::Approx(2.0 / 3.0));
    CHECK_FALSE(accuracy({{"x", "y", QuestionKind::kOpen}}).has_value());
  }

  TEST_CASE("identity corpus reaches every maximum") {
    const Corpus corpus = load_corpus(fixtures::mini_dir() / "dataset.json", Split::kValidation);
    StubJudge judge(100.0);
    MetricConfig config;
    config.weights = uniform_weights();
    const MetricReport report = score_run(corpus, identity_run(corpus), config, &judge);
    CHECK(*report.accuracy == 1.0);
    for (const auto& b : report.bleu) CHECK(*b == doctest::Approx(1.0));
    CHECK(*report.rouge_l == doctest::Approx(1.0));
    CHECK(*report.cider == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(*report.match == 100.0);
    CHECK(*report.chatgpt == 100.0);
    CHECK(report.chatgpt_synthetic);
    CHECK(*report.final_score == doctest::Approx(1.0));
    CHECK(report.missing_predictions == 0);
  }

  TEST_CASE("missing predictions and unknown ids") {
    const Corpus corpus = load_corpus(fixtures::mini_dir() / "dataset.json", Split::kValidation);
    SystemRun run = identity_run(corpus);
    run.answers.erase("scene-0001/frame-a/behavior/0");
    run.answers["elsewhere/x/planning/0"] = Answer{};
    const MetricReport report = score_run(corpus, run, MetricConfig{});
    CHECK(report.missing_predictions == 1);
    CHECK(report.unknown_predictions == 1);
    CHECK(*report.accuracy == doctest::Approx(5.0 / 6.0));
    CHECK_FALSE(report.final_score.has_value());
  }

  TEST_CASE("weights") {
    ScoreWeights bad;
    bad.weights = {{"accuracy", 0.5}, {"bleu_1", 0.4}};
    CHECK_THROWS(bad.validate());
    bad.weights = {{"accuracy", 0.5}, {"typo", 0.5}};
    CHECK_THROWS(bad.validate());

    MetricReport report;
    report.accuracy = 0.5;
    report.cider = 5.0;
    report.match = 50.0;
    ScoreWeights weights;
    weights.weights = {{"accuracy", 0.5}, {"cider", 0.25}, {"match", 0.25}};
    CHECK(final_score(report, weights) == doctest::Approx(0.5));
    weights.weights = {{"accuracy", 0.5}, {"chatgpt", 0.5}};
    CHECK_THROWS(final_score(report, weights));
    weights.renormalize_missing = true;
    CHECK(final_score(report, weights) == doctest::Approx(0.5));
  }

  TEST_CASE("judge failure renormalizes") {
    class FailingJudge : public JudgeClient {
     public:
      double judge(const std::string&, const std::string&, const std::string&) override { throw Error("down"); }
    } judge;
    const Corpus corpus = load_corpus(fixtures::mini_dir() / "dataset.json", Split::kValidation);
    MetricConfig config;
    config.weights = uniform_weights();
    const MetricReport report = score_run(corpus, identity_run(corpus), config, &judge);
    CHECK_FALSE(report.chatgpt.has_value());
    CHECK(report.renormalized);
    CHECK(*report.final_score == doctest::Approx(1.0));
    CHECK_FALSE(report.notes.empty());
  }

  TEST_CASE("judge receives one triple per open question") {
    class CountingJudge : public JudgeClient {
     public:
      int calls = 0;
      double judge(const std::string&, const std::string&, const std::string&) override {
        ++calls;
        return 50.0;
      }
    } judge;
    const Corpus corpus = load_corpus(fixtures::mini_dir() / "dataset.json", Split::kValidation);
    score_run(corpus, identity_run(corpus), MetricConfig{}, &judge);
    CHECK(judge.calls == 8);
    std::vector<JudgeTriple> none;
    CHECK_FALSE(judge_score(none, judge).score.has_value());
  }

  TEST_CASE("report serialization and table") {
    const Corpus corpus = load_corpus(fixtures::mini_dir() / "dataset.json", Split::kValidation);
    MetricConfig config;
    config.weights = uniform_weights();
    StubJudge judge(80.0);
    const MetricReport report = score_run(corpus, identity_run(corpus), config, &judge);
    const auto json = report_to_json(report, true);
    const MetricReport back = report_from_json(json);
    CHECK(report_to_json(back, true) == json);
    const std::string table = render_report_table({report});
    CHECK(table.find("Final Score") != std::string::npos);
    CHECK(table.find("identity") != std::string::npos);
    CHECK(table.find("80.0000*") != std::string::npos);

    fixtures::TempDir dir("csv");
    write_per_question_csv(report, dir / "q.csv");
    const std::string csv = fixtures::read_file(dir / "q.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 15);
  }
}
