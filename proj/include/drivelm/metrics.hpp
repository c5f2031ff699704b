#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "drivelm/dataset.hpp"
#include "drivelm/orchestrator.hpp"
#include "drivelm/text.hpp"

namespace drivelm {

using Tokens = std::vector<std::string>;

/// Sentence BLEU-n: geometric mean of clipped n-gram precisions times the
/// brevity penalty exp(1 - r/c) when c < r (r = closest reference length).
/// Candidates shorter than n use orders 1..|c|. Any zero precision gives 0.
double bleu(const Tokens& candidate, const std::vector<Tokens>& references, int n);
double bleu_n(std::string_view candidate, const std::vector<std::string>& references, int n);

std::size_t lcs_length(const Tokens& a, const Tokens& b);

/// LCS F-measure (1+b^2)PR / (R + b^2 P), maximum over references.
double rouge_l(const Tokens& candidate, const std::vector<Tokens>& references, double beta = 1.2);
double rouge_l(std::string_view candidate, const std::vector<std::string>& references,
               double beta = 1.2);

/// CIDEr-D over a corpus: TF-IDF n-gram vectors (n = 1..4) with document
/// frequencies from the references, clipped cosine similarity, gaussian
/// length penalty, x10. Returns per-question scores; the corpus score is
/// their mean.
class CiderScorer {
 public:
  explicit CiderScorer(double sigma = 6.0) : sigma_(sigma) {}

  void add(Tokens candidate, std::vector<Tokens> references);
  std::vector<double> compute() const;
  double corpus_score() const;
  std::size_t size() const { return candidates_.size(); }

 private:
  double sigma_;
  std::vector<Tokens> candidates_;
  std::vector<std::vector<Tokens>> references_;
};

double cider(const std::vector<std::string>& candidates,
             const std::vector<std::vector<std::string>>& references, double sigma = 6.0);

/// Every "(x,y)" number pair in a text.
std::vector<std::pair<double, double>> extract_coordinate_pairs(std::string_view text);

/// 100 x fraction of reference pairs with a predicted pair within
/// `threshold` pixels; absent when the reference has no pairs.
std::optional<double> match_score(std::string_view prediction, std::string_view reference,
                                  double threshold = 16.0);

bool answers_equal(std::string_view prediction, std::string_view reference,
                   const AnswerNormalization& rules = {});

struct ScoredAnswer {
  std::string prediction;
  std::string reference;
  QuestionKind kind = QuestionKind::kOpen;
};

/// Fraction correct over multiple_choice and yes_no answers; absent when
/// there are none.
std::optional<double> accuracy(const std::vector<ScoredAnswer>& answers,
                               const AnswerNormalization& rules = {});

/// Per-question metric used to pick among fused candidates.
enum class SentenceMetric { kRougeL, kBleu1, kBleu2, kBleu3, kBleu4 };
std::string_view sentence_metric_name(SentenceMetric metric);
std::optional<SentenceMetric> sentence_metric_from_name(std::string_view name);
double sentence_score(SentenceMetric metric, std::string_view candidate, std::string_view reference);

/// External 0..100 judgement of one answer.
class JudgeClient {
 public:
  virtual ~JudgeClient() = default;
  virtual double judge(const std::string& question, const std::string& reference,
                       const std::string& prediction) = 0;
  virtual bool synthetic() const { return false; }
};

class StubJudge : public JudgeClient {
 public:
  explicit StubJudge(double score) : score_(score) {}
  double judge(const std::string&, const std::string&, const std::string&) override { return score_; }
  bool synthetic() const override { return true; }

 private:
  double score_;
};

/// POST {base_url} {prompt} -> {score: 0..100}.
class HttpJudge : public JudgeClient {
 public:
  HttpJudge(std::string base_url, std::chrono::milliseconds timeout);
  double judge(const std::string& question, const std::string& reference,
               const std::string& prediction) override;

  static std::string judge_prompt(const std::string& question, const std::string& reference,
                                  const std::string& prediction);

 private:
  std::string base_url_;
  std::chrono::milliseconds timeout_;
};

struct JudgeTriple {
  std::string question;
  std::string reference;
  std::string prediction;
};

struct JudgeResult {
  std::optional<double> score;
  bool synthetic = false;
  std::optional<std::string> failure;
};

/// Mean judgement over the triples; absent for an empty corpus or when the
/// judge fails.
JudgeResult judge_score(const std::vector<JudgeTriple>& triples, JudgeClient& judge);

inline constexpr std::array<const char*, 9> kScoreComponents = {
    "accuracy", "chatgpt", "bleu_1", "bleu_2", "bleu_3", "bleu_4", "rouge_l", "cider", "match"};

struct ScoreWeights {
  std::map<std::string, double> weights;
  // Drop missing components and rescale the remaining weights to sum 1.
  bool renormalize_missing = false;

  /// Throws when a name is unknown, a weight negative, or the sum is not 1.
  void validate() const;
};

struct QuestionScore {
  std::string question_id;
  QuestionKind kind = QuestionKind::kOpen;
  bool has_prediction = false;
  std::optional<bool> correct;
  std::optional<double> bleu_4;
  std::optional<double> rouge_l;
  std::optional<double> cider;
  std::optional<double> match;
};

struct MetricReport {
  std::string system_id;
  std::optional<double> accuracy;
  std::optional<double> chatgpt;
  bool chatgpt_synthetic = false;
  std::array<std::optional<double>, 4> bleu;
  std::optional<double> rouge_l;
  std::optional<double> cider;
  std::optional<double> match;
  std::optional<double> final_score;
  bool renormalized = false;
  std::size_t questions = 0;
  std::size_t missing_predictions = 0;
  std::size_t unknown_predictions = 0;
  std::map<std::string, std::size_t> counts;
  std::vector<std::string> notes;
  std::vector<QuestionScore> per_question;

  /// Component value on its native scale.
  std::optional<double> component(std::string_view name) const;
};

/// Component scaled to [0,1]: chatgpt and match / 100, cider / 10.
std::optional<double> normalized_component(const MetricReport& report, std::string_view name);

/// Sum of weight x normalized component.
double final_score(const MetricReport& report, const ScoreWeights& weights);

struct MetricConfig {
  std::optional<ScoreWeights> weights;
  double match_threshold = 16.0;
  double cider_sigma = 6.0;
  double rouge_beta = 1.2;
  AnswerNormalization normalization;
};

/// Scores a run against the corpus references. Accuracy covers closed-form
/// questions, BLEU/ROUGE-L/CIDEr and the judge cover open questions, Match
/// covers every question whose reference holds coordinates.
MetricReport score_run(const Corpus& corpus, const SystemRun& run, const MetricConfig& config,
                       JudgeClient* judge = nullptr);

nlohmann::json report_to_json(const MetricReport& report, bool include_per_question = false);
MetricReport report_from_json(const nlohmann::json& json);

void write_per_question_csv(const MetricReport& report, const std::filesystem::path& path);

/// Table with the leaderboard columns, one row per report.
std::string render_report_table(const std::vector<MetricReport>& reports);

}  // namespace drivelm
