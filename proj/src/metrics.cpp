#include "drivelm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <regex>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

namespace drivelm {
namespace {

using NgramCounts = std::map<std::string, int>;

std::string join_ngram(const Tokens& tokens, std::size_t begin, std::size_t length) {
  std::string key = tokens[begin];
  for (std::size_t i = 1; i < length; ++i) {
    key.push_back(' ');
    key += tokens[begin + i];
  }
  return key;
}

NgramCounts count_ngrams(const Tokens& tokens, std::size_t order) {
  NgramCounts counts;
  if (tokens.size() < order) return counts;
  for (std::size_t i = 0; i + order <= tokens.size(); ++i) ++counts[join_ngram(tokens, i, order)];
  return counts;
}

std::vector<Tokens> tokenize_all(const std::vector<std::string>& texts) {
  std::vector<Tokens> out;
  out.reserve(texts.size());
  for (const auto& text : texts) out.push_back(tokenize(text));
  return out;
}

std::optional<double> mean_of(const std::vector<double>& values) {
  if (values.empty()) return std::nullopt;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

// TF-IDF vectors for orders 1..4 plus their norms and the bigram count used
// as the length of the sentence.
struct CiderVector {
  std::array<std::map<std::string, double>, 4> weights;
  std::array<double, 4> norms{};
  double length = 0.0;
};

CiderVector cider_vector(const Tokens& tokens, const std::map<std::string, double>& document_frequency,
                         double log_documents) {
  CiderVector vec;
  for (std::size_t order = 1; order <= 4; ++order) {
    for (const auto& [ngram, count] : count_ngrams(tokens, order)) {
      auto df = document_frequency.find(ngram);
      const double log_df = std::log(std::max(1.0, df == document_frequency.end() ? 0.0 : df->second));
      const double weight = static_cast<double>(count) * (log_documents - log_df);
      vec.weights[order - 1][ngram] = weight;
      vec.norms[order - 1] += weight * weight;
      if (order == 2) vec.length += count;
    }
  }
  for (double& norm : vec.norms) norm = std::sqrt(norm);
  return vec;
}

std::array<double, 4> cider_similarity(const CiderVector& hyp, const CiderVector& ref, double sigma) {
  std::array<double, 4> val{};
  const double delta = hyp.length - ref.length;
  for (std::size_t n = 0; n < 4; ++n) {
    for (const auto& [ngram, weight] : hyp.weights[n]) {
      auto it = ref.weights[n].find(ngram);
      if (it == ref.weights[n].end()) continue;
      val[n] += std::min(weight, it->second) * it->second;
    }
    if (hyp.norms[n] != 0.0 && ref.norms[n] != 0.0) val[n] /= hyp.norms[n] * ref.norms[n];
    val[n] *= std::exp(-(delta * delta) / (2.0 * sigma * sigma));
  }
  return val;
}

std::string format_cell(const std::optional<double>& value) {
  if (!value) return "-";
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.4f", *value);
  return buffer;
}

nlohmann::json optional_json(const std::optional<double>& value) {
  return value ? nlohmann::json(*value) : nlohmann::json(nullptr);
}

std::optional<double> optional_from(const nlohmann::json& json, const char* key) {
  if (!json.contains(key) || json[key].is_null()) return std::nullopt;
  return json[key].get<double>();
}

}  // namespace

double bleu(const Tokens& candidate, const std::vector<Tokens>& references, int n) {
  if (candidate.empty() || references.empty() || n < 1) return 0.0;
  const std::size_t order = std::min<std::size_t>(static_cast<std::size_t>(n), candidate.size());
  double log_sum = 0.0;
  for (std::size_t k = 1; k <= order; ++k) {
    const NgramCounts cand = count_ngrams(candidate, k);
    NgramCounts max_ref;
    for (const auto& reference : references) {
      for (const auto& [ngram, count] : count_ngrams(reference, k)) {
        max_ref[ngram] = std::max(max_ref[ngram], count);
      }
    }
    int clipped = 0;
    for (const auto& [ngram, count] : cand) {
      auto it = max_ref.find(ngram);
      if (it != max_ref.end()) clipped += std::min(count, it->second);
    }
    if (clipped == 0) return 0.0;
    const double total = static_cast<double>(candidate.size() - k + 1);
    log_sum += std::log(static_cast<double>(clipped) / total);
  }
  const double c = static_cast<double>(candidate.size());
  double closest = static_cast<double>(references.front().size());
  for (const auto& reference : references) {
    const double r = static_cast<double>(reference.size());
    if (std::abs(r - c) < std::abs(closest - c) || (std::abs(r - c) == std::abs(closest - c) && r < closest)) {
      closest = r;
    }
  }
  const double penalty = c < closest ? std::exp(1.0 - closest / c) : 1.0;
  return penalty * std::exp(log_sum / static_cast<double>(order));
}

double bleu_n(std::string_view candidate, const std::vector<std::string>& references, int n) {
  return bleu(tokenize(candidate), tokenize_all(references), n);
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> previous(b.size() + 1, 0);
  std::vector<std::size_t> current(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      current[j] = a[i - 1] == b[j - 1] ? previous[j - 1] + 1 : std::max(previous[j], current[j - 1]);
    }
    std::swap(previous, current);
  }
  return previous[b.size()];
}

double rouge_l(const Tokens& candidate, const std::vector<Tokens>& references, double beta) {
  if (candidate.empty()) return 0.0;
  double best = 0.0;
  const double beta2 = beta * beta;
  for (const auto& reference : references) {
    if (reference.empty()) continue;
    const auto lcs = static_cast<double>(lcs_length(candidate, reference));
    if (lcs == 0.0) continue;
    const double precision = lcs / static_cast<double>(candidate.size());
    const double recall = lcs / static_cast<double>(reference.size());
    best = std::max(best, (1.0 + beta2) * precision * recall / (recall + beta2 * precision));
  }
  return best;
}

double rouge_l(std::string_view candidate, const std::vector<std::string>& references, double beta) {
  return rouge_l(tokenize(candidate), tokenize_all(references), beta);
}

void CiderScorer::add(Tokens candidate, std::vector<Tokens> references) {
  candidates_.push_back(std::move(candidate));
  references_.push_back(std::move(references));
}

std::vector<double> CiderScorer::compute() const {
  // Document frequency: number of questions whose references contain the n-gram.
  std::map<std::string, double> document_frequency;
  for (const auto& references : references_) {
    std::set<std::string> present;
    for (const auto& reference : references) {
      for (std::size_t order = 1; order <= 4; ++order) {
        for (const auto& [ngram, count] : count_ngrams(reference, order)) present.insert(ngram);
      }
    }
    for (const auto& ngram : present) document_frequency[ngram] += 1.0;
  }
  const double log_documents = std::log(static_cast<double>(references_.size()));

  std::vector<double> scores;
  scores.reserve(candidates_.size());
  for (std::size_t i = 0; i < candidates_.size(); ++i) {
    const CiderVector hyp = cider_vector(candidates_[i], document_frequency, log_documents);
    std::array<double, 4> total{};
    for (const auto& reference : references_[i]) {
      const auto sim = cider_similarity(hyp, cider_vector(reference, document_frequency, log_documents),
                                        sigma_);
      for (std::size_t n = 0; n < 4; ++n) total[n] += sim[n];
    }
    double score = std::accumulate(total.begin(), total.end(), 0.0) / 4.0;
    if (!references_[i].empty()) score /= static_cast<double>(references_[i].size());
    scores.push_back(score * 10.0);
  }
  return scores;
}

double CiderScorer::corpus_score() const {
  if (candidates_.empty()) throw Error("CIDEr needs at least one question");
  return *mean_of(compute());
}

double cider(const std::vector<std::string>& candidates,
             const std::vector<std::vector<std::string>>& references, double sigma) {
  if (candidates.size() != references.size()) throw Error("CIDEr candidate/reference count mismatch");
  CiderScorer scorer(sigma);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    scorer.add(tokenize(candidates[i]), tokenize_all(references[i]));
  }
  return scorer.corpus_score();
}

std::vector<std::pair<double, double>> extract_coordinate_pairs(std::string_view text) {
  static const std::regex kPair(R"(\(\s*(-?\d+(?:\.\d+)?)\s*,\s*(-?\d+(?:\.\d+)?)\s*\))");
  std::vector<std::pair<double, double>> pairs;
  const std::string owned(text);
  for (auto it = std::sregex_iterator(owned.begin(), owned.end(), kPair); it != std::sregex_iterator(); ++it) {
    pairs.emplace_back(std::stod((*it)[1].str()), std::stod((*it)[2].str()));
  }
  return pairs;
}

std::optional<double> match_score(std::string_view prediction, std::string_view reference,
                                  double threshold) {
  const auto ref_pairs = extract_coordinate_pairs(reference);
  if (ref_pairs.empty()) return std::nullopt;
  const auto pred_pairs = extract_coordinate_pairs(prediction);
  std::size_t matched = 0;
  for (const auto& [rx, ry] : ref_pairs) {
    for (const auto& [px, py] : pred_pairs) {
      if (std::hypot(px - rx, py - ry) <= threshold) {
        ++matched;
        break;
      }
    }
  }
  return 100.0 * static_cast<double>(matched) / static_cast<double>(ref_pairs.size());
}

bool answers_equal(std::string_view prediction, std::string_view reference,
                   const AnswerNormalization& rules) {
  return normalize_answer(prediction, rules) == normalize_answer(reference, rules);
}

std::optional<double> accuracy(const std::vector<ScoredAnswer>& answers, const AnswerNormalization& rules) {
  std::size_t eligible = 0;
  std::size_t correct = 0;
  for (const auto& answer : answers) {
    if (answer.kind == QuestionKind::kOpen) continue;
    ++eligible;
    if (answers_equal(answer.prediction, answer.reference, rules)) ++correct;
  }
  if (eligible == 0) return std::nullopt;
  return static_cast<double>(correct) / static_cast<double>(eligible);
}

std::string_view sentence_metric_name(SentenceMetric metric) {
  switch (metric) {
    case SentenceMetric::kRougeL: return "rouge_l";
    case SentenceMetric::kBleu1: return "bleu_1";
    case SentenceMetric::kBleu2: return "bleu_2";
    case SentenceMetric::kBleu3: return "bleu_3";
    case SentenceMetric::kBleu4: return "bleu_4";
  }
  return "rouge_l";
}

std::optional<SentenceMetric> sentence_metric_from_name(std::string_view name) {
  for (SentenceMetric metric : {SentenceMetric::kRougeL, SentenceMetric::kBleu1, SentenceMetric::kBleu2,
                                SentenceMetric::kBleu3, SentenceMetric::kBleu4}) {
    if (sentence_metric_name(metric) == name) return metric;
  }
  return std::nullopt;
}

double sentence_score(SentenceMetric metric, std::string_view candidate, std::string_view reference) {
  const std::vector<std::string> references{std::string(reference)};
  switch (metric) {
    case SentenceMetric::kRougeL: return rouge_l(candidate, references);
    case SentenceMetric::kBleu1: return bleu_n(candidate, references, 1);
    case SentenceMetric::kBleu2: return bleu_n(candidate, references, 2);
    case SentenceMetric::kBleu3: return bleu_n(candidate, references, 3);
    case SentenceMetric::kBleu4: return bleu_n(candidate, references, 4);
  }
  return 0.0;
}

HttpJudge::HttpJudge(std::string base_url, std::chrono::milliseconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {}

std::string HttpJudge::judge_prompt(const std::string& question, const std::string& reference,
                                    const std::string& prediction) {
  return "Rate how well the predicted answer matches the reference answer on a scale from 0 to 100.\n"
         "Question: " + question + "\nReference: " + reference + "\nPrediction: " + prediction;
}

double HttpJudge::judge(const std::string& question, const std::string& reference,
                        const std::string& prediction) {
  const nlohmann::json body = {{"prompt", judge_prompt(question, reference, prediction)}};
  HttpResponse reply = post_json(base_url_, "", body.dump(), timeout_);
  if (reply.status != 200) throw Error("judge returned status " + std::to_string(reply.status));
  auto parsed = nlohmann::json::parse(reply.body, nullptr, false);
  if (parsed.is_discarded() || !parsed.contains("score") || !parsed["score"].is_number()) {
    throw Error("judge response lacks a numeric score");
  }
  const double score = parsed["score"].get<double>();
  if (!(score >= 0.0 && score <= 100.0)) throw Error("judge score outside [0,100]");
  return score;
}

JudgeResult judge_score(const std::vector<JudgeTriple>& triples, JudgeClient& judge) {
  JudgeResult result;
  result.synthetic = judge.synthetic();
  if (triples.empty()) return result;
  double total = 0.0;
  try {
    for (const auto& triple : triples) total += judge.judge(triple.question, triple.reference, triple.prediction);
  } catch (const std::exception& e) {
    result.failure = e.what();
    spdlog::warn("judge unavailable: {}", e.what());
    return result;
  }
  result.score = total / static_cast<double>(triples.size());
  return result;
}

void ScoreWeights::validate() const {
  double sum = 0.0;
  for (const auto& [name, weight] : weights) {
    if (std::find_if(kScoreComponents.begin(), kScoreComponents.end(),
                     [&](const char* c) { return name == c; }) == kScoreComponents.end()) {
      throw Error("unknown score component '" + name + "'");
    }
    if (!(weight >= 0.0)) throw Error("weight for '" + name + "' must be >= 0");
    sum += weight;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error("score weights must sum to 1");
}

std::optional<double> MetricReport::component(std::string_view name) const {
  if (name == "accuracy") return accuracy;
  if (name == "chatgpt") return chatgpt;
  if (name == "bleu_1") return bleu[0];
  if (name == "bleu_2") return bleu[1];
  if (name == "bleu_3") return bleu[2];
  if (name == "bleu_4") return bleu[3];
  if (name == "rouge_l") return rouge_l;
  if (name == "cider") return cider;
  if (name == "match") return match;
  return std::nullopt;
}

std::optional<double> normalized_component(const MetricReport& report, std::string_view name) {
  auto value = report.component(name);
  if (!value) return std::nullopt;
  if (name == "chatgpt" || name == "match") return *value / 100.0;
  if (name == "cider") return *value / 10.0;
  return value;
}

double final_score(const MetricReport& report, const ScoreWeights& weights) {
  weights.validate();
  double total = 0.0;
  double present_weight = 0.0;
  for (const auto& [name, weight] : weights.weights) {
    if (weight == 0.0) continue;
    auto value = normalized_component(report, name);
    if (!value) {
      if (!weights.renormalize_missing) throw Error("weighted component '" + name + "' is missing");
      continue;
    }
    total += weight * *value;
    present_weight += weight;
  }
  if (weights.renormalize_missing) {
    if (present_weight == 0.0) throw Error("no weighted component is present");
    total /= present_weight;
  }
  return total;
}

MetricReport score_run(const Corpus& corpus, const SystemRun& run, const MetricConfig& config,
                       JudgeClient* judge) {
  MetricReport report;
  report.system_id = run.system_id;

  std::vector<ScoredAnswer> closed;
  std::array<std::vector<double>, 4> bleu_scores;
  std::vector<double> rouge_scores;
  std::vector<double> match_scores;
  std::vector<JudgeTriple> triples;
  std::vector<std::size_t> open_rows;
  CiderScorer cider_scorer(config.cider_sigma);
  std::set<std::string> known;

  for (const auto& frame : corpus.frames) {
    for (const auto& qa : frame.qas) {
      known.insert(qa.question_id);
      if (!qa.answer) continue;
      ++report.questions;
      ++report.counts[std::string(kind_name(qa.kind))];
      QuestionScore row;
      row.question_id = qa.question_id;
      row.kind = qa.kind;
      std::string prediction;
      auto it = run.answers.find(qa.question_id);
      if (it != run.answers.end() && !it->second.error) {
        prediction = it->second.text;
        row.has_prediction = true;
      } else {
        ++report.missing_predictions;
      }
      const std::string& reference = *qa.answer;

      if (qa.kind == QuestionKind::kOpen) {
        const Tokens cand = tokenize(prediction);
        const std::vector<Tokens> refs{tokenize(reference)};
        for (int n = 1; n <= 4; ++n) bleu_scores[n - 1].push_back(bleu(cand, refs, n));
        row.bleu_4 = bleu_scores[3].back();
        rouge_scores.push_back(rouge_l(cand, refs, config.rouge_beta));
        row.rouge_l = rouge_scores.back();
        cider_scorer.add(cand, refs);
        open_rows.push_back(report.per_question.size());
        triples.push_back({qa.question, reference, prediction});
      } else {
        closed.push_back({prediction, reference, qa.kind});
        row.correct = answers_equal(prediction, reference, config.normalization);
      }
      row.match = match_score(prediction, reference, config.match_threshold);
      if (row.match) match_scores.push_back(*row.match);
      report.per_question.push_back(std::move(row));
    }
  }
  for (const auto& [id, answer] : run.answers) {
    if (!known.count(id)) ++report.unknown_predictions;
  }

  report.accuracy = accuracy(closed, config.normalization);
  for (std::size_t n = 0; n < 4; ++n) report.bleu[n] = mean_of(bleu_scores[n]);
  report.rouge_l = mean_of(rouge_scores);
  report.match = mean_of(match_scores);
  if (cider_scorer.size() > 0) {
    const auto per_question = cider_scorer.compute();
    for (std::size_t i = 0; i < per_question.size(); ++i) {
      report.per_question[open_rows[i]].cider = per_question[i];
    }
    report.cider = mean_of(per_question);
  }

  bool judge_failed = false;
  if (judge) {
    JudgeResult result = judge_score(triples, *judge);
    report.chatgpt = result.score;
    report.chatgpt_synthetic = result.synthetic && result.score.has_value();
    if (result.failure) {
      judge_failed = true;
      report.notes.push_back("judge unavailable: " + *result.failure);
    }
  }

  if (config.weights) {
    ScoreWeights weights = *config.weights;
    if (judge_failed && !weights.renormalize_missing) {
      weights.renormalize_missing = true;
      report.renormalized = true;
      report.notes.push_back("final score renormalized over the remaining weights");
    }
    report.renormalized = report.renormalized || weights.renormalize_missing;
    report.final_score = final_score(report, weights);
  }
  return report;
}

nlohmann::json report_to_json(const MetricReport& report, bool include_per_question) {
  nlohmann::json json;
  json["system_id"] = report.system_id;
  json["accuracy"] = optional_json(report.accuracy);
  json["chatgpt"] = optional_json(report.chatgpt);
  json["chatgpt_synthetic"] = report.chatgpt_synthetic;
  for (std::size_t n = 0; n < 4; ++n) json["bleu_" + std::to_string(n + 1)] = optional_json(report.bleu[n]);
  json["rouge_l"] = optional_json(report.rouge_l);
  json["cider"] = optional_json(report.cider);
  json["match"] = optional_json(report.match);
  json["final_score"] = optional_json(report.final_score);
  json["renormalized"] = report.renormalized;
  json["questions"] = report.questions;
  json["missing_predictions"] = report.missing_predictions;
  json["unknown_predictions"] = report.unknown_predictions;
  json["counts"] = report.counts;
  json["notes"] = report.notes;
  if (include_per_question) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : report.per_question) {
      rows.push_back({{"question_id", row.question_id},
                      {"kind", kind_name(row.kind)},
                      {"has_prediction", row.has_prediction},
                      {"correct", row.correct ? nlohmann::json(*row.correct) : nlohmann::json(nullptr)},
                      {"bleu_4", optional_json(row.bleu_4)},
                      {"rouge_l", optional_json(row.rouge_l)},
                      {"cider", optional_json(row.cider)},
                      {"match", optional_json(row.match)}});
    }
    json["per_question"] = std::move(rows);
  }
  return json;
}

MetricReport report_from_json(const nlohmann::json& json) {
  MetricReport report;
  report.system_id = json.value("system_id", "");
  report.accuracy = optional_from(json, "accuracy");
  report.chatgpt = optional_from(json, "chatgpt");
  report.chatgpt_synthetic = json.value("chatgpt_synthetic", false);
  for (std::size_t n = 0; n < 4; ++n) {
    report.bleu[n] = optional_from(json, ("bleu_" + std::to_string(n + 1)).c_str());
  }
  report.rouge_l = optional_from(json, "rouge_l");
  report.cider = optional_from(json, "cider");
  report.match = optional_from(json, "match");
  report.final_score = optional_from(json, "final_score");
  report.renormalized = json.value("renormalized", false);
  report.questions = json.value("questions", std::size_t{0});
  report.missing_predictions = json.value("missing_predictions", std::size_t{0});
  report.unknown_predictions = json.value("unknown_predictions", std::size_t{0});
  if (json.contains("counts")) report.counts = json["counts"].get<std::map<std::string, std::size_t>>();
  if (json.contains("notes")) report.notes = json["notes"].get<std::vector<std::string>>();
  if (json.contains("per_question")) {
    for (const auto& row : json["per_question"]) {
      QuestionScore score;
      score.question_id = row.value("question_id", "");
      score.kind = kind_from_name(row.value("kind", "open")).value_or(QuestionKind::kOpen);
      score.has_prediction = row.value("has_prediction", false);
      if (row.contains("correct") && !row["correct"].is_null()) score.correct = row["correct"].get<bool>();
      score.bleu_4 = optional_from(row, "bleu_4");
      score.rouge_l = optional_from(row, "rouge_l");
      score.cider = optional_from(row, "cider");
      score.match = optional_from(row, "match");
      report.per_question.push_back(std::move(score));
    }
  }
  return report;
}

void write_per_question_csv(const MetricReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << "question_id,kind,has_prediction,correct,bleu_4,rouge_l,cider,match\n";
  auto cell = [](const std::optional<double>& v) {
    if (!v) return std::string();
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.6f", *v);
    return std::string(buffer);
  };
  for (const auto& row : report.per_question) {
    out << row.question_id << ',' << kind_name(row.kind) << ',' << (row.has_prediction ? 1 : 0) << ','
        << (row.correct ? (*row.correct ? "1" : "0") : "") << ',' << cell(row.bleu_4) << ','
        << cell(row.rouge_l) << ',' << cell(row.cider) << ',' << cell(row.match) << '\n';
  }
}

std::string render_report_table(const std::vector<MetricReport>& reports) {
  const std::vector<std::string> headers = {"System",  "Accuracy", "ChatGPT", "Bleu_1", "Bleu_2", "Bleu_3",
                                            "Bleu_4",  "ROUGE_L",  "CIDEr",   "Match",  "Final Score"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& report : reports) {
    std::string chatgpt = format_cell(report.chatgpt);
    if (report.chatgpt && report.chatgpt_synthetic) chatgpt += "*";
    rows.push_back({report.system_id.empty() ? "-" : report.system_id, format_cell(report.accuracy), chatgpt,
                    format_cell(report.bleu[0]), format_cell(report.bleu[1]), format_cell(report.bleu[2]),
                    format_cell(report.bleu[3]), format_cell(report.rouge_l), format_cell(report.cider),
                    format_cell(report.match), format_cell(report.final_score)});
  }
  std::vector<std::size_t> widths(headers.size());
  for (std::size_t c = 0; c < headers.size(); ++c) {
    widths[c] = headers[c].size();
    for (const auto& row : rows) widths[c] = std::max(widths[c], row[c].size());
  }
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c > 0) out << " | ";
      out << cells[c] << std::string(widths[c] - cells[c].size(), ' ');
    }
    out << '\n';
  };
  emit(headers);
  std::size_t total = 0;
  for (auto w : widths) total += w;
  out << std::string(total + 3 * (widths.size() - 1), '-') << '\n';
  for (const auto& row : rows) emit(row);
  if (std::any_of(reports.begin(), reports.end(), [](const MetricReport& r) { return r.chatgpt_synthetic; })) {
    out << "* synthetic judge score\n";
  }
  return out.str();
}

}  // namespace drivelm
