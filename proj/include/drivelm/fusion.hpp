#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "drivelm/dataset.hpp"
#include "drivelm/metrics.hpp"
#include "drivelm/orchestrator.hpp"
#include "drivelm/text.hpp"

namespace drivelm {

struct FusionStrategy {
  enum class Type { kVote, kMetricArgmax, kFixedSystem };
  Type type = Type::kVote;
  SentenceMetric metric = SentenceMetric::kRougeL;
  std::string system_id;

  static FusionStrategy vote() { return {}; }
  static FusionStrategy argmax(SentenceMetric metric = SentenceMetric::kRougeL) {
    return {Type::kMetricArgmax, metric, {}};
  }
  static FusionStrategy fixed(std::string system_id) {
    return {Type::kFixedSystem, SentenceMetric::kRougeL, std::move(system_id)};
  }
};

/// "vote", "metric_argmax[:metric]" or "fixed_system:<id>".
FusionStrategy parse_fusion_strategy(std::string_view text);
std::string format_fusion_strategy(const FusionStrategy& strategy);

struct FusionPolicy {
  std::map<QuestionKind, FusionStrategy> routing;
  // Best system first; breaks ties.
  std::vector<std::string> priority;
  AnswerNormalization normalization;

  /// Closed-form kinds vote, open questions take the per-question ROUGE-L
  /// argmax.
  static FusionPolicy defaults(std::vector<std::string> priority);

  /// Throws unless every kind is routed and `systems` are all prioritized.
  void validate(const std::vector<std::string>& systems) const;
};

struct Candidate {
  std::string system_id;
  std::string text;
};

struct Choice {
  std::string text;
  std::string system_id;
  bool tie = false;
};

/// Most common normalized answer; ties go to the class holding the
/// highest-priority system, whose original text is returned.
Choice vote_choice(const std::vector<Candidate>& candidates, const std::vector<std::string>& priority,
                   const AnswerNormalization& normalization = {});
std::string vote(const std::vector<Candidate>& candidates, const std::vector<std::string>& priority,
                 const AnswerNormalization& normalization = {});

/// Candidate scoring highest against the reference; ties by priority.
/// Candidates whose score is not finite are dropped.
Choice metric_argmax_choice(const std::vector<Candidate>& candidates, const std::string& reference,
                            SentenceMetric metric, const std::vector<std::string>& priority);
std::string metric_argmax(const std::vector<Candidate>& candidates, const std::string& reference,
                          SentenceMetric metric, const std::vector<std::string>& priority);

struct FusionKindStats {
  std::size_t questions = 0;
  std::size_t unanimous = 0;
  std::size_t ties = 0;
};

struct FusionReport {
  std::map<QuestionKind, FusionKindStats> per_kind;
  std::map<std::string, std::string> chosen_system;
  std::vector<std::string> missing;     // no run answered
  std::vector<std::string> incomplete;  // some runs did not answer
  std::vector<std::string> fallbacks;   // open questions without a reference
};

nlohmann::json fusion_report_to_json(const FusionReport& report);

/// Per question: route by kind; metric_argmax needs a reference and falls
/// back to the first prioritized system that answered. The fused run is
/// labeled "fusion".
SystemRun fuse(const std::vector<SystemRun>& runs,
               const std::map<std::string, std::string>* references, const FusionPolicy& policy,
               FusionReport* report = nullptr);

/// Reference answers keyed by question_id.
std::map<std::string, std::string> corpus_references(const Corpus& corpus);

}  // namespace drivelm
