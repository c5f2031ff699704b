#include "drivelm/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <spdlog/spdlog.h>

namespace drivelm {
namespace {

constexpr std::array<QuestionKind, 3> kKinds = {QuestionKind::kMultipleChoice, QuestionKind::kYesNo,
                                                QuestionKind::kOpen};

// Lower is better; systems missing from the priority list rank after it,
// ordered by id.
std::pair<std::size_t, std::string> rank_of(const std::string& system_id,
                                            const std::vector<std::string>& priority) {
  auto it = std::find(priority.begin(), priority.end(), system_id);
  if (it != priority.end()) return {static_cast<std::size_t>(it - priority.begin()), {}};
  return {priority.size(), system_id};
}

bool outranks(const std::string& a, const std::string& b, const std::vector<std::string>& priority) {
  return rank_of(a, priority) < rank_of(b, priority);
}

}  // namespace

FusionStrategy parse_fusion_strategy(std::string_view text) {
  const std::string value = trim(text);
  if (value == "vote") return FusionStrategy::vote();
  if (value == "metric_argmax") return FusionStrategy::argmax();
  constexpr std::string_view kArgmax = "metric_argmax:";
  constexpr std::string_view kFixed = "fixed_system:";
  if (value.rfind(kArgmax, 0) == 0) {
    auto metric = sentence_metric_from_name(std::string_view(value).substr(kArgmax.size()));
    if (!metric) throw Error("unknown per-question metric in '" + value + "'");
    return FusionStrategy::argmax(*metric);
  }
  if (value.rfind(kFixed, 0) == 0 && value.size() > kFixed.size()) {
    return FusionStrategy::fixed(value.substr(kFixed.size()));
  }
  throw Error("unknown fusion strategy '" + value + "'");
}

std::string format_fusion_strategy(const FusionStrategy& strategy) {
  switch (strategy.type) {
    case FusionStrategy::Type::kVote: return "vote";
    case FusionStrategy::Type::kMetricArgmax:
      return "metric_argmax:" + std::string(sentence_metric_name(strategy.metric));
    case FusionStrategy::Type::kFixedSystem: return "fixed_system:" + strategy.system_id;
  }
  return "vote";
}

FusionPolicy FusionPolicy::defaults(std::vector<std::string> priority) {
  FusionPolicy policy;
  policy.routing[QuestionKind::kMultipleChoice] = FusionStrategy::vote();
  policy.routing[QuestionKind::kYesNo] = FusionStrategy::vote();
  policy.routing[QuestionKind::kOpen] = FusionStrategy::argmax(SentenceMetric::kRougeL);
  policy.priority = std::move(priority);
  return policy;
}

void FusionPolicy::validate(const std::vector<std::string>& systems) const {
  for (QuestionKind kind : kKinds) {
    if (!routing.count(kind)) throw Error("fusion policy does not route " + std::string(kind_name(kind)));
  }
  for (const auto& system : systems) {
    if (std::find(priority.begin(), priority.end(), system) == priority.end()) {
      throw Error("fusion priority does not list system '" + system + "'");
    }
  }
}

Choice vote_choice(const std::vector<Candidate>& candidates, const std::vector<std::string>& priority,
                   const AnswerNormalization& normalization) {
  if (candidates.empty()) throw Error("vote needs at least one answer");
  struct Bucket {
    std::size_t count = 0;
    const Candidate* best = nullptr;
  };
  std::map<std::string, Bucket> buckets;
  for (const auto& candidate : candidates) {
    Bucket& bucket = buckets[normalize_answer(candidate.text, normalization)];
    ++bucket.count;
    if (!bucket.best || outranks(candidate.system_id, bucket.best->system_id, priority)) {
      bucket.best = &candidate;
    }
  }
  std::size_t top = 0;
  for (const auto& [key, bucket] : buckets) top = std::max(top, bucket.count);
  const Bucket* winner = nullptr;
  std::size_t tied = 0;
  for (const auto& [key, bucket] : buckets) {
    if (bucket.count != top) continue;
    ++tied;
    if (!winner || outranks(bucket.best->system_id, winner->best->system_id, priority)) winner = &bucket;
  }
  return {winner->best->text, winner->best->system_id, tied > 1};
}

std::string vote(const std::vector<Candidate>& candidates, const std::vector<std::string>& priority,
                 const AnswerNormalization& normalization) {
  return vote_choice(candidates, priority, normalization).text;
}

Choice metric_argmax_choice(const std::vector<Candidate>& candidates, const std::string& reference,
                            SentenceMetric metric, const std::vector<std::string>& priority) {
  const Candidate* best = nullptr;
  double best_score = -std::numeric_limits<double>::infinity();
  bool tie = false;
  for (const auto& candidate : candidates) {
    const double score = sentence_score(metric, candidate.text, reference);
    if (!std::isfinite(score)) {
      spdlog::warn("metric {} failed for system {}, candidate dropped", sentence_metric_name(metric),
                   candidate.system_id);
      continue;
    }
    if (!best || score > best_score) {
      best = &candidate;
      best_score = score;
      tie = false;
    } else if (score == best_score) {
      tie = true;
      if (outranks(candidate.system_id, best->system_id, priority)) best = &candidate;
    }
  }
  if (!best) throw Error("metric_argmax has no scorable candidate");
  return {best->text, best->system_id, tie};
}

std::string metric_argmax(const std::vector<Candidate>& candidates, const std::string& reference,
                          SentenceMetric metric, const std::vector<std::string>& priority) {
  return metric_argmax_choice(candidates, reference, metric, priority).text;
}

nlohmann::json fusion_report_to_json(const FusionReport& report) {
  nlohmann::json per_kind = nlohmann::json::object();
  for (const auto& [kind, stats] : report.per_kind) {
    per_kind[std::string(kind_name(kind))] = {
        {"questions", stats.questions},
        {"unanimous", stats.unanimous},
        {"agreement_rate", stats.questions == 0 ? 0.0
                                                : static_cast<double>(stats.unanimous) /
                                                      static_cast<double>(stats.questions)},
        {"ties", stats.ties}};
  }
  return {{"per_kind", std::move(per_kind)},
          {"chosen_system", report.chosen_system},
          {"missing", report.missing},
          {"incomplete", report.incomplete},
          {"fallbacks", report.fallbacks}};
}

SystemRun fuse(const std::vector<SystemRun>& runs, const std::map<std::string, std::string>* references,
               const FusionPolicy& policy, FusionReport* report) {
  std::vector<std::string> systems;
  for (const auto& run : runs) systems.push_back(run.system_id);
  policy.validate(systems);

  FusionReport local;
  SystemRun fused;
  fused.system_id = "fusion";

  std::set<std::string> question_ids;
  for (const auto& run : runs) {
    for (const auto& [id, answer] : run.answers) question_ids.insert(id);
  }

  for (const auto& id : question_ids) {
    std::vector<Candidate> candidates;
    const Answer* sample = nullptr;
    for (const auto& run : runs) {
      auto it = run.answers.find(id);
      if (it == run.answers.end() || it->second.error) continue;
      candidates.push_back({run.system_id, it->second.text});
      if (!sample) sample = &it->second;
    }
    if (candidates.empty()) {
      local.missing.push_back(id);
      continue;
    }
    if (candidates.size() < runs.size()) local.incomplete.push_back(id);

    const QuestionKind kind = sample->kind;
    FusionKindStats& stats = local.per_kind[kind];
    ++stats.questions;
    const std::string first = normalize_answer(candidates.front().text, policy.normalization);
    if (std::all_of(candidates.begin(), candidates.end(), [&](const Candidate& c) {
          return normalize_answer(c.text, policy.normalization) == first;
        })) {
      ++stats.unanimous;
    }

    auto fixed_choice = [&](const std::string& preferred) {
      std::vector<std::string> order{preferred};
      order.insert(order.end(), policy.priority.begin(), policy.priority.end());
      const Candidate* best = &candidates.front();
      for (const auto& c : candidates) {
        if (outranks(c.system_id, best->system_id, order)) best = &c;
      }
      return Choice{best->text, best->system_id, false};
    };

    const FusionStrategy& strategy = policy.routing.at(kind);
    Choice choice;
    switch (strategy.type) {
      case FusionStrategy::Type::kVote:
        choice = vote_choice(candidates, policy.priority, policy.normalization);
        break;
      case FusionStrategy::Type::kMetricArgmax: {
        const std::string* reference = nullptr;
        if (references) {
          auto it = references->find(id);
          if (it != references->end()) reference = &it->second;
        }
        if (reference) {
          choice = metric_argmax_choice(candidates, *reference, strategy.metric, policy.priority);
        } else {
          local.fallbacks.push_back(id);
          choice = fixed_choice(policy.priority.empty() ? candidates.front().system_id : policy.priority.front());
        }
        break;
      }
      case FusionStrategy::Type::kFixedSystem:
        choice = fixed_choice(strategy.system_id);
        break;
    }
    if (choice.tie) ++stats.ties;
    local.chosen_system[id] = choice.system_id;

    Answer answer;
    answer.question_id = id;
    answer.system_id = fused.system_id;
    answer.scene_id = sample->scene_id;
    answer.frame_id = sample->frame_id;
    answer.kind = kind;
    answer.text = std::move(choice.text);
    fused.answers.emplace(id, std::move(answer));
  }
  for (const auto& id : local.missing) spdlog::warn("fusion: no run answered {}", id);
  if (report) *report = std::move(local);
  return fused;
}

std::map<std::string, std::string> corpus_references(const Corpus& corpus) {
  std::map<std::string, std::string> out;
  for (const auto& frame : corpus.frames) {
    for (const auto& qa : frame.qas) {
      if (qa.answer) out.emplace(qa.question_id, *qa.answer);
    }
  }
  return out;
}

}  // namespace drivelm
