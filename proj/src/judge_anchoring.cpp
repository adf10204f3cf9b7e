#include "pvni/judge_anchoring.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "pvni/errors.hpp"
#include "pvni/linalg.hpp"

namespace pvni {

double score_from_logits(std::span<const double> candidate_logprobs) {
  if (candidate_logprobs.size() != kNumScoreTokens) {
    throw DimensionMismatch("expected 101 candidate logprobs, got " +
                            std::to_string(candidate_logprobs.size()));
  }
  for (std::size_t k = 0; k < candidate_logprobs.size(); ++k) {
    if (!std::isfinite(candidate_logprobs[k])) {
      throw NonFiniteLogprob("logprob for token " + std::to_string(k) + " is not finite");
    }
  }
  const double peak = *std::max_element(candidate_logprobs.begin(), candidate_logprobs.end());
  std::vector<double> weights(kNumScoreTokens);
  std::vector<double> weighted(kNumScoreTokens);
  for (std::size_t k = 0; k < kNumScoreTokens; ++k) {
    weights[k] = std::exp(candidate_logprobs[k] - peak);
    weighted[k] = static_cast<double>(k) * weights[k];
  }
  const double score = linalg::pairwise_sum(weighted) / linalg::pairwise_sum(weights);
  return std::clamp(score, 0.0, 100.0);
}

double rollout_average(std::span<const double> scores) {
  if (scores.empty()) throw EmptyRollouts("no rollout scores to average");
  return linalg::pairwise_sum(scores) / static_cast<double>(scores.size());
}

double resolve_score(const JudgeRecord& record) {
  if (const auto* s = std::get_if<DirectScore>(&record.payload)) return s->value;
  return score_from_logits(std::get<CandidateLogprobs>(record.payload).values);
}

namespace {

// Mean over prompts of the per-prompt rollout average; prompts in prompt_id order.
std::optional<std::pair<double, std::size_t>> condition_anchor(const JudgementSet& judges,
                                                               Trait trait, Condition cond,
                                                               std::optional<VariantKey> variant) {
  std::map<std::pair<VariantKey, std::string>, std::map<long long, double>> per_prompt;
  for (const auto& r : judges.records()) {
    if (r.trait != trait || r.condition != cond) continue;
    if (variant && r.variant() != *variant) continue;
    per_prompt[{r.variant(), r.prompt_id}][r.rollout_id] = resolve_score(r);
  }
  if (per_prompt.empty()) return std::nullopt;
  std::vector<double> prompt_scores;
  prompt_scores.reserve(per_prompt.size());
  std::vector<double> rollouts;
  for (const auto& [key, by_rollout] : per_prompt) {
    rollouts.clear();
    for (const auto& [id, s] : by_rollout) rollouts.push_back(s);
    prompt_scores.push_back(rollout_average(rollouts));
  }
  return std::pair{linalg::pairwise_sum(prompt_scores) / static_cast<double>(prompt_scores.size()),
                   prompt_scores.size()};
}

}  // namespace

AnchorPair anchors(const JudgementSet& judges, Trait trait, std::optional<VariantKey> variant) {
  auto context = [&](Condition c) {
    std::string s = std::string(to_string(c)) + " judgements for trait " +
                    std::string(to_string(trait));
    if (variant) s += " in variant " + to_string(*variant);
    return s;
  };
  auto pos = condition_anchor(judges, trait, Condition::Pos, variant);
  if (!pos) throw MissingCondition("no " + context(Condition::Pos));
  auto neg = condition_anchor(judges, trait, Condition::Neg, variant);
  if (!neg) throw MissingCondition("no " + context(Condition::Neg));
  return {trait, pos->first, neg->first, pos->second, neg->second};
}

PersonaLoss persona_loss(Trait trait, double score) {
  if (!(score >= 0.0 && score <= 100.0)) {
    throw OutOfRangeScore("score " + std::to_string(score) + " outside [0, 100]");
  }
  return {trait, 1.0 - score / 100.0};
}

nlohmann::ordered_json anchor_report(std::span<const AnchorPair> pairs) {
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (const auto& p : pairs) {
    out[std::string(to_string(p.trait))] = {
        {"s_pos", p.s_pos},
        {"s_neg", p.s_neg},
        {"counts", {{"pos", p.n_examples_pos}, {"neg", p.n_examples_neg}}},
        {"loss_pos", persona_loss(p.trait, p.s_pos).value},
        {"loss_neg", persona_loss(p.trait, p.s_neg).value}};
  }
  return out;
}

}  // namespace pvni
