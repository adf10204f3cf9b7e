#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include <json.hpp>

#include "pvni/record_store.hpp"
#include "pvni/types.hpp"

namespace pvni {

/// Dataset-level judge anchors for one trait.
struct AnchorPair {
  Trait trait = Trait::O;
  double s_pos = 0.0;
  double s_neg = 0.0;
  std::size_t n_examples_pos = 0;
  std::size_t n_examples_neg = 0;
};

/// Normalized persona loss: 1 - score/100, in [0, 1].
struct PersonaLoss {
  Trait trait = Trait::O;
  double value = 0.0;
};

/// Softmax-weighted expectation over the integer candidates 0..100.
double score_from_logits(std::span<const double> candidate_logprobs);

double rollout_average(std::span<const double> scores);

/// Per-rollout score of one judged response, whatever its payload.
double resolve_score(const JudgeRecord& record);

/// Rollouts are averaged per prompt first, then prompts are averaged per condition.
AnchorPair anchors(const JudgementSet& judges, Trait trait,
                   std::optional<VariantKey> variant = std::nullopt);

PersonaLoss persona_loss(Trait trait, double score);

nlohmann::ordered_json anchor_report(std::span<const AnchorPair> pairs);

}  // namespace pvni
