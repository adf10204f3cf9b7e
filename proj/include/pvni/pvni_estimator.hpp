#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pvni/judge_anchoring.hpp"
#include "pvni/persona_geometry.hpp"
#include "pvni/record_store.hpp"
#include "pvni/trait_estimate.hpp"

namespace pvni {

inline constexpr int kRunFormatVersion = 1;

struct PvniConfig {
  long long layer = 0;
  std::optional<double> degeneracy_tolerance;  // default_degeneracy_tolerance(d) when unset
};

/// Why one trait (or a whole group) produced no estimate.
struct TraitFailure {
  std::string kind;
  std::string message;
};

/// Algorithm output for one variant group, or for the pooled dataset when variant is empty.
struct PvniRun {
  std::optional<VariantKey> variant;
  std::array<std::optional<TraitEstimate>, kNumTraits> estimates;
  std::array<std::optional<TraitFailure>, kNumTraits> failures;
  std::optional<TraitFailure> group_failure;
  std::vector<PersonaGeometry> geometries;
  std::vector<AnchorPair> anchors;
  std::optional<Big5Embedding> embedding;
  PvniConfig config;
  double tolerance_used = 0.0;
  std::size_t dimension = 0;

  bool complete() const { return embedding.has_value(); }
  /// s_hat in O,C,E,A,N order; nullopt for traits that failed.
  std::array<std::optional<double>, kNumTraits> scores() const;
};

/// s_neg + coef (s_pos - s_neg), written so both endpoints are exact.
TraitEstimate estimate_trait(const AnchorPair& anchors, double coef, double coef_raw,
                             VariantKey variant = {});
TraitEstimate estimate_trait(const AnchorPair& anchors, double coef);

/// Pools every variant group into one dataset.
PvniRun run_pvni(const ActivationSet& acts, const JudgementSet& judges, const PvniConfig& config);

/// One run per (variant_kind, variant_id) seen in either file, in key order.
std::vector<PvniRun> run_pvni_per_variant(const ActivationSet& acts, const JudgementSet& judges,
                                          const PvniConfig& config);

nlohmann::ordered_json to_json(const TraitEstimate& e);
nlohmann::ordered_json to_json(const PvniRun& run);
nlohmann::ordered_json config_json(const PvniConfig& config);

/// Rows of B as CSV with header O,C,E,A,N; values printed round-trip exact.
std::string embedding_csv(const Big5Embedding& b);

/// Shortest decimal that parses back to the same double.
std::string format_double(double x);

}  // namespace pvni
