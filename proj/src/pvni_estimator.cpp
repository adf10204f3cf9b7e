#include "pvni/pvni_estimator.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include "pvni/errors.hpp"

namespace pvni {

namespace {

nlohmann::ordered_json failure_json(const TraitFailure& f) {
  return {{"kind", f.kind}, {"message", f.message}};
}

PvniRun run_group(const ActivationSet& acts, const JudgementSet& judges, const PvniConfig& config,
                  std::optional<VariantKey> variant) {
  PvniRun run;
  run.variant = variant;
  run.config = config;
  run.dimension = acts.dimension();
  run.tolerance_used = config.degeneracy_tolerance.value_or(
      default_degeneracy_tolerance(acts.dimension()));
  const VariantKey label = variant.value_or(VariantKey{});

  std::vector<TraitEstimate> estimates;
  for (Trait t : kAllTraits) {
    try {
      const Vector pos = mean_hidden(acts, t, Condition::Pos, config.layer, variant);
      const Vector neg = mean_hidden(acts, t, Condition::Neg, config.layer, variant);
      const Vector neu = mean_hidden(acts, t, Condition::Neu, config.layer, variant);
      PersonaGeometry g = build_geometry(t, pos, neg, neu, run.tolerance_used);
      const AnchorPair a = anchors(judges, t, variant);
      TraitEstimate e = estimate_trait(a, g.coef, g.coef_raw, label);
      run.geometries.push_back(std::move(g));
      run.anchors.push_back(a);
      run.estimates[index(t)] = e;
      estimates.push_back(e);
    } catch (const Error& err) {
      run.failures[index(t)] = TraitFailure{err.kind(), "trait " + std::string(to_string(t)) +
                                                            ": " + err.what()};
    }
  }
  if (estimates.size() == kNumTraits) {
    run.embedding = assemble_embedding(estimates, run.geometries);
  }
  return run;
}

}  // namespace

std::array<std::optional<double>, kNumTraits> PvniRun::scores() const {
  std::array<std::optional<double>, kNumTraits> out;
  for (std::size_t i = 0; i < kNumTraits; ++i) {
    if (estimates[i]) out[i] = estimates[i]->s_hat;
  }
  return out;
}

TraitEstimate estimate_trait(const AnchorPair& anchors, double coef, double coef_raw,
                             VariantKey variant) {
  TraitEstimate e;
  e.trait = anchors.trait;
  e.s_pos = anchors.s_pos;
  e.s_neg = anchors.s_neg;
  e.n_pos = anchors.n_examples_pos;
  e.n_neg = anchors.n_examples_neg;
  e.coef_raw = coef_raw;
  e.coef = coef;
  e.variant = variant;
  const double lo = std::min(anchors.s_pos, anchors.s_neg);
  const double hi = std::max(anchors.s_pos, anchors.s_neg);
  e.s_hat = std::clamp((1.0 - coef) * anchors.s_neg + coef * anchors.s_pos, lo, hi);
  return e;
}

TraitEstimate estimate_trait(const AnchorPair& anchors, double coef) {
  return estimate_trait(anchors, coef, coef);
}

PvniRun run_pvni(const ActivationSet& acts, const JudgementSet& judges, const PvniConfig& config) {
  return run_group(acts, judges, config, std::nullopt);
}

std::vector<PvniRun> run_pvni_per_variant(const ActivationSet& acts, const JudgementSet& judges,
                                          const PvniConfig& config) {
  std::set<VariantKey> keys;
  for (const auto& k : acts.variants()) keys.insert(k);
  for (const auto& k : judges.variants()) keys.insert(k);

  std::vector<PvniRun> runs;
  for (const auto& key : keys) {
    PvniRun run = run_group(acts, judges, config, key);
    if (!run.complete()) {
      std::size_t failed = 0;
      for (const auto& f : run.failures) failed += f.has_value();
      run.group_failure = TraitFailure{
          "IncompleteGroup", "variant " + to_string(key) + ": " + std::to_string(failed) +
                                 " of 5 traits failed"};
    }
    runs.push_back(std::move(run));
  }
  return runs;
}

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

nlohmann::ordered_json to_json(const TraitEstimate& e) {
  return {{"trait", to_string(e.trait)},
          {"variant_kind", to_string(e.variant.kind)},
          {"variant_id", e.variant.id},
          {"s_pos", e.s_pos},
          {"s_neg", e.s_neg},
          {"n_pos", e.n_pos},
          {"n_neg", e.n_neg},
          {"coef_raw", e.coef_raw},
          {"coef", e.coef},
          {"s_hat", e.s_hat}};
}

nlohmann::ordered_json config_json(const PvniConfig& config) {
  nlohmann::ordered_json j = {{"layer", config.layer}};
  j["degeneracy_tolerance"] = config.degeneracy_tolerance
                                  ? nlohmann::ordered_json(*config.degeneracy_tolerance)
                                  : nlohmann::ordered_json(nullptr);
  return j;
}

nlohmann::ordered_json to_json(const PvniRun& run) {
  nlohmann::ordered_json j;
  j["format_version"] = kRunFormatVersion;
  if (run.variant) {
    j["variant"] = {{"variant_kind", to_string(run.variant->kind)},
                    {"variant_id", run.variant->id}};
  } else {
    j["variant"] = nullptr;
  }
  j["config"] = config_json(run.config);
  j["dimension"] = run.dimension;
  j["degeneracy_tolerance_used"] = run.tolerance_used;
  j["complete"] = run.complete();

  nlohmann::ordered_json s_hat = nlohmann::ordered_json::array();
  for (const auto& s : run.scores()) s_hat.push_back(s ? nlohmann::ordered_json(*s) : nullptr);
  j["s_hat"] = std::move(s_hat);

  nlohmann::ordered_json traits = nlohmann::ordered_json::object();
  for (Trait t : kAllTraits) {
    const auto& e = run.estimates[index(t)];
    const auto& f = run.failures[index(t)];
    traits[std::string(to_string(t))] =
        e ? to_json(*e) : nlohmann::ordered_json{{"error", failure_json(*f)}};
  }
  j["traits"] = std::move(traits);
  j["geometry"] = geometry_report(run.geometries);
  j["anchors"] = anchor_report(run.anchors);
  j["error"] = run.group_failure ? failure_json(*run.group_failure) : nlohmann::ordered_json(nullptr);
  return j;
}

std::string embedding_csv(const Big5Embedding& b) {
  std::string out = "O,C,E,A,N\n";
  for (std::size_t r = 0; r < b.dimension; ++r) {
    for (Trait t : kAllTraits) {
      if (t != Trait::O) out += ',';
      out += format_double(b.at(r, t));
    }
    out += '\n';
  }
  return out;
}

}  // namespace pvni
