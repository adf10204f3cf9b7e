#include "pvni/persona_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "pvni/errors.hpp"
#include "pvni/linalg.hpp"

namespace pvni {

namespace {

constexpr double kUnitNormTolerance = 1e-9;

std::string fmt_norm(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", x);
  return buf;
}

}  // namespace

double default_degeneracy_tolerance(std::size_t dimension) {
  return 1e-8 * std::sqrt(static_cast<double>(dimension));
}

Vector persona_vector(std::span<const double> h_pos, std::span<const double> h_neg) {
  return linalg::subtract(h_pos, h_neg);
}

Vector neutral_vector(std::span<const double> h_neu, std::span<const double> h_neg) {
  return linalg::subtract(h_neu, h_neg);
}

Vector unit_direction(std::span<const double> v, double tolerance) {
  const double n = linalg::norm2(v);
  if (!(n >= tolerance)) {
    throw DegeneratePersonaVector("||v_p|| = " + fmt_norm(n) + " below tolerance " +
                                  fmt_norm(tolerance) + "; pos/neg prompts did not separate");
  }
  return linalg::scaled(v, 1.0 / n);
}

double projection_coef(std::span<const double> v_n, std::span<const double> v_p,
                       double tolerance) {
  const double pp = linalg::dot(v_p, v_p);
  if (!(std::sqrt(pp) >= tolerance)) {
    throw DegeneratePersonaVector("||v_p|| = " + fmt_norm(std::sqrt(pp)) + " below tolerance " +
                                  fmt_norm(tolerance));
  }
  return linalg::dot(v_n, v_p) / pp;
}

double clip_unit(double x) { return std::max(0.0, std::min(1.0, x)); }

double correlation(std::span<const double> mu_i, std::span<const double> mu_j) {
  for (auto mu : {mu_i, mu_j}) {
    const double n = linalg::norm2(mu);
    if (std::abs(n - 1.0) > kUnitNormTolerance) {
      throw NotUnitNorm("direction has norm " + fmt_norm(n));
    }
  }
  return std::clamp(linalg::dot(mu_i, mu_j), -1.0, 1.0);
}

PersonaGeometry build_geometry(Trait trait, std::span<const double> h_pos,
                               std::span<const double> h_neg, std::span<const double> h_neu,
                               double tolerance) {
  PersonaGeometry g;
  g.trait = trait;
  g.v_p = persona_vector(h_pos, h_neg);
  g.v_n = neutral_vector(h_neu, h_neg);
  g.norm_vp = linalg::norm2(g.v_p);
  g.mu = unit_direction(g.v_p, tolerance);
  g.coef_raw = projection_coef(g.v_n, g.v_p, tolerance);
  g.coef = clip_unit(g.coef_raw);
  return g;
}

Big5Embedding assemble_embedding(std::span<const TraitEstimate> estimates,
                                 std::span<const PersonaGeometry> geometries) {
  std::array<const TraitEstimate*, kNumTraits> est{};
  std::array<const PersonaGeometry*, kNumTraits> geo{};
  for (const auto& e : estimates) est[index(e.trait)] = &e;
  for (const auto& g : geometries) geo[index(g.trait)] = &g;

  Big5Embedding out;
  for (Trait t : kAllTraits) {
    if (!est[index(t)]) throw MissingTrait("no estimate for trait " + std::string(to_string(t)));
    if (!geo[index(t)]) throw MissingTrait("no geometry for trait " + std::string(to_string(t)));
  }
  out.dimension = geo[0]->mu.size();
  for (Trait t : kAllTraits) {
    const auto& mu = geo[index(t)]->mu;
    if (mu.size() != out.dimension) {
      throw DimensionMismatch("trait " + std::string(to_string(t)) + " has dimension " +
                              std::to_string(mu.size()) + ", expected " +
                              std::to_string(out.dimension));
    }
    out.scores[index(t)] = est[index(t)]->s_hat;
    out.directions[index(t)] = mu;
  }
  out.matrix.assign(out.dimension * kNumTraits, 0.0);
  for (std::size_t r = 0; r < out.dimension; ++r) {
    for (Trait t : kAllTraits) {
      out.matrix[r * kNumTraits + index(t)] = out.scores[index(t)] * out.directions[index(t)][r];
    }
  }
  return out;
}

nlohmann::ordered_json geometry_report(std::span<const PersonaGeometry> geometries) {
  std::array<const PersonaGeometry*, kNumTraits> geo{};
  for (const auto& g : geometries) geo[index(g.trait)] = &g;

  nlohmann::ordered_json traits = nlohmann::ordered_json::object();
  for (Trait t : kAllTraits) {
    if (!geo[index(t)]) continue;
    traits[std::string(to_string(t))] = {{"norm_vp", geo[index(t)]->norm_vp},
                                         {"coef_raw", geo[index(t)]->coef_raw},
                                         {"coef", geo[index(t)]->coef}};
  }
  nlohmann::ordered_json alpha = nlohmann::ordered_json::array();
  for (Trait a : kAllTraits) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (Trait b : kAllTraits) {
      if (geo[index(a)] && geo[index(b)]) {
        row.push_back(correlation(geo[index(a)]->mu, geo[index(b)]->mu));
      } else {
        row.push_back(nullptr);
      }
    }
    alpha.push_back(std::move(row));
  }
  return {{"traits", std::move(traits)}, {"alpha", std::move(alpha)}};
}

}  // namespace pvni
