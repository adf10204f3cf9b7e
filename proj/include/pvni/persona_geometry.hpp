#pragma once

#include <array>
#include <cstddef>
#include <span>

#include <json.hpp>

#include "pvni/trait_estimate.hpp"
#include "pvni/types.hpp"

namespace pvni {

/// Default degeneracy threshold on ||v_p||: 1e-8 * sqrt(d).
double default_degeneracy_tolerance(std::size_t dimension);

/// Geometry of one trait computed from its three condition means.
struct PersonaGeometry {
  Trait trait = Trait::O;
  Vector v_p;   // h_pos - h_neg
  Vector mu;    // v_p / ||v_p||
  Vector v_n;   // h_neu - h_neg
  double norm_vp = 0.0;
  double coef_raw = 0.0;
  double coef = 0.0;  // clip_unit(coef_raw)
};

Vector persona_vector(std::span<const double> h_pos, std::span<const double> h_neg);
Vector neutral_vector(std::span<const double> h_neu, std::span<const double> h_neg);

/// v / ||v||; throws DegeneratePersonaVector when ||v|| < tolerance.
Vector unit_direction(std::span<const double> v, double tolerance);

/// <v_n, v_p> / <v_p, v_p>; throws DegeneratePersonaVector when ||v_p|| < tolerance.
double projection_coef(std::span<const double> v_n, std::span<const double> v_p, double tolerance);

double clip_unit(double x);

/// Cosine between two unit directions, clamped to [-1, 1]. Throws NotUnitNorm.
double correlation(std::span<const double> mu_i, std::span<const double> mu_j);

PersonaGeometry build_geometry(Trait trait, std::span<const double> h_pos,
                               std::span<const double> h_neg, std::span<const double> h_neu,
                               double tolerance);

/// B = [s_O mu_O, ..., s_N mu_N], stored row-major as d x 5.
struct Big5Embedding {
  std::array<double, kNumTraits> scores{};
  std::array<Vector, kNumTraits> directions;
  std::size_t dimension = 0;
  std::vector<double> matrix;

  double at(std::size_t row, Trait col) const { return matrix[row * kNumTraits + index(col)]; }
};

Big5Embedding assemble_embedding(std::span<const TraitEstimate> estimates,
                                 std::span<const PersonaGeometry> geometries);

/// Pairwise correlation matrix over the traits present; missing entries are null in JSON.
nlohmann::ordered_json geometry_report(std::span<const PersonaGeometry> geometries);

}  // namespace pvni
