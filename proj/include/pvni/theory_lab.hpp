#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

// Synthetic worlds in which the linear persona theory can be checked numerically.
//
// A world has trait directions mu_i with a prescribed Gram matrix, a base state
// sampler (antithetic Gaussian ball around a mean m0), a rank-one amplifier per
// trait (shift c_i <h, mu_i> mu_i plus a residual bounded by beta ||h||), and a
// per-trait loss link. Constants in the claims are measured per world, never assumed.
namespace pvni::theory {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct TraitParams {
  double gain = 1.0;               // a_i: slope of the margin along mu_i
  double curvature = 0.1;          // L_i: quadratic penalty off the trait subspace
  double amplifier = 2.0;          // c_i
  double target_projection = 1.0;  // requested <m0, mu_i>
};

struct WorldParams {
  TraitParams trait;
  double beta = 0.0;
  double epsilon = 0.01;
  double link_steepness = 3.0;
  double sample_std = 0.02;
  double typical_radius = 0.0;  // 0 selects sample_std * (sqrt(d) + 3)
};

struct SyntheticWorld {
  std::size_t dimension = 0;
  MatrixXd directions;  // d x n, column i is mu_i
  MatrixXd gram_target;
  VectorXd residual_direction;   // orthogonal to every trait direction
  VectorXd curvature_direction;  // orthogonal to the traits and to residual_direction
  VectorXd mean;                 // m0
  std::vector<TraitParams> traits;
  std::vector<MatrixXd> residual_maps;  // e_i(h) = beta * W_i h with ||W_i||_2 < 1
  std::vector<double> calibration_margin;
  double beta = 0.0;
  double epsilon = 0.01;
  double link_steepness = 3.0;
  double sample_std = 0.02;
  double typical_radius = 0.0;
  std::uint64_t seed = 0;

  std::size_t num_traits() const { return static_cast<std::size_t>(directions.cols()); }
  VectorXd direction(std::size_t i) const { return directions.col(static_cast<Eigen::Index>(i)); }
};

/// Deterministic per-purpose seed derivation from one root seed.
std::uint64_t derive_seed(std::uint64_t root, std::string_view purpose, std::uint64_t index = 0);

/// Throws InfeasibleGram unless gram_target is symmetric, unit-diagonal, PSD, |entries| <= 1.
SyntheticWorld make_world(std::size_t dimension, std::size_t n_traits, const MatrixXd& gram_target,
                          const WorldParams& params, std::uint64_t seed);

/// Appends a trait with the given unit direction; calibrates its link unless a margin is supplied.
std::size_t add_trait(SyntheticWorld& world, const VectorXd& direction, const TraitParams& params,
                      std::optional<double> calibration_margin = std::nullopt);

/// Same world with a different residual bound, links recalibrated.
SyntheticWorld with_beta(const SyntheticWorld& world, double beta);

VectorXd persona_shift(const VectorXd& h, std::size_t trait, const SyntheticWorld& world);

/// Population persona vector v_p^i: mean shift over the typical region.
VectorXd persona_vector(const SyntheticWorld& world, std::size_t trait);

double margin(const VectorXd& h, std::size_t trait, const SyntheticWorld& world);
double loss_at_margin(double g, std::size_t trait, const SyntheticWorld& world);
double synthetic_loss(const VectorXd& h, std::size_t trait, const SyntheticWorld& world);

/// h + v_p^i + lambda v_p^j; throws SameTrait when i == j.
VectorXd compose(const VectorXd& h, std::size_t i, std::size_t j, double lambda,
                 const SyntheticWorld& world);

/// Antithetic samples from the typical region (ball of typical_radius around the mean).
std::vector<VectorXd> sample_typical_states(const SyntheticWorld& world, std::size_t n,
                                            std::uint64_t seed);

/// Mean loss of trait over states shifted by a common vector.
double population_loss(const std::vector<VectorXd>& states, const VectorXd& shift,
                       std::size_t trait, const SyntheticWorld& world);

struct ClauseResult {
  std::string clause;
  nlohmann::ordered_json parameters = nlohmann::ordered_json::object();
  double measured = 0.0;
  nlohmann::ordered_json bound;
  bool pass = false;
};

struct CheckReport {
  std::string check;
  std::vector<ClauseResult> clauses;
  nlohmann::ordered_json constants = nlohmann::ordered_json::object();

  bool passed() const;
  const ClauseResult* find(std::string_view clause) const;
};

nlohmann::ordered_json to_json(const ClauseResult& c);
nlohmann::ordered_json to_json(const CheckReport& r);

/// How the O(.) terms in the claims are turned into numeric tolerances.
struct Tolerances {
  double eps_factor = 2.0;          // O(eps)   -> eps_factor * eps
  double beta_factor = 1.0;         // O(beta)  -> beta_factor * beta (times |lambda| where stated)
  double kappa_factor = 1.0;        // O(kappa0^2) -> kappa_factor * kappa0^2
  double threshold_constant = 1.0;  // C in lambda >= 1 - alpha + C beta
};

std::vector<double> lambda_grid(double lo, double hi, double step);

/// Multi-persona composition between traits 0 and 1 of a two-trait world.
CheckReport check_composition(const SyntheticWorld& world, double alpha,
                              const std::vector<double>& lambdas,
                              const std::vector<VectorXd>& states, const Tolerances& tol,
                              double tradeoff_floor);

enum class NegationRegime { Orthogonal, Contradictory, MildlyAligned };
std::string_view to_string(NegationRegime r);
std::optional<NegationRegime> parse_regime(std::string_view s);

struct NegationParams {
  double floor = 0.2;           // c0
  double probe_lambda = -2.0;   // orthogonal regime probe point
  double mild_extent = 0.1;     // c3
  double mild_weakening = 1.0 / 3.0;
  double interval_step = 0.005; // c2 search resolution
};

CheckReport check_negation(const SyntheticWorld& world, NegationRegime regime,
                           const std::vector<double>& lambdas,
                           const std::vector<VectorXd>& states, const Tolerances& tol,
                           const NegationParams& params);

/// Out-of-domain direction mu* = sum gamma_i mu_i + kappa mu_perp with combination weights lambda.
struct OodSpec {
  VectorXd gamma;
  double kappa = 0.0;
  double kappa0 = 0.0;
  VectorXd lambda;
  double margin = 0.1;  // c in the weight conditions
  double c1 = 1.0;      // C_1 in |lambda_i| beta <= C_1 c
};

/// gamma = sqrt(1 - kappa^2) * gamma_direction / ||gamma_direction||.
OodSpec make_ood_spec(const VectorXd& gamma_direction, double kappa, double kappa0,
                      const VectorXd& lambda, double margin, double c1 = 1.0);

/// Smallest multiple of gamma meeting both margin conditions with equality in the tighter one.
VectorXd minimal_ood_weights(const VectorXd& gamma, double margin);

VectorXd ood_direction(const OodSpec& spec, const SyntheticWorld& world);

/// Throws ConditionViolated naming the first failed weight condition.
void verify_ood_conditions(const OodSpec& spec, double beta);

CheckReport check_ood_synthesis(const SyntheticWorld& world, const OodSpec& spec,
                                const std::vector<VectorXd>& states, const Tolerances& tol);

/// Sparse MLP row update: aligned rows gamma_t mu_i on S_i, small off-rows elsewhere.
struct SyntheticMlpUpdate {
  std::size_t trait = 0;
  std::size_t rows = 0;
  double rho = 0.25;
  double c_lower = 1.0;
  double c_upper = 1.0;
  std::vector<bool> aligned;
  MatrixXd delta_rows;  // m x d
  MatrixXd keys;        // m x d, unit rows
};

SyntheticMlpUpdate make_mlp_update(const SyntheticWorld& world, std::size_t trait, std::size_t rows,
                                   double rho, double c_lower, double c_upper, std::uint64_t seed,
                                   double off_row_fraction = 1.0);

/// m^{-1/2} sum_t delta_row_t <key_t, h>, optionally restricted to the aligned rows.
VectorXd mlp_shift(const SyntheticMlpUpdate& mlp, const VectorXd& h, bool pruned);

CheckReport check_pruning(const SyntheticWorld& world, const SyntheticMlpUpdate& mlp,
                          const std::vector<VectorXd>& states);

/// Rank-one structure of the amplifier at beta = 0 and the residual bound at beta > 0.
CheckReport check_rank_one(const SyntheticWorld& world, const std::vector<VectorXd>& states,
                           double residual_beta, std::size_t residual_samples,
                           std::uint64_t seed);

}  // namespace pvni::theory
