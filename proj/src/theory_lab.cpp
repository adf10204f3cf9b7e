#include "pvni/theory_lab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "pvni/errors.hpp"

namespace pvni::theory {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

VectorXd gaussian_vector(std::mt19937_64& rng, std::size_t d, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  VectorXd v(static_cast<Eigen::Index>(d));
  for (Eigen::Index k = 0; k < v.size(); ++k) v(k) = normal(rng);
  return v;
}

MatrixXd gaussian_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  // Column-major fill in a fixed order keeps the draw sequence reproducible.
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = normal(rng);
  return m;
}

MatrixXd orthonormal_columns(std::mt19937_64& rng, std::size_t d, std::size_t k) {
  Eigen::HouseholderQR<MatrixXd> qr(gaussian_matrix(rng, d, k));
  return qr.householderQ() * MatrixXd::Identity(static_cast<Eigen::Index>(d),
                                                static_cast<Eigen::Index>(k));
}

void validate_gram(const MatrixXd& g, std::size_t n) {
  if (static_cast<std::size_t>(g.rows()) != n || static_cast<std::size_t>(g.cols()) != n) {
    throw InfeasibleGram("Gram target must be " + std::to_string(n) + "x" + std::to_string(n));
  }
  for (Eigen::Index r = 0; r < g.rows(); ++r) {
    if (std::abs(g(r, r) - 1.0) > 1e-12) throw InfeasibleGram("diagonal entries must equal 1");
    for (Eigen::Index c = 0; c < g.cols(); ++c) {
      if (!std::isfinite(g(r, c))) throw InfeasibleGram("entries must be finite");
      if (std::abs(g(r, c) - g(c, r)) > 1e-12) throw InfeasibleGram("matrix is not symmetric");
      if (std::abs(g(r, c)) > 1.0 + 1e-12) throw InfeasibleGram("entries must lie in [-1, 1]");
    }
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(g);
  const double min_eig = eig.eigenvalues().minCoeff();
  if (min_eig < -1e-10) {
    throw InfeasibleGram("not positive semidefinite (min eigenvalue " + std::to_string(min_eig) +
                         ")");
  }
}

void calibrate(SyntheticWorld& world, std::size_t i) {
  const TraitParams& p = world.traits[i];
  const VectorXd mu = world.direction(i);
  const VectorXd vp = persona_vector(world, i);
  const double t = world.mean.dot(mu);
  const double along = vp.dot(mu);
  const double off = std::abs(vp.dot(world.curvature_direction));
  const double r = world.typical_radius;
  // Lowest margin any adapted typical state h + v_p^i can reach.
  world.calibration_margin[i] =
      p.gain * (t - r + along) - 0.5 * p.curvature * (r + off) * (r + off);
}

MatrixXd residual_map(std::uint64_t seed, std::size_t i, std::size_t d) {
  std::mt19937_64 rng(derive_seed(seed, "residual", i));
  const MatrixXd q = orthonormal_columns(rng, d, d);
  std::uniform_real_distribution<double> scale(0.25, 0.95);
  VectorXd s(static_cast<Eigen::Index>(d));
  for (Eigen::Index k = 0; k < s.size(); ++k) s(k) = scale(rng);
  return q * s.asDiagonal();
}

double cosine_abs(const VectorXd& a, const VectorXd& b) {
  return std::abs(a.dot(b)) / (a.norm() * b.norm());
}

ClauseResult clause(std::string name, double measured, nlohmann::ordered_json bound, bool pass,
                    nlohmann::ordered_json params = nlohmann::ordered_json::object()) {
  ClauseResult c;
  c.clause = std::move(name);
  c.measured = measured;
  c.bound = std::move(bound);
  c.pass = pass;
  c.parameters = std::move(params);
  return c;
}

nlohmann::ordered_json number_or_null(double x) {
  return std::isfinite(x) ? nlohmann::ordered_json(x) : nlohmann::ordered_json(nullptr);
}

struct PairLoss {
  double li;
  double lj;
};

// Losses of traits 0 and 1 at h + v_p^0 + lambda v_p^1.
class PairEvaluator {
 public:
  PairEvaluator(const SyntheticWorld& world, const std::vector<VectorXd>& states)
      : world_(world), states_(states), vi_(persona_vector(world, 0)), vj_(persona_vector(world, 1)) {}

  PairLoss operator()(double lambda) const {
    const VectorXd shift = vi_ + lambda * vj_;
    return {population_loss(states_, shift, 0, world_), population_loss(states_, shift, 1, world_)};
  }

 private:
  const SyntheticWorld& world_;
  const std::vector<VectorXd>& states_;
  VectorXd vi_;
  VectorXd vj_;
};

double measured_alpha(const SyntheticWorld& world) {
  return std::clamp(world.direction(0).dot(world.direction(1)), -1.0, 1.0);
}

void require_pair(const SyntheticWorld& world) {
  if (world.num_traits() < 2) throw SameTrait("pair checks need a world with two traits");
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t root, std::string_view purpose, std::uint64_t index) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the purpose label
  for (char c : purpose) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(splitmix64(root) ^ h) ^ index);
}

SyntheticWorld make_world(std::size_t dimension, std::size_t n_traits, const MatrixXd& gram_target,
                          const WorldParams& params, std::uint64_t seed) {
  if (n_traits == 0) throw InfeasibleGram("at least one trait is required");
  validate_gram(gram_target, n_traits);
  if (dimension < n_traits + 2) {
    throw InfeasibleGram("dimension " + std::to_string(dimension) + " too small for " +
                         std::to_string(n_traits) + " traits plus two auxiliary directions");
  }

  SyntheticWorld w;
  w.dimension = dimension;
  w.gram_target = gram_target;
  w.beta = params.beta;
  w.epsilon = params.epsilon;
  w.link_steepness = params.link_steepness;
  w.sample_std = params.sample_std;
  w.typical_radius = params.typical_radius > 0.0
                         ? params.typical_radius
                         : params.sample_std * (std::sqrt(static_cast<double>(dimension)) + 3.0);
  w.seed = seed;

  std::mt19937_64 rng(derive_seed(seed, "basis"));
  const MatrixXd basis = orthonormal_columns(rng, dimension, n_traits + 2);
  const auto n = static_cast<Eigen::Index>(n_traits);

  // Mix an orthonormal frame so that directions^T directions equals the target.
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram_target);
  const VectorXd lambdas = eig.eigenvalues().cwiseMax(0.0);
  const MatrixXd factor = lambdas.cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
  w.directions = basis.leftCols(n) * factor;
  w.residual_direction = basis.col(n);
  w.curvature_direction = basis.col(n + 1);

  // m0 with <m0, mu_i> = target projection (least squares when the Gram is singular).
  VectorXd inv = VectorXd::Zero(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    if (lambdas(k) > 1e-12) inv(k) = 1.0 / lambdas(k);
  }
  const VectorXd targets = VectorXd::Constant(n, params.trait.target_projection);
  const VectorXd weights = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose() *
                           targets;
  w.mean = w.directions * weights;

  w.traits.assign(n_traits, params.trait);
  w.calibration_margin.assign(n_traits, 0.0);
  for (std::size_t i = 0; i < n_traits; ++i) {
    w.residual_maps.push_back(residual_map(seed, i, dimension));
  }
  for (std::size_t i = 0; i < n_traits; ++i) calibrate(w, i);
  return w;
}

std::size_t add_trait(SyntheticWorld& world, const VectorXd& direction, const TraitParams& params,
                      std::optional<double> calibration_margin) {
  const std::size_t i = world.num_traits();
  world.directions.conservativeResize(Eigen::NoChange, static_cast<Eigen::Index>(i + 1));
  world.directions.col(static_cast<Eigen::Index>(i)) = direction;
  world.traits.push_back(params);
  world.residual_maps.push_back(residual_map(world.seed, i, world.dimension));
  world.calibration_margin.push_back(0.0);
  if (calibration_margin) {
    world.calibration_margin[i] = *calibration_margin;
  } else {
    calibrate(world, i);
  }
  return i;
}

SyntheticWorld with_beta(const SyntheticWorld& world, double beta) {
  SyntheticWorld w = world;
  w.beta = beta;
  for (std::size_t i = 0; i < w.num_traits(); ++i) calibrate(w, i);
  return w;
}

VectorXd persona_shift(const VectorXd& h, std::size_t trait, const SyntheticWorld& world) {
  const VectorXd mu = world.direction(trait);
  VectorXd out = h + world.traits[trait].amplifier * h.dot(mu) * mu;
  if (world.beta != 0.0) out += world.beta * (world.residual_maps[trait] * h);
  return out;
}

VectorXd persona_vector(const SyntheticWorld& world, std::size_t trait) {
  return persona_shift(world.mean, trait, world) - world.mean;
}

double margin(const VectorXd& h, std::size_t trait, const SyntheticWorld& world) {
  const TraitParams& p = world.traits[trait];
  const double off = (h - world.mean).dot(world.curvature_direction);
  return p.gain * h.dot(world.directions.col(static_cast<Eigen::Index>(trait))) -
         0.5 * p.curvature * off * off;
}

double loss_at_margin(double g, std::size_t trait, const SyntheticWorld& world) {
  // Logistic in the margin, pinned so the calibration margin maps to exactly epsilon.
  const double eps = world.epsilon;
  const double x = world.link_steepness * (g - world.calibration_margin[trait]);
  if (x == 0.0) return eps;
  const double loss = eps / (eps + (1.0 - eps) * std::exp(x));
  return std::clamp(loss, 0.0, 1.0);
}

double synthetic_loss(const VectorXd& h, std::size_t trait, const SyntheticWorld& world) {
  return loss_at_margin(margin(h, trait, world), trait, world);
}

VectorXd compose(const VectorXd& h, std::size_t i, std::size_t j, double lambda,
                 const SyntheticWorld& world) {
  if (i == j) throw SameTrait("composition needs two distinct traits, got " + std::to_string(i));
  return h + persona_vector(world, i) + lambda * persona_vector(world, j);
}

std::vector<VectorXd> sample_typical_states(const SyntheticWorld& world, std::size_t n,
                                            std::uint64_t seed) {
  std::vector<VectorXd> out;
  out.reserve(n);
  for (std::size_t k = 0; out.size() < n; ++k) {
    std::mt19937_64 rng(derive_seed(seed, "typical", k));
    VectorXd z = gaussian_vector(rng, world.dimension, world.sample_std);
    for (int attempt = 0; z.norm() > world.typical_radius && attempt < 1000; ++attempt) {
      z = gaussian_vector(rng, world.dimension, world.sample_std);
    }
    if (z.norm() > world.typical_radius) z *= 0.999 * world.typical_radius / z.norm();
    out.push_back(world.mean + z);
    if (out.size() < n) out.push_back(world.mean - z);
  }
  return out;
}

double population_loss(const std::vector<VectorXd>& states, const VectorXd& shift,
                       std::size_t trait, const SyntheticWorld& world) {
  if (states.empty()) return kNaN;
  double acc = 0.0;
  for (const auto& h : states) acc += synthetic_loss(h + shift, trait, world);
  return acc / static_cast<double>(states.size());
}

bool CheckReport::passed() const {
  return !clauses.empty() &&
         std::all_of(clauses.begin(), clauses.end(), [](const auto& c) { return c.pass; });
}

const ClauseResult* CheckReport::find(std::string_view name) const {
  for (const auto& c : clauses) {
    if (c.clause == name) return &c;
  }
  return nullptr;
}

nlohmann::ordered_json to_json(const ClauseResult& c) {
  return {{"clause", c.clause},
          {"parameters", c.parameters},
          {"measured", number_or_null(c.measured)},
          {"bound", c.bound},
          {"pass", c.pass}};
}

nlohmann::ordered_json to_json(const CheckReport& r) {
  nlohmann::ordered_json clauses = nlohmann::ordered_json::array();
  for (const auto& c : r.clauses) clauses.push_back(to_json(c));
  return {{"check", r.check}, {"pass", r.passed()}, {"constants", r.constants},
          {"clauses", std::move(clauses)}};
}

std::vector<double> lambda_grid(double lo, double hi, double step) {
  std::vector<double> out;
  const auto first = static_cast<long long>(std::ceil(lo / step - 1e-9));
  const auto last = static_cast<long long>(std::floor(hi / step + 1e-9));
  for (long long k = first; k <= last; ++k) out.push_back(static_cast<double>(k) * step);
  return out;
}

CheckReport check_composition(const SyntheticWorld& world, double alpha,
                              const std::vector<double>& lambdas,
                              const std::vector<VectorXd>& states, const Tolerances& tol,
                              double tradeoff_floor) {
  require_pair(world);
  CheckReport report;
  report.check = "composition";
  const PairEvaluator eval(world, states);
  const double a = measured_alpha(world);
  const double beta = world.beta;
  report.constants["alpha_target"] = alpha;
  report.constants["alpha_measured"] = a;
  report.constants["beta"] = beta;
  report.constants["epsilon"] = world.epsilon;

  std::vector<PairLoss> losses;
  losses.reserve(lambdas.size());
  for (double l : lambdas) losses.push_back(eval(l));

  if (alpha >= 0.0) {
    const double threshold = 1.0 - a + tol.threshold_constant * beta;
    const double bound_i = tol.eps_factor * world.epsilon;
    const double bound_j = tol.eps_factor * world.epsilon + tol.beta_factor * beta;
    double worst_i = -std::numeric_limits<double>::infinity();
    double worst_j = -std::numeric_limits<double>::infinity();
    double at_i = kNaN;
    double at_j = kNaN;
    std::size_t covered = 0;
    for (std::size_t k = 0; k < lambdas.size(); ++k) {
      if (lambdas[k] < threshold - 1e-9) continue;
      ++covered;
      const double slack_i = losses[k].li - tol.beta_factor * std::abs(lambdas[k]) * beta;
      if (slack_i > worst_i) { worst_i = slack_i; at_i = lambdas[k]; }
      if (losses[k].lj > worst_j) { worst_j = losses[k].lj; at_j = lambdas[k]; }
    }
    const bool any = covered > 0;
    report.clauses.push_back(clause("composition.aligned.loss_i", any ? worst_i : kNaN, bound_i,
                                    any && worst_i <= bound_i,
                                    {{"alpha", a}, {"lambda_threshold", threshold},
                                     {"grid_points", covered}, {"worst_lambda", number_or_null(at_i)}}));
    report.clauses.push_back(clause("composition.aligned.loss_j", any ? worst_j : kNaN, bound_j,
                                    any && worst_j <= bound_j,
                                    {{"alpha", a}, {"lambda_threshold", threshold},
                                     {"grid_points", covered}, {"worst_lambda", number_or_null(at_j)}}));

    // Smallest grid lambda from which every larger grid point satisfies both bounds.
    double measured_threshold = kNaN;
    for (std::size_t k = lambdas.size(); k-- > 0;) {
      const bool ok = losses[k].li <= bound_i + tol.beta_factor * std::abs(lambdas[k]) * beta &&
                      losses[k].lj <= bound_j;
      if (!ok) break;
      measured_threshold = lambdas[k];
    }
    report.constants["lambda_threshold_measured"] = number_or_null(measured_threshold);
    report.constants["threshold_constant_measured"] =
        beta > 0.0 ? number_or_null((measured_threshold - (1.0 - a)) / beta)
                   : nlohmann::ordered_json(nullptr);
  } else {
    double best = std::numeric_limits<double>::infinity();
    double at = kNaN;
    for (std::size_t k = 0; k < lambdas.size(); ++k) {
      const double worst = std::max(losses[k].li, losses[k].lj);
      if (worst < best) { best = worst; at = lambdas[k]; }
    }
    report.clauses.push_back(clause(
        "composition.contradictory.tradeoff", best, tradeoff_floor, best >= tradeoff_floor,
        {{"alpha", a}, {"lambda_min", lambdas.front()}, {"lambda_max", lambdas.back()},
         {"argmin_lambda", number_or_null(at)}}));
  }
  return report;
}

std::string_view to_string(NegationRegime r) {
  switch (r) {
    case NegationRegime::Orthogonal: return "orthogonal";
    case NegationRegime::Contradictory: return "contradictory";
    case NegationRegime::MildlyAligned: return "mildly_aligned";
  }
  return "?";
}

std::optional<NegationRegime> parse_regime(std::string_view s) {
  if (s == "orthogonal") return NegationRegime::Orthogonal;
  if (s == "contradictory") return NegationRegime::Contradictory;
  if (s == "mildly_aligned") return NegationRegime::MildlyAligned;
  return std::nullopt;
}

CheckReport check_negation(const SyntheticWorld& world, NegationRegime regime,
                           const std::vector<double>& lambdas,
                           const std::vector<VectorXd>& states, const Tolerances& tol,
                           const NegationParams& params) {
  require_pair(world);
  const double a = measured_alpha(world);
  constexpr double kZero = 1e-8;
  const bool consistent =
      (regime == NegationRegime::Orthogonal && std::abs(a) <= kZero) ||
      (regime == NegationRegime::Contradictory && a < -kZero) ||
      (regime == NegationRegime::MildlyAligned && a > kZero && a < 1.0 - params.floor);
  if (!consistent) {
    throw RegimeMismatch("world alpha " + std::to_string(a) + " inconsistent with regime " +
                         std::string(to_string(regime)));
  }

  CheckReport report;
  report.check = "negation." + std::string(to_string(regime));
  report.constants["alpha_measured"] = a;
  report.constants["beta"] = world.beta;
  report.constants["c0"] = params.floor;
  const PairEvaluator eval(world, states);
  const double eps_bound = tol.eps_factor * world.epsilon;
  const double beta = world.beta;

  // Negation: preserve i, suppress j.
  auto deletes_j = [&](double l, const PairLoss& p) {
    return p.li <= eps_bound + tol.beta_factor * std::abs(l) * beta && p.lj >= params.floor;
  };

  switch (regime) {
    case NegationRegime::Orthogonal: {
      double c1 = kNaN;
      for (double l : lambdas) {
        if (l > 0.0) break;
        if (!deletes_j(l, eval(l))) break;
        c1 = 0.0 - l;
      }
      report.constants["c1_measured"] = number_or_null(c1);
      report.clauses.push_back(clause("negation.orthogonal.exists_c1", c1, "finite",
                                      std::isfinite(c1),
                                      {{"lambda_min", lambdas.front()}}));
      const double l = params.probe_lambda;
      const PairLoss p = eval(l);
      report.clauses.push_back(clause("negation.orthogonal.loss_j_suppressed", p.lj, params.floor,
                                      p.lj >= params.floor, {{"lambda", l}}));
      const double bound_i = eps_bound + tol.beta_factor * std::abs(l) * beta;
      report.clauses.push_back(clause("negation.orthogonal.loss_i_preserved", p.li, bound_i,
                                      p.li <= bound_i, {{"lambda", l}}));
      break;
    }
    case NegationRegime::Contradictory: {
      auto interval = [&](double c2) {
        return std::pair{-c2 / (a * a), c2 / std::abs(a)};
      };
      auto interval_ok = [&](double c2) {
        const auto [lo, hi] = interval(c2);
        constexpr int kPoints = 41;
        for (int q = 0; q < kPoints; ++q) {
          const double l = lo + (hi - lo) * q / (kPoints - 1);
          if (!deletes_j(l, eval(l))) return false;
        }
        for (double l : lambdas) {
          if (l >= lo && l <= hi && !deletes_j(l, eval(l))) return false;
        }
        return true;
      };
      double c2 = 0.0;
      for (int q = 1; q <= 400; ++q) {
        const double cand = q * params.interval_step;
        if (!interval_ok(cand)) break;
        c2 = cand;
      }
      const auto [lo, hi] = interval(c2);
      report.constants["c2_measured"] = c2;
      report.constants["interval"] = {lo, hi};
      report.clauses.push_back(clause("negation.contradictory.interval_nonempty", c2, "> 0", c2 > 0.0,
                                      {{"interval_lo", lo}, {"interval_hi", hi}}));
      std::size_t failures = 0;
      std::size_t points = 0;
      if (c2 > 0.0) {
        for (double l : lambdas) {
          if (l < lo || l > hi) continue;
          ++points;
          if (!deletes_j(l, eval(l))) ++failures;
        }
      }
      report.clauses.push_back(clause("negation.contradictory.grid_points_pass",
                                      static_cast<double>(failures), 0,
                                      c2 > 0.0 && failures == 0,
                                      {{"grid_points", points}}));
      break;
    }
    case NegationRegime::MildlyAligned: {
      const double bound_i = eps_bound + tol.beta_factor * beta;
      const double floor_j = params.mild_weakening * a - tol.beta_factor * beta;
      auto weakens = [&](const PairLoss& p) { return p.li <= bound_i && p.lj >= floor_j; };
      double worst_i = 0.0;
      double min_j = std::numeric_limits<double>::infinity();
      const auto grid = lambda_grid(0.0, params.mild_extent, params.mild_extent / 10.0);
      for (double l : grid) {
        const PairLoss p = eval(l);
        worst_i = std::max(worst_i, p.li);
        min_j = std::min(min_j, p.lj);
      }
      double c3 = kNaN;
      for (double l : lambda_grid(0.0, 2.0, 0.01)) {
        if (!weakens(eval(l))) break;
        c3 = l;
      }
      report.constants["c3_measured"] = number_or_null(c3);
      const nlohmann::ordered_json range = {{"lambda_lo", 0.0}, {"lambda_hi", params.mild_extent},
                                            {"grid_points", grid.size()}};
      report.clauses.push_back(
          clause("negation.mild.loss_i_preserved", worst_i, bound_i, worst_i <= bound_i, range));
      report.clauses.push_back(
          clause("negation.mild.loss_j_weakened", min_j, floor_j, min_j >= floor_j, range));
      break;
    }
  }
  return report;
}

OodSpec make_ood_spec(const VectorXd& gamma_direction, double kappa, double kappa0,
                      const VectorXd& lambda, double margin, double c1) {
  const double n = gamma_direction.norm();
  if (!(n > 0.0)) throw ConditionViolated("gamma direction must be nonzero");
  if (std::abs(kappa) >= 1.0) throw ConditionViolated("|kappa| must be < 1");
  OodSpec s;
  s.gamma = std::sqrt(1.0 - kappa * kappa) * gamma_direction / n;
  s.kappa = kappa;
  s.kappa0 = kappa0;
  s.lambda = lambda;
  s.margin = margin;
  s.c1 = c1;
  return s;
}

VectorXd minimal_ood_weights(const VectorXd& gamma, double margin) {
  const double s1 = gamma.squaredNorm();
  const double s2 = gamma.array().cube().sum();
  if (!(s1 > 0.0) || !(s2 > 0.0)) {
    throw ConditionViolated("gamma admits no positive multiple meeting the margin conditions");
  }
  return (1.0 + margin) * std::max(1.0 / s1, 1.0 / s2) * gamma;
}

VectorXd ood_direction(const OodSpec& spec, const SyntheticWorld& world) {
  VectorXd dir = spec.kappa * world.residual_direction;
  for (Eigen::Index i = 0; i < spec.gamma.size(); ++i) dir += spec.gamma(i) * world.directions.col(i);
  return dir;
}

void verify_ood_conditions(const OodSpec& spec, double beta) {
  if (spec.lambda.size() != spec.gamma.size()) {
    throw ConditionViolated("lambda and gamma lengths differ");
  }
  if (std::abs(spec.kappa) > spec.kappa0 + 1e-15) {
    throw ConditionViolated("|kappa| = " + std::to_string(std::abs(spec.kappa)) +
                            " exceeds kappa0 = " + std::to_string(spec.kappa0));
  }
  const double first = spec.lambda.dot(spec.gamma);
  const double second = spec.lambda.dot(spec.gamma.cwiseProduct(spec.gamma));
  const double target = 1.0 + spec.margin;
  if (first < target - 1e-12) {
    throw ConditionViolated("sum lambda_i gamma_i = " + std::to_string(first) + " < 1 + c");
  }
  if (second < target - 1e-12) {
    throw ConditionViolated("sum lambda_i gamma_i^2 = " + std::to_string(second) + " < 1 + c");
  }
  const double largest = spec.lambda.cwiseAbs().maxCoeff();
  if (largest * beta > spec.c1 * spec.margin) {
    throw ConditionViolated("max |lambda_i| beta = " + std::to_string(largest * beta) +
                            " exceeds C1 c");
  }
}

CheckReport check_ood_synthesis(const SyntheticWorld& world, const OodSpec& spec,
                                const std::vector<VectorXd>& states, const Tolerances& tol) {
  const auto n = spec.gamma.size();
  if (static_cast<std::size_t>(n) > world.num_traits()) {
    throw ConditionViolated("gamma has more entries than the world has traits");
  }
  const MatrixXd basis = world.directions.leftCols(n);
  if (!(basis.transpose() * basis).isIdentity(1e-10)) {
    throw ConditionViolated("in-domain trait directions are not orthonormal");
  }
  verify_ood_conditions(spec, world.beta);
  const VectorXd gamma_dir = spec.gamma / spec.gamma.norm();
  if (spec.kappa0 > 0.0) {
    // Weights stay fixed while kappa doubles, so the conditions must hold there too.
    OodSpec widest = make_ood_spec(gamma_dir, 2.0 * spec.kappa0, 2.0 * spec.kappa0, spec.lambda,
                                   spec.margin, spec.c1);
    verify_ood_conditions(widest, world.beta);
  }

  VectorXd shift = VectorXd::Zero(static_cast<Eigen::Index>(world.dimension));
  double along = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const VectorXd vp = persona_vector(world, static_cast<std::size_t>(i));
    shift += spec.lambda(i) * vp;
    along += vp.dot(world.directions.col(i));
  }
  along /= static_cast<double>(n);

  // The out-of-domain trait gets the same persona-vector length as the in-domain ones;
  // its link is calibrated once, on the kappa = 0 direction.
  SyntheticWorld base = world;
  const VectorXd dir0 = basis * gamma_dir;
  const double t_star = world.mean.dot(dir0);
  if (!(t_star > 0.0)) throw ConditionViolated("base state has no positive projection on mu*");
  TraitParams star = world.traits.front();
  star.amplifier = along / t_star;
  star.target_projection = t_star;
  const std::size_t idx = add_trait(base, dir0, star);
  const double g_cal = base.calibration_margin[idx];

  auto loss_at_kappa = [&](double kappa) {
    SyntheticWorld w = world;
    const OodSpec s = make_ood_spec(gamma_dir, kappa, std::abs(kappa), spec.lambda, spec.margin,
                                    spec.c1);
    const std::size_t k = add_trait(w, ood_direction(s, w), star, g_cal);
    return population_loss(states, shift, k, w);
  };

  CheckReport report;
  report.check = "ood";
  report.constants["beta"] = world.beta;
  report.constants["kappa0"] = spec.kappa0;
  report.constants["sum_lambda_gamma"] = spec.lambda.dot(spec.gamma);
  report.constants["sum_lambda_gamma_sq"] = spec.lambda.dot(spec.gamma.cwiseProduct(spec.gamma));

  const double loss = loss_at_kappa(spec.kappa);
  const double bound = tol.eps_factor * world.epsilon + tol.beta_factor * world.beta +
                       tol.kappa_factor * spec.kappa0 * spec.kappa0;
  report.clauses.push_back(clause("ood.loss_bound", loss, bound, loss <= bound,
                                  {{"kappa", spec.kappa}, {"kappa0", spec.kappa0}}));

  if (spec.kappa0 > 0.0) {
    const double sign = spec.kappa < 0.0 ? -1.0 : 1.0;
    const double l0 = loss_at_kappa(0.0);
    const double l1 = loss_at_kappa(sign * spec.kappa0);
    const double l2 = loss_at_kappa(sign * 2.0 * spec.kappa0);
    const double ratio = (l2 - l0) / (l1 - l0);
    report.constants["kappa_constant_measured"] = (l1 - l0) / (spec.kappa0 * spec.kappa0);
    report.clauses.push_back(clause(
        "ood.kappa_scaling", ratio, nlohmann::ordered_json::array({2.0, 8.0}),
        std::isfinite(ratio) && ratio >= 2.0 && ratio <= 8.0,
        {{"kappa0", spec.kappa0}, {"loss_kappa_0", l0}, {"loss_kappa0", l1},
         {"loss_2kappa0", l2}}));
  }
  return report;
}

SyntheticMlpUpdate make_mlp_update(const SyntheticWorld& world, std::size_t trait, std::size_t rows,
                                   double rho, double c_lower, double c_upper, std::uint64_t seed,
                                   double off_row_fraction) {
  SyntheticMlpUpdate mlp;
  mlp.trait = trait;
  mlp.rows = rows;
  mlp.rho = rho;
  mlp.c_lower = c_lower;
  mlp.c_upper = c_upper;
  const auto d = static_cast<Eigen::Index>(world.dimension);
  const auto m = static_cast<Eigen::Index>(rows);
  mlp.delta_rows = MatrixXd::Zero(m, d);
  mlp.keys = MatrixXd::Zero(m, d);
  mlp.aligned.assign(rows, false);

  std::mt19937_64 rng(derive_seed(seed, "mlp", trait));
  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_aligned =
      std::min(rows, static_cast<std::size_t>(std::ceil(rho * static_cast<double>(rows))));
  for (std::size_t k = 0; k < n_aligned; ++k) mlp.aligned[order[k]] = true;

  const double md = static_cast<double>(rows);
  const VectorXd mu = world.direction(trait);
  const double off_norm = off_row_fraction * c_upper * std::sqrt(std::log(md)) / md;
  std::uniform_real_distribution<double> stretch(1.0, 2.0);
  for (Eigen::Index t = 0; t < m; ++t) {
    if (mlp.aligned[static_cast<std::size_t>(t)]) {
      const double gamma = c_lower / std::sqrt(md) * stretch(rng);
      mlp.delta_rows.row(t) = gamma * mu.transpose();
      mlp.keys.row(t) = mu.transpose();
    } else {
      const VectorXd dir = gaussian_vector(rng, world.dimension).normalized();
      const VectorXd key = gaussian_vector(rng, world.dimension).normalized();
      mlp.delta_rows.row(t) = off_norm * dir.transpose();
      mlp.keys.row(t) = key.transpose();
    }
  }
  return mlp;
}

VectorXd mlp_shift(const SyntheticMlpUpdate& mlp, const VectorXd& h, bool pruned) {
  const VectorXd activations = mlp.keys * h;
  VectorXd out = VectorXd::Zero(mlp.delta_rows.cols());
  for (Eigen::Index t = 0; t < mlp.delta_rows.rows(); ++t) {
    if (pruned && !mlp.aligned[static_cast<std::size_t>(t)]) continue;
    out += activations(t) * mlp.delta_rows.row(t).transpose();
  }
  return out / std::sqrt(static_cast<double>(mlp.rows));
}

CheckReport check_pruning(const SyntheticWorld& world, const SyntheticMlpUpdate& mlp,
                          const std::vector<VectorXd>& states) {
  CheckReport report;
  report.check = "pruning";
  const double md = static_cast<double>(mlp.rows);
  const double rate = std::sqrt(std::log(md) / md);
  const VectorXd mu = world.direction(mlp.trait);

  double worst = 0.0;
  double min_cos = 1.0;
  for (const auto& h : states) {
    const VectorXd full = mlp_shift(mlp, h, false);
    const VectorXd pruned = mlp_shift(mlp, h, true);
    worst = std::max(worst, (full - pruned).norm() / h.norm());
    if (pruned.norm() > 0.0) min_cos = std::min(min_cos, cosine_abs(pruned, mu));
  }
  const double envelope = world.beta + mlp.c_upper * rate;
  double gain = 0.0;
  std::size_t aligned = 0;
  for (Eigen::Index t = 0; t < mlp.delta_rows.rows(); ++t) {
    if (!mlp.aligned[static_cast<std::size_t>(t)]) continue;
    ++aligned;
    gain += mlp.delta_rows.row(t).dot(mu.transpose());
  }
  gain /= std::sqrt(md);

  report.constants["rows"] = mlp.rows;
  report.constants["aligned_rows"] = aligned;
  report.constants["rate_sqrt_log_m_over_m"] = rate;
  report.constants["envelope_constant_measured"] = worst / rate;
  report.constants["amplifier_gain"] = gain;
  report.clauses.push_back(clause("shift.pruning_envelope", worst, envelope, worst <= envelope,
                                  {{"rows", mlp.rows}, {"rho", mlp.rho}, {"C", mlp.c_upper},
                                   {"beta", world.beta}, {"samples", states.size()}}));
  report.clauses.push_back(clause("shift.pruned_rank_one", min_cos, 1.0 - 1e-10,
                                  min_cos >= 1.0 - 1e-10, {{"samples", states.size()}}));
  const double gain_floor = mlp.rho * mlp.c_lower;
  report.clauses.push_back(clause("shift.amplifier_gain", gain, gain_floor, gain >= gain_floor,
                                  {{"rho", mlp.rho}, {"c", mlp.c_lower}}));
  return report;
}

CheckReport check_rank_one(const SyntheticWorld& world, const std::vector<VectorXd>& states,
                           double residual_beta, std::size_t residual_samples,
                           std::uint64_t seed) {
  CheckReport report;
  report.check = "rank_one";
  const SyntheticWorld exact = with_beta(world, 0.0);
  double min_cos = 1.0;
  for (const auto& h : states) {
    for (std::size_t i = 0; i < exact.num_traits(); ++i) {
      const VectorXd delta = persona_shift(h, i, exact) - h;
      if (delta.norm() == 0.0) continue;
      min_cos = std::min(min_cos, cosine_abs(delta, exact.direction(i)));
    }
  }
  report.clauses.push_back(clause("shift.rank_one", min_cos, 1.0 - 1e-10,
                                  min_cos >= 1.0 - 1e-10,
                                  {{"beta", 0.0}, {"samples", states.size()}}));

  const SyntheticWorld noisy = with_beta(world, residual_beta);
  double worst = 0.0;
  for (std::size_t k = 0; k < residual_samples; ++k) {
    std::mt19937_64 rng(derive_seed(seed, "residual_probe", k));
    const VectorXd h = gaussian_vector(rng, world.dimension);
    const std::size_t i = k % noisy.num_traits();
    const VectorXd mu = noisy.direction(i);
    const VectorXd rank_one = h + noisy.traits[i].amplifier * h.dot(mu) * mu;
    worst = std::max(worst, (persona_shift(h, i, noisy) - rank_one).norm() / h.norm());
  }
  report.clauses.push_back(clause("shift.residual_bound", worst, residual_beta,
                                  worst <= residual_beta,
                                  {{"beta", residual_beta}, {"samples", residual_samples}}));
  return report;
}

}  // namespace pvni::theory
