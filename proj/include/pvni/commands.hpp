#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pvni/errors.hpp"
#include "pvni/record_store.hpp"
#include "pvni/theory_lab.hpp"

namespace pvni {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIngestion = 3;
inline constexpr int kExitEstimation = 4;
inline constexpr int kExitTheory = 5;
inline constexpr int kExitReport = 6;

int exit_code_for(ErrorCategory category);

inline constexpr const char* kOutDirEnv = "PVNI_OUT_DIR";

struct TheoryConfig {
  std::size_t dimension = 64;
  std::size_t samples = 1000;
  double epsilon = 0.01;
  double beta = 0.0;
  double link_steepness = 3.0;
  double sample_std = 0.02;
  theory::TraitParams trait;

  std::vector<double> composition_alphas = {0.0, 0.5, -0.9};
  double tradeoff_floor = 0.2;
  double negation_alpha_contradictory = -0.5;
  double negation_alpha_mild = 0.3;
  double lambda_min = -3.0;
  double lambda_max = 3.0;
  double lambda_step = 0.05;
  theory::NegationParams negation;
  theory::Tolerances tolerances;

  std::vector<double> ood_gamma = {0.6, 0.5, 0.4, 0.3, 0.2};
  double kappa0 = 0.1;
  double ood_margin = 0.1;
  double ood_c1 = 1.0;

  std::size_t mlp_rows = 1024;
  double mlp_rho = 0.25;
  double mlp_c = 1.0;
  double mlp_C = 1.0;
  std::size_t mlp_samples = 1000;
  double residual_beta = 0.1;
  std::size_t residual_samples = 10000;
};

struct Config {
  std::optional<long long> layer;
  std::optional<double> degeneracy_tolerance;
  std::uint64_t seed = 1;

  std::optional<std::filesystem::path> activations;
  std::optional<std::filesystem::path> judgements;
  std::optional<std::filesystem::path> baselines;
  std::optional<std::filesystem::path> runs_dir;
  std::filesystem::path out_dir = ".";

  std::string check = "all";
  std::optional<std::filesystem::path> theory_out;
  std::optional<std::filesystem::path> table_out;
  std::optional<std::filesystem::path> plot_out;

  TheoryConfig theory;
};

/// Defaults, then PVNI_OUT_DIR, then the file. Unknown keys throw ConfigError.
/// Relative paths in the file are taken relative to the file's directory.
Config load_config(const std::optional<std::filesystem::path>& file);
void apply_config_json(Config& config, const nlohmann::json& j,
                       const std::filesystem::path& base_dir);
void validate_config(const Config& config);

/// Everything that determines outputs; the output directory itself is left out.
nlohmann::ordered_json config_snapshot(const Config& config);

struct ValidateOptions {
  std::vector<std::filesystem::path> files;
  std::optional<RecordKind> kind;  // detected per file when unset
};
int cmd_validate(const ValidateOptions& options, std::ostream& out);

int cmd_run(const Config& config, std::ostream& out);
int cmd_theory(const Config& config, std::ostream& out);
int cmd_report(const Config& config, std::ostream& out);

/// Theory checks selected by name ("composition", "negation", "ood", "pruning", "all").
std::vector<theory::CheckReport> run_theory_checks(const Config& config);

}  // namespace pvni
