#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pvni/types.hpp"

namespace pvni {

inline constexpr int kReportFormatVersion = 1;

enum class Method { IpipBffm50, IpipNeo120, OpenEnded, Pvni };
std::string_view to_string(Method m);
std::optional<Method> parse_method(std::string_view s);

/// Mean and sample standard deviation (n - 1); std is absent for a single score.
struct VariantStats {
  double mean = 0.0;
  std::optional<double> std;
  std::size_t n = 0;
};

/// Throws EmptyScores.
VariantStats variant_stats(std::span<const double> scores);

struct PublishedStats {
  double mean = 0.0;
  std::optional<double> std;
  std::optional<std::size_t> n;
};

/// One method's scores for a (model, trait, variant_kind) cell. Either raw per-variant
/// scores or, for external baselines, already-published summary numbers.
struct MethodResult {
  Method method = Method::Pvni;
  std::string model;
  Trait trait = Trait::O;
  VariantKind variant_kind = VariantKind::Questionnaire;
  std::vector<double> scores;
  std::optional<PublishedStats> published;
};

struct TableRow {
  VariantKind variant_kind = VariantKind::Questionnaire;
  std::string model;
  Trait trait = Trait::O;
  Method method = Method::Pvni;
  double mean = 0.0;
  std::optional<double> std;
  std::optional<std::size_t> n;
  std::vector<double> scores;  // empty for published rows
  bool lowest = false;
  std::string note;
};

struct StabilityTable {
  std::vector<TableRow> rows;  // sorted by (variant_kind, model, trait, method)
};

/// Throws DuplicateKey when two results share (variant_kind, model, trait, method).
/// Lowest-variability flags are filled in.
StabilityTable build_table(std::span<const MethodResult> results);

struct VariabilityFlag {
  VariantKind variant_kind = VariantKind::Questionnaire;
  std::string model;
  Trait trait = Trait::O;
  Method method = Method::Pvni;
  std::string note;  // "no-comparison" when the group has one method
};

/// Marks the minimal-std method per (variant_kind, model, trait); ties are all marked.
std::vector<VariabilityFlag> lowest_variability_flags(const StabilityTable& table);

/// "83.55 ± 0.82"; just the mean when std is absent.
std::string render_cell(double mean, std::optional<double> std);

struct ParsedCell {
  double mean = 0.0;
  std::optional<double> std;
};
std::optional<ParsedCell> parse_cell(std::string_view cell);

/// Median-exclusive (Tukey) quartiles, whiskers at 1.5 IQR clipped to the data.
struct BoxStats {
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double whisker_low = 0.0;
  double whisker_high = 0.0;
  std::vector<double> outliers;
};
BoxStats box_stats(std::span<const double> scores);

enum class PlotKind { Radar, Box };
nlohmann::ordered_json emit_plot_data(const StabilityTable& table, PlotKind kind);

/// baselines.jsonl: one object per line with method, model, trait, variant_kind and
/// either "scores" or "mean" (+ optional "std", "n").
std::vector<MethodResult> load_baselines(const std::filesystem::path& path);

/// PVNI results gathered from run.json documents written by `pvni run`.
std::vector<MethodResult> pvni_results_from_runs(std::span<const nlohmann::json> run_documents);

/// CSV with a leading "# pvni format_version=... config=..." comment line.
std::string table_csv(const StabilityTable& table, const nlohmann::ordered_json& config);

}  // namespace pvni
