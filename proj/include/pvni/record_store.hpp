#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "pvni/types.hpp"

namespace pvni {

/// File-level provenance, carried by an optional `{"meta": {...}}` first line.
struct Provenance {
  std::string model = "unknown";
  std::string extracted_at;
  std::string probe_position = "response_mean";
  int format_version = 1;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct ActivationRecord {
  Trait trait = Trait::O;
  Condition condition = Condition::Pos;
  VariantKind variant_kind = VariantKind::Questionnaire;
  long long variant_id = 0;
  std::string prompt_id;
  long long layer = 0;
  Vector vector;
  std::size_t line = 0;  // 1-based source line, 0 when built in memory

  VariantKey variant() const { return {variant_kind, variant_id}; }
};

struct DirectScore {
  double value = 0.0;
};
struct CandidateLogprobs {
  std::vector<double> values;  // one entry per integer token 0..100
};
using JudgePayload = std::variant<DirectScore, CandidateLogprobs>;

inline constexpr std::size_t kNumScoreTokens = 101;

struct JudgeRecord {
  Trait trait = Trait::O;
  Condition condition = Condition::Pos;
  VariantKind variant_kind = VariantKind::Questionnaire;
  long long variant_id = 0;
  std::string prompt_id;
  long long rollout_id = 0;
  JudgePayload payload = DirectScore{};
  std::size_t line = 0;

  VariantKey variant() const { return {variant_kind, variant_id}; }
};

/// Immutable, validated set of activation records sharing one dimension and layer.
class ActivationSet {
 public:
  /// Validates the members; throws SchemaError / EmptyDataset.
  ActivationSet(std::vector<ActivationRecord> records, Provenance provenance = {});

  std::span<const ActivationRecord> records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  std::size_t dimension() const { return dimension_; }
  long long layer() const { return layer_; }
  const Provenance& provenance() const { return provenance_; }
  std::vector<VariantKey> variants() const;

 private:
  std::vector<ActivationRecord> records_;
  std::size_t dimension_ = 0;
  long long layer_ = 0;
  Provenance provenance_;
};

class JudgementSet {
 public:
  JudgementSet(std::vector<JudgeRecord> records, Provenance provenance = {});

  std::span<const JudgeRecord> records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  const Provenance& provenance() const { return provenance_; }
  std::vector<VariantKey> variants() const;

 private:
  std::vector<JudgeRecord> records_;
  Provenance provenance_;
};

enum class RecordKind { Activation, Judgement };

/// One schema problem; violations are data, not failures.
struct Violation {
  std::string field;
  std::string message;
};

std::vector<Violation> validate_schema(const nlohmann::json& raw, RecordKind kind);

/// A located problem found while scanning a record file.
struct FileIssue {
  enum class Kind { Parse, Schema };
  std::size_t line = 0;
  Kind kind = Kind::Schema;
  std::string message;
};

struct FileScan {
  RecordKind kind = RecordKind::Activation;
  std::size_t record_count = 0;
  std::optional<Provenance> provenance;
  std::vector<FileIssue> issues;
};

/// Scans a whole file and reports every issue without throwing on bad content.
FileScan scan_record_file(const std::filesystem::path& path, RecordKind kind);

ActivationSet load_activation_records(const std::filesystem::path& path);
JudgementSet load_judgement_records(const std::filesystem::path& path);

/// Arithmetic mean of the matching vectors, optionally restricted to one variant group.
/// Summation order is fixed by (variant, prompt_id), so input order never matters.
Vector mean_hidden(const ActivationSet& set, Trait trait, Condition condition, long long layer,
                   std::optional<VariantKey> variant = std::nullopt);

nlohmann::ordered_json to_json(const ActivationRecord& r);
nlohmann::ordered_json to_json(const JudgeRecord& r);
nlohmann::ordered_json to_json(const Provenance& p);

/// JSONL serialization; the meta line comes first.
std::string serialize(const ActivationSet& set);
std::string serialize(const JudgementSet& set);

/// Writes the sidecar layout accepted for `vector_bin`: u64 length then f64 values, little-endian.
void append_sidecar_vector(std::vector<unsigned char>& out, std::span<const double> v);

}  // namespace pvni
