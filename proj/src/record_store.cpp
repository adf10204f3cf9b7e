#include "pvni/record_store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "pvni/errors.hpp"
#include "pvni/linalg.hpp"

namespace pvni {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

bool is_nonnegative_integer(const json& v) {
  if (v.is_number_unsigned()) return true;
  return v.is_number_integer() && v.get<long long>() >= 0;
}

bool is_nonfinite_token(const std::string& s) {
  std::string lower;
  for (char c : s) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (!lower.empty() && (lower[0] == '+' || lower[0] == '-')) lower.erase(0, 1);
  return lower == "nan" || lower == "inf" || lower == "infinity";
}

void check_string_enum(const json& raw, const char* field, bool (*ok)(std::string_view),
                       const std::string& allowed, std::vector<Violation>& out) {
  auto it = raw.find(field);
  if (it == raw.end()) {
    out.push_back({field, "missing required field"});
  } else if (!it->is_string()) {
    out.push_back({field, "must be a string"});
  } else if (!ok(it->get_ref<const std::string&>())) {
    out.push_back({field, "unknown value '" + it->get<std::string>() + "' (expected " + allowed + ")"});
  }
}

void check_index(const json& raw, const char* field, std::vector<Violation>& out) {
  auto it = raw.find(field);
  if (it == raw.end()) {
    out.push_back({field, "missing required field"});
  } else if (!is_nonnegative_integer(*it)) {
    out.push_back({field, "must be an integer >= 0"});
  }
}

void check_number_array(const json& arr, const char* field, std::vector<Violation>& out) {
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const json& x = arr[i];
    if (x.is_number()) {
      if (!std::isfinite(x.get<double>())) {
        out.push_back({field, "non-finite component at index " + std::to_string(i)});
      }
    } else if (x.is_string() && is_nonfinite_token(x.get<std::string>())) {
      out.push_back({field, "non-finite component at index " + std::to_string(i)});
    } else {
      out.push_back({field, "non-numeric component at index " + std::to_string(i)});
    }
  }
}

void check_common(const json& raw, std::vector<Violation>& out) {
  check_string_enum(
      raw, "trait", [](std::string_view s) { return parse_trait(s).has_value(); }, "O|C|E|A|N",
      out);
  check_string_enum(
      raw, "variant_kind", [](std::string_view s) { return parse_variant_kind(s).has_value(); },
      "questionnaire|roleplay", out);
  check_index(raw, "variant_id", out);
  auto pid = raw.find("prompt_id");
  if (pid == raw.end()) {
    out.push_back({"prompt_id", "missing required field"});
  } else if (!pid->is_string() || pid->get_ref<const std::string&>().empty()) {
    out.push_back({"prompt_id", "must be a non-empty string"});
  }
}

void validate_activation(const json& raw, std::vector<Violation>& out) {
  check_common(raw, out);
  check_string_enum(
      raw, "condition", [](std::string_view s) { return parse_condition(s).has_value(); },
      "pos|neg|neu", out);
  check_index(raw, "layer", out);
  const bool has_inline = raw.contains("vector");
  const bool has_bin = raw.contains("vector_bin");
  if (has_inline == has_bin) {
    out.push_back({"vector", "exactly one of 'vector' or 'vector_bin' is required"});
    return;
  }
  if (has_inline) {
    const json& v = raw["vector"];
    if (!v.is_array() || v.empty()) {
      out.push_back({"vector", "must be a non-empty array of numbers"});
    } else {
      check_number_array(v, "vector", out);
    }
  } else {
    const json& b = raw["vector_bin"];
    if (!b.is_object() || !b.contains("path") || !b["path"].is_string() ||
        !b.contains("offset") || !is_nonnegative_integer(b["offset"])) {
      out.push_back({"vector_bin", "must be {\"path\": string, \"offset\": integer >= 0}"});
    }
  }
}

void validate_judgement(const json& raw, std::vector<Violation>& out) {
  check_common(raw, out);
  auto cond = raw.find("condition");
  if (cond != raw.end() && cond->is_string() && cond->get<std::string>() == "neu") {
    out.push_back({"condition", "neutral condition is never judged; only pos/neg anchors are scored"});
  } else {
    check_string_enum(
        raw, "condition",
        [](std::string_view s) { return s == "pos" || s == "neg"; }, "pos|neg", out);
  }
  check_index(raw, "rollout_id", out);
  const bool has_score = raw.contains("score");
  const bool has_lp = raw.contains("candidate_logprobs");
  if (has_score == has_lp) {
    out.push_back({"payload", "exactly one of 'score' or 'candidate_logprobs' is required"});
    return;
  }
  if (has_score) {
    const json& s = raw["score"];
    if (!s.is_number() || !std::isfinite(s.get<double>())) {
      out.push_back({"score", "must be a finite number"});
    } else if (s.get<double>() < 0.0 || s.get<double>() > 100.0) {
      out.push_back({"score", "must lie in [0, 100]"});
    }
  } else {
    const json& lp = raw["candidate_logprobs"];
    if (!lp.is_array()) {
      out.push_back({"candidate_logprobs", "must be an array"});
    } else {
      if (lp.size() != kNumScoreTokens) {
        out.push_back({"candidate_logprobs", "must have exactly 101 entries (tokens 0..100), got " +
                                                 std::to_string(lp.size())});
      }
      check_number_array(lp, "candidate_logprobs", out);
    }
  }
}

std::string join_violations(const std::vector<Violation>& vs) {
  std::string s;
  for (const auto& v : vs) {
    if (!s.empty()) s += "; ";
    s += v.field + ": " + v.message;
  }
  return s;
}

Provenance parse_provenance(const json& meta) {
  Provenance p;
  if (auto it = meta.find("model"); it != meta.end() && it->is_string()) p.model = *it;
  if (auto it = meta.find("extracted_at"); it != meta.end() && it->is_string()) p.extracted_at = *it;
  if (auto it = meta.find("probe_position"); it != meta.end() && it->is_string())
    p.probe_position = *it;
  if (auto it = meta.find("format_version"); it != meta.end() && it->is_number_integer())
    p.format_version = *it;
  return p;
}

// Reads length-prefixed little-endian f64 vectors out of sidecar files.
class SidecarCache {
 public:
  explicit SidecarCache(fs::path base) : base_(std::move(base)) {}

  Vector read(const std::string& rel, std::uint64_t offset) {
    const std::vector<unsigned char>& bytes = load(rel);
    auto u64_at = [&](std::uint64_t pos) {
      std::uint64_t v = 0;
      for (int b = 7; b >= 0; --b) v = (v << 8) | bytes[pos + static_cast<std::uint64_t>(b)];
      return v;
    };
    if (offset + 8 > bytes.size()) throw SchemaError("vector_bin offset past end of " + rel);
    const std::uint64_t n = u64_at(offset);
    if (n == 0 || n > (bytes.size() - offset - 8) / 8) {
      throw SchemaError("vector_bin length prefix out of range in " + rel);
    }
    Vector out(n);
    for (std::uint64_t i = 0; i < n; ++i) out[i] = std::bit_cast<double>(u64_at(offset + 8 + 8 * i));
    return out;
  }

 private:
  const std::vector<unsigned char>& load(const std::string& rel) {
    auto it = files_.find(rel);
    if (it != files_.end()) return it->second;
    std::ifstream in(base_ / rel, std::ios::binary);
    if (!in) throw SchemaError("cannot open sidecar " + (base_ / rel).string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return files_.emplace(rel, std::move(bytes)).first->second;
  }

  fs::path base_;
  std::map<std::string, std::vector<unsigned char>> files_;
};

std::vector<double> number_array(const json& arr) {
  std::vector<double> out;
  out.reserve(arr.size());
  for (const json& x : arr) out.push_back(x.get<double>());
  return out;
}

ActivationRecord build_activation(const json& raw, SidecarCache& sidecars, std::size_t line) {
  ActivationRecord r;
  r.trait = *parse_trait(raw["trait"].get<std::string>());
  r.condition = *parse_condition(raw["condition"].get<std::string>());
  r.variant_kind = *parse_variant_kind(raw["variant_kind"].get<std::string>());
  r.variant_id = raw["variant_id"].get<long long>();
  r.prompt_id = raw["prompt_id"].get<std::string>();
  r.layer = raw["layer"].get<long long>();
  if (raw.contains("vector")) {
    r.vector = number_array(raw["vector"]);
  } else {
    const json& b = raw["vector_bin"];
    r.vector = sidecars.read(b["path"].get<std::string>(), b["offset"].get<std::uint64_t>());
    for (std::size_t i = 0; i < r.vector.size(); ++i) {
      if (!std::isfinite(r.vector[i])) {
        throw SchemaError("vector: non-finite component at index " + std::to_string(i));
      }
    }
  }
  r.line = line;
  return r;
}

JudgeRecord build_judgement(const json& raw, std::size_t line) {
  JudgeRecord r;
  r.trait = *parse_trait(raw["trait"].get<std::string>());
  r.condition = *parse_condition(raw["condition"].get<std::string>());
  r.variant_kind = *parse_variant_kind(raw["variant_kind"].get<std::string>());
  r.variant_id = raw["variant_id"].get<long long>();
  r.prompt_id = raw["prompt_id"].get<std::string>();
  r.rollout_id = raw["rollout_id"].get<long long>();
  if (raw.contains("score")) {
    r.payload = DirectScore{raw["score"].get<double>()};
  } else {
    r.payload = CandidateLogprobs{number_array(raw["candidate_logprobs"])};
  }
  r.line = line;
  return r;
}

std::string where(std::size_t line) {
  return line == 0 ? std::string("in-memory record") : "line " + std::to_string(line);
}

using ActivationKey = std::tuple<Trait, Condition, VariantKind, long long, std::string>;
using JudgementKey = std::tuple<Trait, Condition, VariantKind, long long, std::string, long long>;

ActivationKey key_of(const ActivationRecord& r) {
  return {r.trait, r.condition, r.variant_kind, r.variant_id, r.prompt_id};
}
JudgementKey key_of(const JudgeRecord& r) {
  return {r.trait, r.condition, r.variant_kind, r.variant_id, r.prompt_id, r.rollout_id};
}

std::string describe(const ActivationRecord& r) {
  return std::string("(") + std::string(to_string(r.trait)) + ", " +
         std::string(to_string(r.condition)) + ", " + to_string(r.variant()) + ", " + r.prompt_id +
         ")";
}
std::string describe(const JudgeRecord& r) {
  return std::string("(") + std::string(to_string(r.trait)) + ", " +
         std::string(to_string(r.condition)) + ", " + to_string(r.variant()) + ", " + r.prompt_id +
         ", rollout " + std::to_string(r.rollout_id) + ")";
}

// Cross-record invariants shared by the loader and the set constructors.
class ActivationChecker {
 public:
  // Returns an empty string when the record is consistent with those seen so far.
  std::string admit(const ActivationRecord& r) {
    if (r.vector.empty()) return "vector: must be non-empty";
    for (std::size_t i = 0; i < r.vector.size(); ++i) {
      if (!std::isfinite(r.vector[i]))
        return "vector: non-finite component at index " + std::to_string(i);
    }
    if (!first_) {
      first_ = r.line;
      dimension_ = r.vector.size();
      layer_ = r.layer;
    } else {
      if (r.vector.size() != dimension_) {
        return "dimension " + std::to_string(r.vector.size()) + " at " + where(r.line) +
               " differs from dimension " + std::to_string(dimension_) + " at " + where(*first_);
      }
      if (r.layer != layer_) {
        return "layer " + std::to_string(r.layer) + " at " + where(r.line) +
               " differs from layer " + std::to_string(layer_) + " at " + where(*first_);
      }
    }
    auto [it, inserted] = seen_.emplace(key_of(r), r.line);
    if (!inserted) {
      return "duplicate key " + describe(r) + " at " + where(r.line) + " and " + where(it->second);
    }
    return {};
  }

  std::size_t dimension() const { return dimension_; }
  long long layer() const { return layer_; }

 private:
  std::optional<std::size_t> first_;
  std::size_t dimension_ = 0;
  long long layer_ = 0;
  std::map<ActivationKey, std::size_t> seen_;
};

class JudgementChecker {
 public:
  std::string admit(const JudgeRecord& r) {
    if (r.condition == Condition::Neu) {
      return "condition: neutral condition is never judged; only pos/neg anchors are scored";
    }
    if (const auto* s = std::get_if<DirectScore>(&r.payload)) {
      if (!std::isfinite(s->value) || s->value < 0.0 || s->value > 100.0)
        return "score: must be a finite number in [0, 100]";
    } else {
      const auto& lp = std::get<CandidateLogprobs>(r.payload).values;
      if (lp.size() != kNumScoreTokens) return "candidate_logprobs: must have exactly 101 entries";
      for (std::size_t i = 0; i < lp.size(); ++i) {
        if (!std::isfinite(lp[i]))
          return "candidate_logprobs: non-finite component at index " + std::to_string(i);
      }
    }
    auto [it, inserted] = seen_.emplace(key_of(r), r.line);
    if (!inserted) {
      return "duplicate key " + describe(r) + " at " + where(r.line) + " and " + where(it->second);
    }
    return {};
  }

 private:
  std::map<JudgementKey, std::size_t> seen_;
};

template <typename Record>
struct ScanResult {
  FileScan scan;
  std::vector<Record> records;
};

template <typename Record>
ScanResult<Record> scan_impl(const fs::path& path, RecordKind kind) {
  std::ifstream in(path);
  if (!in) throw ParseError(0, "cannot open " + path.string());
  ScanResult<Record> out;
  out.scan.kind = kind;
  SidecarCache sidecars(path.parent_path());
  ActivationChecker act_check;
  JudgementChecker judge_check;
  auto issue = [&](std::size_t line, FileIssue::Kind k, std::string msg) {
    out.scan.issues.push_back({line, k, std::move(msg)});
  };

  std::string text;
  std::size_t line_no = 0;
  bool seen_content = false;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json raw = json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (raw.is_discarded()) {
      issue(line_no, FileIssue::Kind::Parse, "malformed JSON");
      seen_content = true;
      continue;
    }
    if (!raw.is_object()) {
      issue(line_no, FileIssue::Kind::Parse, "record must be a JSON object");
      seen_content = true;
      continue;
    }
    if (raw.contains("meta")) {
      if (seen_content || out.scan.provenance) {
        issue(line_no, FileIssue::Kind::Schema, "meta line is only allowed as the first line");
      } else if (!raw["meta"].is_object()) {
        issue(line_no, FileIssue::Kind::Schema, "meta must be an object");
      } else {
        out.scan.provenance = parse_provenance(raw["meta"]);
      }
      seen_content = true;
      continue;
    }
    seen_content = true;
    auto violations = validate_schema(raw, kind);
    if (!violations.empty()) {
      issue(line_no, FileIssue::Kind::Schema, join_violations(violations));
      continue;
    }
    try {
      if constexpr (std::is_same_v<Record, ActivationRecord>) {
        auto rec = build_activation(raw, sidecars, line_no);
        if (auto msg = act_check.admit(rec); !msg.empty()) {
          issue(line_no, FileIssue::Kind::Schema, msg);
          continue;
        }
        out.records.push_back(std::move(rec));
      } else {
        auto rec = build_judgement(raw, line_no);
        if (auto msg = judge_check.admit(rec); !msg.empty()) {
          issue(line_no, FileIssue::Kind::Schema, msg);
          continue;
        }
        out.records.push_back(std::move(rec));
      }
    } catch (const SchemaError& e) {
      issue(line_no, FileIssue::Kind::Schema, e.what());
    }
  }
  out.scan.record_count = out.records.size();
  return out;
}

template <typename Record>
std::vector<Record> load_or_throw(const fs::path& path, RecordKind kind, Provenance& prov) {
  auto result = scan_impl<Record>(path, kind);
  if (!result.scan.issues.empty()) {
    const FileIssue& first = result.scan.issues.front();
    if (first.kind == FileIssue::Kind::Parse) throw ParseError(first.line, first.message);
    throw SchemaError(path.string() + " line " + std::to_string(first.line) + ": " + first.message);
  }
  if (result.records.empty()) throw EmptyDataset(path.string() + " contains no records");
  if (result.scan.provenance) prov = *result.scan.provenance;
  return std::move(result.records);
}

template <typename Record>
std::vector<VariantKey> distinct_variants(std::span<const Record> records) {
  std::set<VariantKey> keys;
  for (const auto& r : records) keys.insert(r.variant());
  return {keys.begin(), keys.end()};
}

}  // namespace

std::vector<Violation> validate_schema(const json& raw, RecordKind kind) {
  std::vector<Violation> out;
  if (!raw.is_object()) {
    out.push_back({"record", "must be a JSON object"});
    return out;
  }
  if (kind == RecordKind::Activation) {
    validate_activation(raw, out);
  } else {
    validate_judgement(raw, out);
  }
  return out;
}

ActivationSet::ActivationSet(std::vector<ActivationRecord> records, Provenance provenance)
    : records_(std::move(records)), provenance_(std::move(provenance)) {
  if (records_.empty()) throw EmptyDataset("activation set has no records");
  ActivationChecker check;
  for (const auto& r : records_) {
    if (auto msg = check.admit(r); !msg.empty()) throw SchemaError(msg);
  }
  dimension_ = check.dimension();
  layer_ = check.layer();
}

std::vector<VariantKey> ActivationSet::variants() const {
  return distinct_variants<ActivationRecord>(records_);
}

JudgementSet::JudgementSet(std::vector<JudgeRecord> records, Provenance provenance)
    : records_(std::move(records)), provenance_(std::move(provenance)) {
  if (records_.empty()) throw EmptyDataset("judgement set has no records");
  JudgementChecker check;
  for (const auto& r : records_) {
    if (auto msg = check.admit(r); !msg.empty()) throw SchemaError(msg);
  }
}

std::vector<VariantKey> JudgementSet::variants() const {
  return distinct_variants<JudgeRecord>(records_);
}

FileScan scan_record_file(const fs::path& path, RecordKind kind) {
  if (kind == RecordKind::Activation) return scan_impl<ActivationRecord>(path, kind).scan;
  return scan_impl<JudgeRecord>(path, kind).scan;
}

ActivationSet load_activation_records(const fs::path& path) {
  Provenance prov;
  auto records = load_or_throw<ActivationRecord>(path, RecordKind::Activation, prov);
  return ActivationSet(std::move(records), std::move(prov));
}

JudgementSet load_judgement_records(const fs::path& path) {
  Provenance prov;
  auto records = load_or_throw<JudgeRecord>(path, RecordKind::Judgement, prov);
  return JudgementSet(std::move(records), std::move(prov));
}

Vector mean_hidden(const ActivationSet& set, Trait trait, Condition condition, long long layer,
                   std::optional<VariantKey> variant) {
  std::vector<const ActivationRecord*> matches;
  for (const auto& r : set.records()) {
    if (r.trait == trait && r.condition == condition && r.layer == layer &&
        (!variant || r.variant() == *variant)) {
      matches.push_back(&r);
    }
  }
  if (matches.empty()) {
    std::string filter = "trait=" + std::string(to_string(trait)) +
                         " condition=" + std::string(to_string(condition)) +
                         " layer=" + std::to_string(layer);
    if (variant) filter += " variant=" + to_string(*variant);
    throw NoMatchingRecords(filter);
  }
  std::sort(matches.begin(), matches.end(), [](const auto* a, const auto* b) {
    return std::tie(a->variant_kind, a->variant_id, a->prompt_id) <
           std::tie(b->variant_kind, b->variant_id, b->prompt_id);
  });
  std::vector<std::span<const double>> rows;
  rows.reserve(matches.size());
  for (const auto* r : matches) rows.emplace_back(r->vector);
  return linalg::mean_rows(rows);
}

nlohmann::ordered_json to_json(const ActivationRecord& r) {
  nlohmann::ordered_json j;
  j["trait"] = to_string(r.trait);
  j["condition"] = to_string(r.condition);
  j["variant_kind"] = to_string(r.variant_kind);
  j["variant_id"] = r.variant_id;
  j["prompt_id"] = r.prompt_id;
  j["layer"] = r.layer;
  j["vector"] = r.vector;
  return j;
}

nlohmann::ordered_json to_json(const JudgeRecord& r) {
  nlohmann::ordered_json j;
  j["trait"] = to_string(r.trait);
  j["condition"] = to_string(r.condition);
  j["variant_kind"] = to_string(r.variant_kind);
  j["variant_id"] = r.variant_id;
  j["prompt_id"] = r.prompt_id;
  j["rollout_id"] = r.rollout_id;
  if (const auto* s = std::get_if<DirectScore>(&r.payload)) {
    j["score"] = s->value;
  } else {
    j["candidate_logprobs"] = std::get<CandidateLogprobs>(r.payload).values;
  }
  return j;
}

nlohmann::ordered_json to_json(const Provenance& p) {
  nlohmann::ordered_json j;
  j["model"] = p.model;
  j["extracted_at"] = p.extracted_at;
  j["probe_position"] = p.probe_position;
  j["format_version"] = p.format_version;
  return j;
}

namespace {
template <typename Set>
std::string serialize_set(const Set& set) {
  std::ostringstream os;
  nlohmann::ordered_json meta;
  meta["meta"] = to_json(set.provenance());
  os << meta.dump() << '\n';
  for (const auto& r : set.records()) os << to_json(r).dump() << '\n';
  return os.str();
}
}  // namespace

std::string serialize(const ActivationSet& set) { return serialize_set(set); }
std::string serialize(const JudgementSet& set) { return serialize_set(set); }

void append_sidecar_vector(std::vector<unsigned char>& out, std::span<const double> v) {
  auto put = [&](std::uint64_t x) {
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<unsigned char>((x >> (8 * b)) & 0xffu));
  };
  put(v.size());
  for (double x : v) put(std::bit_cast<std::uint64_t>(x));
}

}  // namespace pvni
