#include "pvni/stability_report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <tuple>

#include "pvni/errors.hpp"
#include "pvni/pvni_estimator.hpp"

namespace pvni {

namespace {

using RowKey = std::tuple<VariantKind, std::string, Trait, Method>;
using GroupKey = std::tuple<VariantKind, std::string, Trait>;

RowKey key_of(const TableRow& r) { return {r.variant_kind, r.model, r.trait, r.method}; }

std::string describe(const RowKey& k) {
  return std::string(to_string(std::get<0>(k))) + "/" + std::get<1>(k) + "/" +
         std::string(to_string(std::get<2>(k))) + "/" + std::string(to_string(std::get<3>(k)));
}

double median_sorted(std::span<const double> xs) {
  const std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

nlohmann::ordered_json optional_number(const std::optional<double>& x) {
  return x ? nlohmann::ordered_json(*x) : nlohmann::ordered_json(nullptr);
}

}  // namespace

std::string_view to_string(Method m) {
  switch (m) {
    case Method::IpipBffm50: return "ipip_bffm_50";
    case Method::IpipNeo120: return "ipip_neo_120";
    case Method::OpenEnded: return "open_ended";
    case Method::Pvni: return "pvni";
  }
  return "?";
}

std::optional<Method> parse_method(std::string_view s) {
  for (Method m : {Method::IpipBffm50, Method::IpipNeo120, Method::OpenEnded, Method::Pvni}) {
    if (s == to_string(m)) return m;
  }
  return std::nullopt;
}

VariantStats variant_stats(std::span<const double> scores) {
  if (scores.empty()) throw EmptyScores("no scores to summarize");
  // Welford
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t n = 0;
  for (double x : scores) {
    ++n;
    const double delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (x - mean);
  }
  VariantStats s;
  s.mean = mean;
  s.n = n;
  if (n >= 2) s.std = std::sqrt(std::max(0.0, m2 / static_cast<double>(n - 1)));
  return s;
}

std::vector<VariabilityFlag> lowest_variability_flags(const StabilityTable& table) {
  std::map<GroupKey, std::vector<const TableRow*>> groups;
  for (const auto& r : table.rows) groups[{r.variant_kind, r.model, r.trait}].push_back(&r);

  std::vector<VariabilityFlag> flags;
  for (auto& [key, rows] : groups) {
    std::sort(rows.begin(), rows.end(),
              [](const TableRow* a, const TableRow* b) { return a->method < b->method; });
    std::optional<double> best;
    for (const auto* r : rows) {
      if (r->std && (!best || *r->std < *best)) best = r->std;
    }
    if (!best) continue;
    const bool alone = rows.size() == 1;
    for (const auto* r : rows) {
      if (r->std && *r->std == *best) {
        flags.push_back({r->variant_kind, r->model, r->trait, r->method,
                         alone ? "no-comparison" : ""});
      }
    }
  }
  return flags;
}

StabilityTable build_table(std::span<const MethodResult> results) {
  StabilityTable table;
  std::map<RowKey, std::size_t> seen;
  for (const auto& res : results) {
    TableRow row;
    row.variant_kind = res.variant_kind;
    row.model = res.model;
    row.trait = res.trait;
    row.method = res.method;
    if (res.published) {
      row.mean = res.published->mean;
      row.std = res.published->std;
      row.n = res.published->n;
    } else {
      const VariantStats s = variant_stats(res.scores);
      row.mean = s.mean;
      row.std = s.std;
      row.n = s.n;
      row.scores = res.scores;
    }
    const RowKey k = key_of(row);
    if (seen.count(k)) throw DuplicateKey("two results for " + describe(k));
    seen[k] = table.rows.size();
    table.rows.push_back(std::move(row));
  }
  std::sort(table.rows.begin(), table.rows.end(),
            [](const TableRow& a, const TableRow& b) { return key_of(a) < key_of(b); });

  for (const auto& f : lowest_variability_flags(table)) {
    for (auto& r : table.rows) {
      if (key_of(r) == RowKey{f.variant_kind, f.model, f.trait, f.method}) {
        r.lowest = true;
        r.note = f.note;
      }
    }
  }
  return table;
}

std::string render_cell(double mean, std::optional<double> std) {
  char buf[96];
  if (std) {
    std::snprintf(buf, sizeof buf, "%.2f \xC2\xB1 %.2f", mean, *std);
  } else {
    std::snprintf(buf, sizeof buf, "%.2f", mean);
  }
  return buf;
}

std::optional<ParsedCell> parse_cell(std::string_view cell) {
  const std::string text(cell);
  const char* begin = text.c_str();
  char* end = nullptr;
  ParsedCell out;
  out.mean = std::strtod(begin, &end);
  if (end == begin) return std::nullopt;
  std::string_view rest(end);
  while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
  if (rest.empty()) return out;
  constexpr std::string_view kPlusMinus = "\xC2\xB1";
  if (rest.substr(0, kPlusMinus.size()) == kPlusMinus) {
    rest.remove_prefix(kPlusMinus.size());
  } else if (rest.substr(0, 2) == "+-") {
    rest.remove_prefix(2);
  } else {
    return std::nullopt;
  }
  const std::string tail(rest);
  const char* tb = tail.c_str();
  const double s = std::strtod(tb, &end);
  if (end == tb) return std::nullopt;
  for (const char* p = end; *p; ++p) {
    if (*p != ' ') return std::nullopt;
  }
  out.std = s;
  return out;
}

BoxStats box_stats(std::span<const double> scores) {
  if (scores.empty()) throw EmptyScores("no scores for box statistics");
  std::vector<double> xs(scores.begin(), scores.end());
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  BoxStats b;
  b.median = median_sorted(xs);
  const std::size_t half = n / 2;
  if (half == 0) {
    b.q1 = b.q3 = b.median;
  } else {
    b.q1 = median_sorted(std::span<const double>(xs).first(half));
    b.q3 = median_sorted(std::span<const double>(xs).last(half));
  }
  const double iqr = b.q3 - b.q1;
  const double lo_fence = b.q1 - 1.5 * iqr;
  const double hi_fence = b.q3 + 1.5 * iqr;
  b.whisker_low = b.median;
  b.whisker_high = b.median;
  bool any = false;
  for (double x : xs) {
    if (x < lo_fence || x > hi_fence) {
      b.outliers.push_back(x);
      continue;
    }
    if (!any) b.whisker_low = x;
    b.whisker_high = x;
    any = true;
  }
  return b;
}

nlohmann::ordered_json emit_plot_data(const StabilityTable& table, PlotKind kind) {
  nlohmann::ordered_json out;
  out["format_version"] = kReportFormatVersion;
  out["kind"] = kind == PlotKind::Radar ? "radar" : "box";
  if (kind == PlotKind::Box) {
    out["quartile_method"] = "tukey_median_exclusive";
    out["whisker_rule"] = "furthest point within 1.5 IQR of the quartiles";
  } else {
    out["trait_order"] = {"O", "C", "E", "A", "N"};
  }

  using SeriesKey = std::tuple<VariantKind, std::string, Method>;
  std::map<SeriesKey, std::array<const TableRow*, kNumTraits>> series;
  for (const auto& r : table.rows) series[{r.variant_kind, r.model, r.method}][index(r.trait)] = &r;

  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (const auto& [key, rows] : series) {
    nlohmann::ordered_json points = nlohmann::ordered_json::array();
    for (Trait t : kAllTraits) {
      const TableRow* r = rows[index(t)];
      if (!r) continue;
      if (kind == PlotKind::Radar) {
        points.push_back({{"trait", to_string(t)}, {"mean", r->mean}, {"std", optional_number(r->std)}});
      } else {
        if (r->scores.empty()) continue;
        const BoxStats b = box_stats(r->scores);
        points.push_back({{"trait", to_string(t)},
                          {"median", b.median},
                          {"q1", b.q1},
                          {"q3", b.q3},
                          {"whisker_low", b.whisker_low},
                          {"whisker_high", b.whisker_high},
                          {"outliers", b.outliers},
                          {"n", r->scores.size()}});
      }
    }
    if (points.empty()) continue;
    list.push_back({{"variant_kind", to_string(std::get<0>(key))},
                    {"model", std::get<1>(key)},
                    {"method", to_string(std::get<2>(key))},
                    {"traits", std::move(points)}});
  }
  out["series"] = std::move(list);
  return out;
}

std::vector<MethodResult> load_baselines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open baselines file " + path.string());
  std::vector<MethodResult> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(lineno, e.what());
    }
    auto fail = [&](const std::string& msg) {
      throw SchemaError("baselines line " + std::to_string(lineno) + ": " + msg);
    };
    auto text = [&](const char* field) {
      if (!j.is_object() || !j.contains(field) || !j[field].is_string()) {
        fail(std::string("missing string field '") + field + "'");
      }
      return j[field].get<std::string>();
    };
    MethodResult r;
    const auto method = parse_method(text("method"));
    if (!method) fail("unknown method '" + j["method"].get<std::string>() + "'");
    r.method = *method;
    r.model = text("model");
    const auto trait = parse_trait(text("trait"));
    if (!trait) fail("unknown trait '" + j["trait"].get<std::string>() + "'");
    r.trait = *trait;
    const auto kind = parse_variant_kind(text("variant_kind"));
    if (!kind) fail("unknown variant_kind '" + j["variant_kind"].get<std::string>() + "'");
    r.variant_kind = *kind;

    auto in_range = [&](double x, const char* what) {
      if (!std::isfinite(x) || x < 0.0 || x > 100.0) fail(std::string(what) + " outside [0, 100]");
    };
    if (j.contains("scores")) {
      if (!j["scores"].is_array() || j["scores"].empty()) fail("'scores' must be a nonempty array");
      for (const auto& s : j["scores"]) {
        if (!s.is_number()) fail("'scores' entries must be numbers");
        in_range(s.get<double>(), "score");
        r.scores.push_back(s.get<double>());
      }
    } else if (j.contains("mean")) {
      if (!j["mean"].is_number()) fail("'mean' must be a number");
      PublishedStats p;
      p.mean = j["mean"].get<double>();
      in_range(p.mean, "mean");
      if (j.contains("std") && !j["std"].is_null()) {
        if (!j["std"].is_number() || j["std"].get<double>() < 0.0) fail("'std' must be >= 0");
        p.std = j["std"].get<double>();
      }
      if (j.contains("n") && !j["n"].is_null()) {
        if (!j["n"].is_number_unsigned() || j["n"].get<std::size_t>() == 0) {
          fail("'n' must be a positive integer");
        }
        p.n = j["n"].get<std::size_t>();
      }
      r.published = p;
    } else {
      fail("needs either 'scores' or 'mean'");
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<MethodResult> pvni_results_from_runs(std::span<const nlohmann::json> run_documents) {
  using Key = std::tuple<std::string, Trait, VariantKind>;
  std::map<Key, std::vector<double>> collected;
  for (const auto& doc : run_documents) {
    if (!doc.contains("runs") || !doc["runs"].is_array()) {
      throw SchemaError("run document has no 'runs' array");
    }
    std::string model = "unknown";
    if (doc.contains("provenance") && doc["provenance"].contains("model")) {
      model = doc["provenance"]["model"].get<std::string>();
    }
    for (const auto& run : doc["runs"]) {
      if (!run.contains("variant") || run["variant"].is_null()) continue;
      const auto kind = parse_variant_kind(run["variant"]["variant_kind"].get<std::string>());
      if (!kind) throw SchemaError("run has unknown variant_kind");
      for (Trait t : kAllTraits) {
        const auto& tr = run["traits"][std::string(to_string(t))];
        if (!tr.contains("s_hat")) continue;
        collected[{model, t, *kind}].push_back(tr["s_hat"].get<double>());
      }
    }
  }
  std::vector<MethodResult> out;
  for (auto& [key, scores] : collected) {
    MethodResult r;
    r.method = Method::Pvni;
    r.model = std::get<0>(key);
    r.trait = std::get<1>(key);
    r.variant_kind = std::get<2>(key);
    r.scores = std::move(scores);
    out.push_back(std::move(r));
  }
  return out;
}

std::string table_csv(const StabilityTable& table, const nlohmann::ordered_json& config) {
  std::string out = "# pvni format_version=" + std::to_string(kReportFormatVersion) +
                    " config=" + config.dump() + "\n";
  out += "variant_kind,model,trait,method,mean,std,n,lowest_flag,cell\n";
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  };
  for (const auto& r : table.rows) {
    out += std::string(to_string(r.variant_kind)) + ',' + quote(r.model) + ',' +
           std::string(to_string(r.trait)) + ',' + std::string(to_string(r.method)) + ',' +
           format_double(r.mean) + ',' + (r.std ? format_double(*r.std) : "") + ',' +
           (r.n ? std::to_string(*r.n) : "") + ',' +
           (r.lowest ? (r.note.empty() ? "1" : "1;" + r.note) : "0") + ',' +
           render_cell(r.mean, r.std) + '\n';
  }
  return out;
}

}  // namespace pvni
