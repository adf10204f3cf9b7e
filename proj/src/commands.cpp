#include "pvni/commands.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <variant>

#include "pvni/pvni_estimator.hpp"
#include "pvni/stability_report.hpp"

namespace pvni {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

using FieldRef = std::variant<double*, std::size_t*, std::vector<double>*>;

std::vector<std::pair<std::string, FieldRef>> theory_fields(TheoryConfig& t) {
  return {
      {"dimension", &t.dimension},
      {"samples", &t.samples},
      {"epsilon", &t.epsilon},
      {"beta", &t.beta},
      {"link_steepness", &t.link_steepness},
      {"sample_std", &t.sample_std},
      {"gain", &t.trait.gain},
      {"curvature", &t.trait.curvature},
      {"amplifier", &t.trait.amplifier},
      {"target_projection", &t.trait.target_projection},
      {"composition_alphas", &t.composition_alphas},
      {"tradeoff_floor", &t.tradeoff_floor},
      {"negation_alpha_contradictory", &t.negation_alpha_contradictory},
      {"negation_alpha_mild", &t.negation_alpha_mild},
      {"lambda_min", &t.lambda_min},
      {"lambda_max", &t.lambda_max},
      {"lambda_step", &t.lambda_step},
      {"negation_floor", &t.negation.floor},
      {"probe_lambda", &t.negation.probe_lambda},
      {"mild_extent", &t.negation.mild_extent},
      {"mild_weakening", &t.negation.mild_weakening},
      {"interval_step", &t.negation.interval_step},
      {"eps_factor", &t.tolerances.eps_factor},
      {"beta_factor", &t.tolerances.beta_factor},
      {"kappa_factor", &t.tolerances.kappa_factor},
      {"threshold_constant", &t.tolerances.threshold_constant},
      {"ood_gamma", &t.ood_gamma},
      {"kappa0", &t.kappa0},
      {"ood_margin", &t.ood_margin},
      {"ood_c1", &t.ood_c1},
      {"mlp_rows", &t.mlp_rows},
      {"mlp_rho", &t.mlp_rho},
      {"mlp_c", &t.mlp_c},
      {"mlp_C", &t.mlp_C},
      {"mlp_samples", &t.mlp_samples},
      {"residual_beta", &t.residual_beta},
      {"residual_samples", &t.residual_samples},
  };
}

double number(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("'" + key + "' must be a number");
  return v.get<double>();
}

std::size_t count(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number_unsigned()) throw ConfigError("'" + key + "' must be a non-negative integer");
  return v.get<std::size_t>();
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

ordered_json path_or_null(const std::optional<fs::path>& p) {
  if (!p) return nullptr;
  return p->generic_string();
}

RecordKind detect_kind(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return RecordKind::Activation;
    if (j.contains("meta")) continue;
    return j.contains("vector") || j.contains("vector_bin") ? RecordKind::Activation
                                                            : RecordKind::Judgement;
  }
  return RecordKind::Activation;
}

theory::WorldParams world_params(const TheoryConfig& t) {
  theory::WorldParams p;
  p.trait = t.trait;
  p.beta = t.beta;
  p.epsilon = t.epsilon;
  p.link_steepness = t.link_steepness;
  p.sample_std = t.sample_std;
  return p;
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

}  // namespace

int exit_code_for(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kUsage: return kExitUsage;
    case ErrorCategory::kIngestion: return kExitIngestion;
    case ErrorCategory::kEstimation: return kExitEstimation;
    case ErrorCategory::kTheory: return kExitTheory;
    case ErrorCategory::kReport: return kExitReport;
  }
  return 1;
}

void apply_config_json(Config& config, const nlohmann::json& j, const fs::path& base_dir) {
  require(j.is_object(), "config must be a JSON object");
  auto resolve = [&](const nlohmann::json& v, const std::string& key) {
    require(v.is_string(), "'" + key + "' must be a string path");
    fs::path p = v.get<std::string>();
    return p.is_absolute() ? p : base_dir / p;
  };
  for (const auto& [key, v] : j.items()) {
    if (key == "layer") {
      require(v.is_number_integer(), "'layer' must be an integer");
      config.layer = v.get<long long>();
    } else if (key == "degeneracy_tolerance") {
      if (v.is_null()) {
        config.degeneracy_tolerance.reset();
      } else {
        config.degeneracy_tolerance = number(v, key);
      }
    } else if (key == "seed") {
      config.seed = count(v, key);
    } else if (key == "check") {
      require(v.is_string(), "'check' must be a string");
      config.check = v.get<std::string>();
    } else if (key == "paths") {
      require(v.is_object(), "'paths' must be an object");
      for (const auto& [pk, pv] : v.items()) {
        if (pk == "activations") config.activations = resolve(pv, pk);
        else if (pk == "judgements") config.judgements = resolve(pv, pk);
        else if (pk == "baselines") config.baselines = resolve(pv, pk);
        else if (pk == "runs") config.runs_dir = resolve(pv, pk);
        else if (pk == "out_dir") config.out_dir = resolve(pv, pk);
        else if (pk == "theory_out") config.theory_out = resolve(pv, pk);
        else if (pk == "table_out") config.table_out = resolve(pv, pk);
        else if (pk == "plot_out") config.plot_out = resolve(pv, pk);
        else throw ConfigError("unknown key 'paths." + pk + "'");
      }
    } else if (key == "theory") {
      require(v.is_object(), "'theory' must be an object");
      auto fields = theory_fields(config.theory);
      for (const auto& [tk, tv] : v.items()) {
        auto it = std::find_if(fields.begin(), fields.end(),
                               [&](const auto& f) { return f.first == tk; });
        if (it == fields.end()) throw ConfigError("unknown key 'theory." + tk + "'");
        std::visit(
            [&](auto* target) {
              using T = std::remove_pointer_t<decltype(target)>;
              if constexpr (std::is_same_v<T, double>) {
                *target = number(tv, tk);
              } else if constexpr (std::is_same_v<T, std::size_t>) {
                *target = count(tv, tk);
              } else {
                require(tv.is_array(), "'" + tk + "' must be an array of numbers");
                target->clear();
                for (const auto& x : tv) target->push_back(number(x, tk));
              }
            },
            it->second);
      }
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
}

Config load_config(const std::optional<fs::path>& file) {
  Config config;
  if (const char* env = std::getenv(kOutDirEnv); env && *env) config.out_dir = env;
  if (!file) return config;
  std::ifstream in(*file);
  if (!in) throw ConfigError("cannot open config file " + file->string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + file->string() + ": " + e.what());
  }
  apply_config_json(config, j, file->parent_path());
  return config;
}

void validate_config(const Config& c) {
  const TheoryConfig& t = c.theory;
  if (c.degeneracy_tolerance) {
    require(*c.degeneracy_tolerance > 0.0, "degeneracy_tolerance must be > 0");
  }
  require(t.epsilon > 0.0 && t.epsilon < 1.0, "theory.epsilon must lie in (0, 1)");
  require(t.beta >= 0.0, "theory.beta must be >= 0");
  require(t.link_steepness > 0.0, "theory.link_steepness must be > 0");
  require(t.sample_std > 0.0, "theory.sample_std must be > 0");
  require(t.samples >= 2, "theory.samples must be >= 2");
  require(t.dimension >= 7, "theory.dimension must be >= 7");
  require(t.lambda_step > 0.0 && t.lambda_min < t.lambda_max,
          "theory lambda grid needs lambda_step > 0 and lambda_min < lambda_max");
  require(t.negation.interval_step > 0.0 && t.negation.mild_extent > 0.0,
          "theory negation steps must be > 0");
  require(t.tolerances.eps_factor > 0.0 && t.tolerances.beta_factor > 0.0 &&
              t.tolerances.kappa_factor > 0.0 && t.tolerances.threshold_constant > 0.0,
          "theory tolerance factors must be > 0");
  require(t.kappa0 >= 0.0 && 2.0 * t.kappa0 < 1.0, "theory.kappa0 must lie in [0, 0.5)");
  require(t.ood_gamma.size() == 5, "theory.ood_gamma must have 5 entries");
  require(t.ood_margin > 0.0 && t.ood_c1 > 0.0, "theory.ood_margin and ood_c1 must be > 0");
  require(t.mlp_rows >= 2, "theory.mlp_rows must be >= 2");
  require(t.mlp_rho > 0.0 && t.mlp_rho <= 1.0, "theory.mlp_rho must lie in (0, 1]");
  require(t.mlp_c > 0.0 && t.mlp_C > 0.0, "theory.mlp_c and mlp_C must be > 0");
  require(t.residual_beta >= 0.0, "theory.residual_beta must be >= 0");
  static const std::set<std::string> checks = {"composition", "negation", "ood", "pruning", "all"};
  require(checks.count(c.check) == 1, "unknown theory check '" + c.check + "'");
}

ordered_json config_snapshot(const Config& c) {
  ordered_json j;
  j["layer"] = c.layer ? ordered_json(*c.layer) : ordered_json(nullptr);
  j["degeneracy_tolerance"] =
      c.degeneracy_tolerance ? ordered_json(*c.degeneracy_tolerance) : ordered_json(nullptr);
  j["seed"] = c.seed;
  j["check"] = c.check;
  j["paths"] = {{"activations", path_or_null(c.activations)},
                {"judgements", path_or_null(c.judgements)},
                {"baselines", path_or_null(c.baselines)},
                {"runs", path_or_null(c.runs_dir)}};
  ordered_json theory = ordered_json::object();
  TheoryConfig copy = c.theory;
  for (const auto& [name, ref] : theory_fields(copy)) {
    std::visit([&, n = name](auto* v) { theory[n] = *v; }, ref);
  }
  j["theory"] = std::move(theory);
  return j;
}

int cmd_validate(const ValidateOptions& options, std::ostream& out) {
  if (options.files.empty()) throw ConfigError("validate needs at least one file");
  std::size_t total = 0;
  for (const auto& path : options.files) {
    if (!fs::exists(path)) throw ConfigError("no such file: " + path.string());
    const RecordKind kind = options.kind.value_or(detect_kind(path));
    const FileScan scan = scan_record_file(path, kind);
    out << path.string() << ": "
        << (kind == RecordKind::Activation ? "activations" : "judgements") << ", "
        << scan.record_count << " records, " << scan.issues.size() << " violations\n";
    for (const auto& issue : scan.issues) {
      out << "  line " << issue.line << ": "
          << (issue.kind == FileIssue::Kind::Parse ? "parse error: " : "") << issue.message
          << "\n";
    }
    total += scan.issues.size();
  }
  out << total << " violations\n";
  return total == 0 ? kExitOk : kExitIngestion;
}

int cmd_run(const Config& config, std::ostream& out) {
  validate_config(config);
  if (!config.layer) throw ConfigError("run needs a layer (--layer or \"layer\" in the config)");
  if (!config.activations) throw ConfigError("run needs an activations file");
  if (!config.judgements || !fs::exists(*config.judgements)) {
    throw MissingCondition("no judgements file" +
                           (config.judgements ? " at " + config.judgements->string() : "") +
                           "; pos/neg judge anchors are unavailable for every trait");
  }
  const ActivationSet acts = load_activation_records(*config.activations);
  const JudgementSet judges = load_judgement_records(*config.judgements);
  if (acts.layer() != *config.layer) {
    throw ConfigError("requested layer " + std::to_string(*config.layer) +
                      " but the activations were extracted at layer " +
                      std::to_string(acts.layer()));
  }

  PvniConfig pc;
  pc.layer = *config.layer;
  pc.degeneracy_tolerance = config.degeneracy_tolerance;
  const auto runs = run_pvni_per_variant(acts, judges, pc);

  ordered_json doc;
  doc["format_version"] = kRunFormatVersion;
  doc["config"] = config_snapshot(config);
  doc["provenance"] = to_json(acts.provenance());
  doc["judgement_provenance"] = to_json(judges.provenance());
  ordered_json list = ordered_json::array();
  ordered_json errors = ordered_json::array();
  std::size_t complete = 0;
  for (const auto& run : runs) {
    list.push_back(to_json(run));
    for (const auto& f : run.failures) {
      if (f) errors.push_back({{"variant", to_string(*run.variant)}, {"kind", f->kind},
                               {"message", f->message}});
    }
    if (run.complete()) ++complete;
  }
  doc["runs"] = std::move(list);
  doc["errors"] = errors;
  write_text(config.out_dir / "run.json", dump(doc));

  const std::string header = "# pvni format_version=" + std::to_string(kRunFormatVersion) +
                             " config=" + config_snapshot(config).dump() + "\n";
  for (const auto& run : runs) {
    if (!run.embedding) continue;
    const std::string name = "B_" + to_string(*run.variant) + ".csv";
    write_text(config.out_dir / name, header + embedding_csv(*run.embedding));
    if (runs.size() == 1) write_text(config.out_dir / "B.csv", header + embedding_csv(*run.embedding));
  }

  out << runs.size() << " variant groups, " << complete << " complete\n";
  for (const auto& run : runs) {
    out << "  " << to_string(*run.variant) << ":";
    for (Trait t : kAllTraits) {
      const auto& e = run.estimates[index(t)];
      out << " " << to_string(t) << "=" << (e ? fmt(e->s_hat) : std::string("error"));
    }
    out << "\n";
  }
  for (const auto& e : errors) out << "error: " << e["message"].get<std::string>() << "\n";
  out << "wrote " << (config.out_dir / "run.json").string() << "\n";
  return errors.empty() ? kExitOk : kExitEstimation;
}

std::vector<theory::CheckReport> run_theory_checks(const Config& config) {
  validate_config(config);
  using namespace theory;
  const TheoryConfig& t = config.theory;
  const WorldParams wp = world_params(t);
  const auto lambdas = lambda_grid(t.lambda_min, t.lambda_max, t.lambda_step);
  const bool all = config.check == "all";
  const std::uint64_t seed = config.seed;
  std::vector<CheckReport> reports;

  auto pair_world = [&](double alpha, std::string_view purpose, std::uint64_t k) {
    MatrixXd g(2, 2);
    g << 1.0, alpha, alpha, 1.0;
    return make_world(t.dimension, 2, g, wp, derive_seed(seed, purpose, k));
  };
  auto states_for = [&](const SyntheticWorld& w, std::string_view purpose, std::uint64_t k,
                        std::size_t n) {
    return sample_typical_states(w, n, derive_seed(seed, purpose, k));
  };

  if (all || config.check == "composition") {
    for (std::size_t k = 0; k < t.composition_alphas.size(); ++k) {
      const double alpha = t.composition_alphas[k];
      const auto world = pair_world(alpha, "composition.world", k);
      const auto states = states_for(world, "composition.states", k, t.samples);
      reports.push_back(
          check_composition(world, alpha, lambdas, states, t.tolerances, t.tradeoff_floor));
    }
  }
  if (all || config.check == "negation") {
    const std::pair<NegationRegime, double> regimes[] = {
        {NegationRegime::Orthogonal, 0.0},
        {NegationRegime::Contradictory, t.negation_alpha_contradictory},
        {NegationRegime::MildlyAligned, t.negation_alpha_mild}};
    std::uint64_t k = 0;
    for (const auto& [regime, alpha] : regimes) {
      const auto world = pair_world(alpha, "negation.world", k);
      const auto states = states_for(world, "negation.states", k, t.samples);
      reports.push_back(check_negation(world, regime, lambdas, states, t.tolerances, t.negation));
      ++k;
    }
  }
  const MatrixXd identity = MatrixXd::Identity(5, 5);
  if (all || config.check == "ood") {
    const auto world = make_world(t.dimension, 5, identity, wp, derive_seed(seed, "ood.world"));
    const auto states = states_for(world, "ood.states", 0, t.samples);
    const VectorXd dir = Eigen::Map<const VectorXd>(t.ood_gamma.data(), 5).normalized();
    // Weights sized for the widest kappa the check visits.
    const double widest = 2.0 * t.kappa0;
    const VectorXd lambda =
        minimal_ood_weights(std::sqrt(1.0 - widest * widest) * dir, t.ood_margin);
    const OodSpec spec = make_ood_spec(dir, t.kappa0, t.kappa0, lambda, t.ood_margin, t.ood_c1);
    reports.push_back(check_ood_synthesis(world, spec, states, t.tolerances));
  }
  if (all || config.check == "pruning") {
    const auto world = make_world(t.dimension, 5, identity, wp, derive_seed(seed, "pruning.world"));
    const auto states = states_for(world, "pruning.states", 0, t.mlp_samples);
    const auto mlp = make_mlp_update(world, 0, t.mlp_rows, t.mlp_rho, t.mlp_c, t.mlp_C,
                                     derive_seed(seed, "pruning.mlp"));
    reports.push_back(check_pruning(world, mlp, states));
    const auto rank_states = states_for(world, "rank_one.states", 0, t.samples);
    reports.push_back(check_rank_one(world, rank_states, t.residual_beta, t.residual_samples,
                                     derive_seed(seed, "rank_one.residual")));
  }
  return reports;
}

int cmd_theory(const Config& config, std::ostream& out) {
  const auto reports = run_theory_checks(config);
  bool pass = true;
  ordered_json checks = ordered_json::array();
  for (const auto& r : reports) {
    pass = pass && r.passed();
    checks.push_back(theory::to_json(r));
    for (const auto& c : r.clauses) {
      out << (c.pass ? "PASS " : "FAIL ") << r.check << " " << c.clause
          << " measured=" << fmt(c.measured) << " bound=" << c.bound.dump() << "\n";
    }
  }
  ordered_json doc;
  doc["format_version"] = 1;
  doc["config"] = config_snapshot(config);
  doc["pass"] = pass;
  doc["checks"] = std::move(checks);
  const fs::path target = config.theory_out.value_or(config.out_dir / "theory_report.json");
  write_text(target, dump(doc));
  out << (pass ? "all clauses pass" : "some clauses failed") << "; wrote " << target.string()
      << "\n";
  return pass ? kExitOk : kExitTheory;
}

int cmd_report(const Config& config, std::ostream& out) {
  validate_config(config);
  std::vector<nlohmann::json> docs;
  if (config.runs_dir) {
    if (!fs::is_directory(*config.runs_dir)) {
      throw ConfigError("runs directory not found: " + config.runs_dir->string());
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(*config.runs_dir)) {
      if (entry.is_regular_file() && entry.path().filename() == "run.json") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      std::ifstream in(f);
      try {
        docs.push_back(nlohmann::json::parse(in));
      } catch (const nlohmann::json::exception& e) {
        throw SchemaError(f.string() + ": " + e.what());
      }
    }
  }
  std::vector<MethodResult> results = pvni_results_from_runs(docs);
  if (config.baselines) {
    auto extra = load_baselines(*config.baselines);
    results.insert(results.end(), extra.begin(), extra.end());
  }
  if (results.empty()) throw EmptyScores("no PVNI runs or baselines to report");
  const StabilityTable table = build_table(results);

  const ordered_json snapshot = config_snapshot(config);
  const fs::path table_path = config.table_out.value_or(config.out_dir / "table.csv");
  const fs::path plot_path = config.plot_out.value_or(config.out_dir / "plotdata.json");
  write_text(table_path, table_csv(table, snapshot));
  ordered_json plots;
  plots["format_version"] = kReportFormatVersion;
  plots["config"] = snapshot;
  plots["radar"] = emit_plot_data(table, PlotKind::Radar);
  plots["box"] = emit_plot_data(table, PlotKind::Box);
  write_text(plot_path, dump(plots));

  for (const auto& r : table.rows) {
    out << to_string(r.variant_kind) << " " << r.model << " " << to_string(r.trait) << " "
        << to_string(r.method) << " " << render_cell(r.mean, r.std) << (r.lowest ? " *" : "")
        << (r.note.empty() ? "" : " (" + r.note + ")") << "\n";
  }
  out << "wrote " << table_path.string() << " and " << plot_path.string() << "\n";
  return kExitOk;
}

}  // namespace pvni
