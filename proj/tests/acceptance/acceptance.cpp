// One PASS/FAIL line per acceptance criterion; exit status 1 if any fail.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pvni/commands.hpp"
#include "pvni/judge_anchoring.hpp"
#include "pvni/linalg.hpp"
#include "pvni/persona_geometry.hpp"
#include "pvni/pvni_estimator.hpp"
#include "pvni/stability_report.hpp"
#include "pvni/theory_lab.hpp"

using namespace pvni;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = PVNI_FIXTURES_DIR;

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Outcome {
  bool pass = true;
  std::string detail;

  void expect(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

Outcome algebraic_identities() {
  Outcome o;
  const Vector v{0.37, -1.25, 2.5, 1e-3};
  o.expect(close_rel(projection_coef(v, v, 1e-8), 1.0, 1e-12), "self projection");
  o.expect(projection_coef(Vector{0, 3, 0}, Vector{2, 0, 0}, 1e-8) == 0.0, "orthogonal projection");
  o.expect(close_rel(projection_coef(Vector{1, 1}, Vector{2, 0}, 1e-8), 0.5, 1e-12), "(1,1) on (2,0)");
  const Vector vn{0.4, 0.9, -0.3, 2.0};
  const double base = projection_coef(vn, v, 1e-8);
  for (double c : {0.25, 3.0, 1e4}) {
    o.expect(close_rel(projection_coef(vn, linalg::scaled(v, c), 1e-8) * c, base, 1e-12),
             "scale invariance c=" + std::to_string(c));
  }
  for (double x : {-1.0, -0.2, 0.0, 0.42, 1.0, 1.3}) {
    const double c = clip_unit(x);
    o.expect(c >= 0.0 && c <= 1.0 && clip_unit(c) == c, "clip idempotence");
  }
  o.expect(clip_unit(1.3) == 1.0 && clip_unit(-0.2) == 0.0 && clip_unit(0.42) == 0.42, "clip values");
  const AnchorPair a{Trait::O, 80.0, 20.0, 1, 1};
  o.expect(estimate_trait(a, 0.0).s_hat == 20.0, "endpoint coef=0");
  o.expect(estimate_trait(a, 1.0).s_hat == 80.0, "endpoint coef=1");
  o.expect(close_rel(estimate_trait(a, 0.5).s_hat, 50.0, 1e-12), "midpoint");
  return o;
}

Outcome oracle_equivalence() {
  Outcome o;
  const auto acts = load_activation_records(kFixtures / "pvni_small" / "activations.jsonl");
  const auto judges = load_judgement_records(kFixtures / "pvni_small" / "judgements.jsonl");
  PvniConfig config;
  config.layer = acts.layer();
  const auto runs = run_pvni_per_variant(acts, judges, config);
  const auto oracle = read_json(kFixtures / "expected" / "pvni_small.json")["runs"];
  o.expect(runs.size() == 10 && oracle.size() == 10, "expected 10 variant groups");
  double worst = 0.0;
  std::size_t compared = 0;
  for (std::size_t g = 0; g < std::min(runs.size(), oracle.size()); ++g) {
    for (Trait t : kAllTraits) {
      const auto& e = runs[g].estimates[index(t)];
      if (!e) {
        o.expect(false, "missing estimate");
        continue;
      }
      const double ref = oracle[g]["traits"][std::string(to_string(t))]["s_hat"].get<double>();
      worst = std::max(worst, std::abs(e->s_hat - ref));
      ++compared;
    }
  }
  o.expect(compared == 50, "compared " + std::to_string(compared) + " of 50");
  o.expect(worst <= 1e-9, "max abs error " + std::to_string(worst));
  char buf[96];
  std::snprintf(buf, sizeof buf, "%zu values, max |error| %.3g", compared, worst);
  if (o.pass) o.detail = buf;
  return o;
}

Outcome judge_aggregation() {
  Outcome o;
  const auto cases = read_json(kFixtures / "logprob_cases.json")["cases"];
  const auto expected = read_json(kFixtures / "expected" / "logprobs.json")["expected"];
  double worst = 0.0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const double s = score_from_logits(cases[i].get<std::vector<double>>());
    worst = std::max(worst, std::abs(s - expected[i].get<double>()));
  }
  o.expect(cases.size() == 100, "expected 100 cases");
  o.expect(worst <= 1e-12, "max abs error " + std::to_string(worst));
  o.expect(score_from_logits(std::vector<double>(101, -3.0)) == 50.0, "uniform != 50");
  for (int k = 0; k <= 100; ++k) {
    std::vector<double> lp(101, -1000.0);
    lp[k] = 0.0;
    if (score_from_logits(lp) != static_cast<double>(k)) {
      o.expect(false, "point mass at " + std::to_string(k));
      break;
    }
  }
  std::vector<double> ends(101, -1000.0);
  ends[0] = ends[100] = 0.0;
  o.expect(score_from_logits(ends) == 50.0, "{0,100} mass != 50");
  return o;
}

Outcome theory_suite() {
  using namespace pvni::theory;
  Outcome o;
  Config config;  // d=64, 10^3 samples
  const auto reports = run_theory_checks(config);
  auto clause = [&](const std::string& check, const std::string& name,
                    std::optional<double> alpha = std::nullopt) -> const ClauseResult* {
    for (const auto& r : reports) {
      if (r.check != check) continue;
      if (alpha && r.constants["alpha_target"].get<double>() != *alpha) continue;
      if (const auto* c = r.find(name)) return c;
    }
    return nullptr;
  };
  auto require = [&](const ClauseResult* c, const std::string& label,
                     const std::function<bool(const ClauseResult&)>& extra = nullptr) {
    if (!c) {
      o.expect(false, label + " missing");
      return;
    }
    o.expect(c->pass && (!extra || extra(*c)), label + " measured " + std::to_string(c->measured));
  };

  // (a)
  require(clause("rank_one", "shift.rank_one"), "rank-one",
          [](const ClauseResult& c) { return c.measured >= 1.0 - 1e-10; });
  require(clause("pruning", "shift.pruning_envelope"), "pruning envelope");

  // (b) direct evaluation at lambda = 1 in an orthogonal world, then the grid checks.
  MatrixXd g = MatrixXd::Identity(2, 2);
  WorldParams wp;
  wp.beta = 0.0;
  wp.epsilon = 0.01;
  const auto world = make_world(64, 2, g, wp, derive_seed(config.seed, "acceptance.orthogonal"));
  const auto states = sample_typical_states(world, 1000, derive_seed(config.seed, "acceptance.states"));
  const VectorXd shift = persona_vector(world, 0) + persona_vector(world, 1);
  const double li = population_loss(states, shift, 0, world);
  const double lj = population_loss(states, shift, 1, world);
  o.expect(li <= 0.02 && lj <= 0.02, "alpha=0 lambda=1 losses " + std::to_string(li) + ", " +
                                         std::to_string(lj));
  require(clause("composition", "composition.aligned.loss_i", 0.0), "alpha=0 loss_i");
  require(clause("composition", "composition.aligned.loss_j", 0.0), "alpha=0 loss_j");
  require(clause("composition", "composition.contradictory.tradeoff", -0.9), "alpha=-0.9 tradeoff",
          [](const ClauseResult& c) { return c.measured >= 0.2; });

  // (c)
  require(clause("negation.orthogonal", "negation.orthogonal.loss_j_suppressed"), "orthogonal L_j",
          [](const ClauseResult& c) { return c.measured >= 0.2; });
  require(clause("negation.orthogonal", "negation.orthogonal.loss_i_preserved"), "orthogonal L_i",
          [](const ClauseResult& c) { return c.measured <= 0.05; });
  require(clause("negation.contradictory", "negation.contradictory.interval_nonempty"),
          "contradictory interval");
  require(clause("negation.contradictory", "negation.contradictory.grid_points_pass"),
          "contradictory grid");
  require(clause("negation.mildly_aligned", "negation.mild.loss_i_preserved"), "mild L_i");
  require(clause("negation.mildly_aligned", "negation.mild.loss_j_weakened"), "mild L_j");

  // (d)
  require(clause("ood", "ood.kappa_scaling"), "kappa scaling",
          [](const ClauseResult& c) { return c.measured >= 2.0 && c.measured <= 8.0; });
  return o;
}

Outcome stability_statistics() {
  Outcome o;
  const auto lists = read_json(kFixtures / "expected" / "stats.json")["lists"];
  double worst = 0.0;
  for (const auto& item : lists) {
    const auto s = variant_stats(item["scores"].get<std::vector<double>>());
    worst = std::max(worst, std::abs(s.mean - item["mean"].get<double>()));
    worst = std::max(worst, std::abs(*s.std - item["std"].get<double>()));
  }
  o.expect(lists.size() == 20, "expected 20 lists");
  o.expect(worst <= 1e-12, "max abs error " + std::to_string(worst));

  std::vector<MethodResult> rs(2);
  rs[0].method = rs[1].method = Method::Pvni;
  rs[0].model = "Qwen-2.5-7B";
  rs[0].trait = Trait::O;
  rs[0].published = PublishedStats{83.55, 0.82, 10};
  rs[1].model = "Mistral-7B-v0.1";
  rs[1].trait = Trait::N;
  rs[1].published = PublishedStats{35.16, 1.35, 10};
  const auto table = build_table(rs);
  const std::string csv = table_csv(table, nlohmann::ordered_json::object());
  o.expect(csv.find("83.55 \xC2\xB1 0.82") != std::string::npos, "Qwen O cell");
  o.expect(csv.find("35.16 \xC2\xB1 1.35") != std::string::npos, "Mistral N cell");
  return o;
}

Outcome determinism() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / "pvni_acceptance_determinism";
  fs::remove_all(root);
  std::ostringstream sink;
  for (const char* name : {"a", "b"}) {
    Config c;
    c.layer = 6;
    c.activations = kFixtures / "pvni_small" / "activations.jsonl";
    c.judgements = kFixtures / "pvni_small" / "judgements.jsonl";
    c.out_dir = root / name;
    cmd_run(c, sink);
    cmd_theory(c, sink);
  }
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(root / "a")) {
    ++files;
    const auto other = root / "b" / entry.path().filename();
    o.expect(fs::exists(other) && read_bytes(entry.path()) == read_bytes(other),
             entry.path().filename().string() + " differs");
  }
  o.expect(files >= 12, "expected run.json, 10 B files and the theory report");
  if (o.pass) o.detail = std::to_string(files) + " files identical";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    Outcome (*run)();
    double budget_s;
  };
  const Criterion criteria[] = {
      {"algebraic identities", algebraic_identities, 1.0},
      {"end-to-end oracle equivalence on pvni_small", oracle_equivalence, 5.0},
      {"judge aggregation", judge_aggregation, 0.0},
      {"theory suite", theory_suite, 30.0},
      {"stability statistics and cell rendering", stability_statistics, 0.0},
      {"determinism of run and theory outputs", determinism, 0.0},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_s > 0.0 && secs > c.budget_s) {
      o.pass = false;
      o.detail += (o.detail.empty() ? "" : "; ") + std::string("over time budget");
    }
    std::printf("%s  %-45s %7.3f s  %s\n", o.pass ? "PASS" : "FAIL", c.name, secs,
                o.detail.c_str());
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
