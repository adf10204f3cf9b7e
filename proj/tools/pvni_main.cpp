#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pvni/commands.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"pvni: prompt-neutral personality scores from persona vectors"};
  app.require_subcommand(1);

  std::string config_file;
  app.add_option("--config", config_file, "JSON config file; flags override it");

  // Flags shared by several subcommands; applied on top of the config file.
  std::optional<long long> layer;
  std::optional<double> tau;
  std::optional<std::uint64_t> seed;
  std::string acts, judges, baselines, runs, out_dir, out, check;

  auto* validate = app.add_subcommand("validate", "schema-check record files");
  std::vector<std::string> files;
  std::string kind;
  validate->add_option("files", files, "JSONL record files")->required();
  validate->add_option("--kind", kind, "activations or judgements (default: detect)")
      ->check(CLI::IsMember({"activations", "judgements"}));

  auto* run = app.add_subcommand("run", "estimate trait scores per variant group");
  run->add_option("--activations", acts, "activations.jsonl");
  run->add_option("--judgements", judges, "judgements.jsonl");
  run->add_option("--layer", layer, "layer the activations were read from");
  run->add_option("--tau", tau, "degeneracy tolerance on ||v_p||");
  run->add_option("--out-dir", out_dir, "output directory");

  auto* theory = app.add_subcommand("theory", "run the synthetic theory checks");
  theory->add_option("--check", check, "composition|negation|ood|pruning|all")
      ->check(CLI::IsMember({"composition", "negation", "ood", "pruning", "all"}));
  theory->add_option("--seed", seed, "root seed");
  theory->add_option("--out", out, "report.json path");
  theory->add_option("--out-dir", out_dir, "output directory");

  auto* report = app.add_subcommand("report", "mean/std tables and plot data");
  report->add_option("--runs", runs, "directory holding run.json files");
  report->add_option("--baselines", baselines, "baselines.jsonl");
  report->add_option("--out", out, "table.csv,plotdata.json");
  report->add_option("--out-dir", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : pvni::kExitUsage;
  }

  try {
    if (validate->parsed()) {
      pvni::ValidateOptions opts;
      for (const auto& f : files) opts.files.emplace_back(f);
      if (kind == "activations") opts.kind = pvni::RecordKind::Activation;
      if (kind == "judgements") opts.kind = pvni::RecordKind::Judgement;
      return pvni::cmd_validate(opts, std::cout);
    }

    pvni::Config config = pvni::load_config(
        config_file.empty() ? std::nullopt : std::optional<fs::path>(config_file));
    if (layer) config.layer = *layer;
    if (tau) config.degeneracy_tolerance = *tau;
    if (seed) config.seed = *seed;
    if (!acts.empty()) config.activations = acts;
    if (!judges.empty()) config.judgements = judges;
    if (!baselines.empty()) config.baselines = baselines;
    if (!runs.empty()) config.runs_dir = runs;
    if (!out_dir.empty()) config.out_dir = out_dir;
    if (!check.empty()) config.check = check;

    if (run->parsed()) return pvni::cmd_run(config, std::cout);
    if (theory->parsed()) {
      if (!out.empty()) config.theory_out = out;
      return pvni::cmd_theory(config, std::cout);
    }
    if (report->parsed()) {
      if (!out.empty()) {
        const auto comma = out.find(',');
        if (comma == std::string::npos) {
          throw pvni::ConfigError("--out expects table.csv,plotdata.json");
        }
        config.table_out = out.substr(0, comma);
        config.plot_out = out.substr(comma + 1);
      }
      return pvni::cmd_report(config, std::cout);
    }
  } catch (const pvni::Error& e) {
    std::cerr << "pvni: " << e.what() << "\n";
    return pvni::exit_code_for(e.category());
  } catch (const std::exception& e) {
    std::cerr << "pvni: " << e.what() << "\n";
    return 1;
  }
  return pvni::kExitUsage;
}
