#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rpot/estimators.hpp"
#include "rpot/io.hpp"
#include "rpot/region_generator.hpp"
#include "rpot/rng.hpp"
#include "rpot/study.hpp"

namespace fs = std::filesystem;

namespace {

struct FitArgs {
  std::string data;
  std::string target;
  std::string estimator = "rev";
  std::vector<double> probs{0.5, 0.75, 0.9, 0.95, 0.99, 0.995};
  std::uint64_t seed = 1;
  std::string out;
  std::string trace;
  rpot::ChainSettings chain;
  std::optional<double> xi_fix;
  std::optional<double> p_xi;
  std::optional<double> h1;
};

int run_fit(const FitArgs& a) {
  const auto sites = rpot::load_sites_csv(a.data);
  const bool known = std::any_of(
      sites.begin(), sites.end(),
      [&](const rpot::SiteRecord& s) { return s.id == a.target; });
  if (!known)
    throw std::runtime_error("unknown target id '" + a.target + "' in " +
                             a.data);

  const rpot::EstimatorKind kind = rpot::estimator_from_string(a.estimator);
  rpot::Rng rng(a.seed);
  std::vector<rpot::QuantileEstimate> estimates;
  std::optional<rpot::ChainTrace> trace;

  switch (kind) {
    case rpot::EstimatorKind::rev: {
      rpot::RevOptions opts;
      opts.xi_fix = a.xi_fix;
      opts.h1_override = a.h1;
      opts.pxi_override = a.p_xi;
      auto full = rpot::rev_estimate_full(sites, a.target, opts, a.probs,
                                          a.chain, rng);
      estimates = std::move(full.estimates);
      trace = std::move(full.trace);
      break;
    }
    case rpot::EstimatorKind::bay: {
      auto full =
          rpot::bay_estimate_full(sites, a.target, a.probs, a.chain, rng);
      estimates = std::move(full.estimates);
      trace = std::move(full.trace);
      break;
    }
    case rpot::EstimatorKind::ifl:
      estimates = rpot::ifl_estimate(sites, a.target, a.probs);
      break;
  }

  rpot::write_estimates_csv(a.out, estimates);
  if (!a.trace.empty()) {
    if (!trace)
      throw std::runtime_error(
          "trace export requires a chain estimator (rev or bay)");
    rpot::write_trace_csv(a.trace, *trace);
  }
  return 0;
}

struct GenerateArgs {
  std::string config;
  std::string out_dir;
  std::uint64_t seed = 1;
};

int run_generate(const GenerateArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  const rpot::RegionConfig cfg = rpot::region_config_from_json_file(a.config);
  rpot::Rng rng(a.seed);
  const rpot::SyntheticRegion region = rpot::generate_region(cfg, rng);

  fs::create_directories(a.out_dir);
  const fs::path out(a.out_dir);
  rpot::save_sites_csv(out / "sites.csv", region.sites);
  rpot::write_truth_json(out / "truth.json", region);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  rpot::write_generate_manifest(out / "manifest.json", cfg, a.seed, wall);
  return 0;
}

struct StudyArgs {
  std::string config;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 0;
};

int run_study_cmd(const StudyArgs& a, bool sweeps_only) {
  rpot::StudyPlan plan = rpot::study_plan_from_json_file(a.config);
  if (a.seed) plan.config.seed = *a.seed;
  if (sweeps_only && plan.kind != rpot::StudyKind::pxi &&
      plan.kind != rpot::StudyKind::xifix)
    throw std::runtime_error(
        "sensitivity expects a config with kind pxi or xifix; got kind " +
        rpot::to_string(plan.kind));

  fs::create_directories(a.out_dir);
  const fs::path out(a.out_dir);

  switch (plan.kind) {
    case rpot::StudyKind::performance: {
      const rpot::StudyResult res = rpot::run_study(plan.config, a.jobs);
      rpot::write_study_csv(out / "study.csv", plan.config.name, res);
      rpot::write_study_manifest(out / "manifest.json", plan.config, res);
      break;
    }
    case rpot::StudyKind::pxi: {
      const rpot::SensitivityResult res = rpot::sensitivity_pxi(
          plan.config, plan.p_grid, plan.probe_prob, a.jobs);
      rpot::write_sensitivity_csv(out / "sensitivity_pxi.csv",
                                  plan.config.name, res);
      rpot::write_sensitivity_manifest(out / "manifest.json", plan.config, res,
                                       rpot::to_string(plan.kind));
      break;
    }
    case rpot::StudyKind::xifix: {
      const rpot::SensitivityResult res =
          rpot::sensitivity_xifix(plan.config, plan.xifix_grid, plan.p_grid,
                                  plan.probe_prob, a.jobs);
      rpot::write_sensitivity_csv(out / "sensitivity_xifix.csv",
                                  plan.config.name, res);
      rpot::write_sensitivity_manifest(out / "manifest.json", plan.config, res,
                                       rpot::to_string(plan.kind));
      break;
    }
    case rpot::StudyKind::bias_c: {
      const rpot::BiasCResult res =
          rpot::bias_c_analysis(plan.config, plan.probe_prob, a.jobs);
      rpot::write_bias_c_csv(out / "bias_c.csv", plan.config.name, res);
      rpot::write_bias_manifest(out / "manifest.json", plan.config, res);
      break;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Regional peaks-over-threshold frequency analysis: at-site fitting, "
      "synthetic region generation, and Monte-Carlo studies"};
  app.require_subcommand(1);

  FitArgs fit_args;
  CLI::App* fit = app.add_subcommand(
      "fit", "Estimate return levels for one site of a region CSV");
  fit->add_option("--data", fit_args.data, "Site data CSV")
      ->required()
      ->check(CLI::ExistingFile);
  fit->add_option("--target", fit_args.target, "Target site id")->required();
  fit->add_option("--estimator", fit_args.estimator,
                  "Estimator: rev, bay or ifl")
      ->check(CLI::IsMember({"rev", "bay", "ifl", "REV", "BAY", "IFL"}))
      ->capture_default_str();
  fit->add_option("--probs", fit_args.probs, "Exceedance probabilities")
      ->check(CLI::Range(0.0, 1.0));
  fit->add_option("--seed", fit_args.seed, "Random seed")
      ->capture_default_str();
  fit->add_option("--out", fit_args.out, "Output estimates CSV")->required();
  fit->add_option("--trace", fit_args.trace, "Optional chain trace CSV");
  fit->add_option("--n-iter", fit_args.chain.n_iter, "Chain iterations")
      ->capture_default_str();
  fit->add_option("--burn-in", fit_args.chain.burn_in, "Burn-in iterations")
      ->capture_default_str();
  fit->add_option("--jump-prob", fit_args.chain.jump_prob,
                  "Between-space move probability")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  fit->add_option("--pilot-sweeps", fit_args.chain.pilot_sweeps,
                  "Pilot chain length")
      ->capture_default_str();
  fit->add_option("--h1-nsim", fit_args.chain.h1_nsim,
                  "Heterogeneity simulation count")
      ->capture_default_str();
  fit->add_option("--xi-fix", fit_args.xi_fix,
                  "Fixed shape for the point mass (default: prior mean)");
  fit->add_option("--p-xi", fit_args.p_xi,
                  "Force the point-mass weight instead of deriving it")
      ->check(CLI::Range(0.0, 1.0));
  fit->add_option("--h1", fit_args.h1,
                  "Force the heterogeneity statistic instead of computing it");

  GenerateArgs gen_args;
  CLI::App* generate = app.add_subcommand(
      "generate", "Draw one synthetic region from a region config");
  generate->add_option("--config", gen_args.config, "Region config JSON")
      ->required()
      ->check(CLI::ExistingFile);
  generate->add_option("--out", gen_args.out_dir, "Output directory")
      ->required();
  generate->add_option("--seed", gen_args.seed, "Random seed")
      ->capture_default_str();

  StudyArgs study_args;
  CLI::App* study = app.add_subcommand(
      "study", "Run the Monte-Carlo study described by a config file");
  study->add_option("--config", study_args.config, "Study config JSON")
      ->required()
      ->check(CLI::ExistingFile);
  study->add_option("--out", study_args.out_dir, "Output directory")
      ->required();
  study->add_option("--seed", study_args.seed, "Override the config seed");
  study->add_option("--jobs", study_args.jobs,
                    "Worker threads (0 = hardware concurrency)")
      ->capture_default_str();

  StudyArgs sens_args;
  CLI::App* sensitivity = app.add_subcommand(
      "sensitivity", "Run a pxi or xifix sweep described by a config file");
  sensitivity->add_option("--config", sens_args.config, "Study config JSON")
      ->required()
      ->check(CLI::ExistingFile);
  sensitivity->add_option("--out", sens_args.out_dir, "Output directory")
      ->required();
  sensitivity->add_option("--seed", sens_args.seed, "Override the config seed");
  sensitivity
      ->add_option("--jobs", sens_args.jobs,
                   "Worker threads (0 = hardware concurrency)")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (fit->parsed()) return run_fit(fit_args);
    if (generate->parsed()) return run_generate(gen_args);
    if (study->parsed()) return run_study_cmd(study_args, false);
    if (sensitivity->parsed()) return run_study_cmd(sens_args, true);
  } catch (const std::exception& ex) {
    std::cerr << "rpot: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}
