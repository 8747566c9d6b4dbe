// riskbo command-line driver: profile, tune, run, report.

#include "riskbo/pipeline.hpp"

#include <CLI11.hpp>

int main(int argc, char** argv)
{
  CLI::App app{"Risk-aware benchmarking of Bayesian optimization on protein fitness landscapes"};
  app.set_version_flag("--version", std::string(riskbo::kVersion));
  app.require_subcommand(1, 1);

  std::string config_path, out;
  std::vector<std::string> data;
  std::optional<std::size_t> jobs, top;
  std::optional<std::uint64_t> seed;
  bool tune = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON benchmark configuration")->check(CLI::ExistingFile);
    sub->add_option("--data", data, "landscape CSV (repeatable; added to the config)");
    sub->add_option("--out", out, "output directory");
    sub->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "global seed for splits and bootstraps");
  };
  auto* profile = app.add_subcommand("profile", "landscape complexity properties");
  auto* tune_cmd = app.add_subcommand("tune", "per-landscape hyperparameter grid search");
  auto* run = app.add_subcommand("run", "simulate campaigns for the model grid");
  auto* report = app.add_subcommand("report", "metrics, rankings, bootstrap and plot-ready tables");
  for (auto* s : {profile, tune_cmd, run, report}) add_common(s);
  run->add_flag("--tune", tune, "tune missing hyperparameters before running");
  report->add_option("--top", top, "rows per ranking scope");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? riskbo::kExitOk : riskbo::kExitValidation;
  }

  try {
    riskbo::BenchmarkConfig config = config_path.empty() ? riskbo::BenchmarkConfig{} : riskbo::load_config(config_path);
    for (const auto& d : data) config.landscapes.push_back(riskbo::landscape_from_path(d));
    if (!out.empty()) config.out = out;
    if (jobs) config.jobs = *jobs;
    if (seed) config.seed = *seed;
    if (top) config.top = *top;
    if (tune) config.tune = true;

    if (*profile) return riskbo::cmd_profile(config);
    if (*tune_cmd) return riskbo::cmd_tune(config);
    if (*run) return riskbo::cmd_run(config);
    return riskbo::cmd_report(config);
  } catch (const riskbo::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return riskbo::kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return riskbo::kExitValidation;
  }
}
