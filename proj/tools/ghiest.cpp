// Batch front end: identify, estimate, synth, evaluate.
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ghiest/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"GHI estimation from PV plant power"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand

  std::string config;
  std::vector<std::string> overrides;
  std::string seed, threads;
  app.add_option("--config", config, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "random seed (synth)");
  app.add_option("--threads", threads, "worker threads, 0 = all cores");
  app.add_option("--set", overrides, "override a setting, section.key=value");

  std::string omega, spec, est, truth, out;
  auto* identify = app.add_subcommand("identify", "identify orientation coefficients for every plant");
  auto* estimate = app.add_subcommand("estimate", "estimate GHI from plant power");
  estimate->add_option("--omega", omega, "omega file written by identify");
  auto* synth = app.add_subcommand("synth", "write a synthetic dataset");
  synth->add_option("--spec", spec, "synthetic spec (JSON)");
  auto* evaluate = app.add_subcommand("evaluate", "score an estimate against a reference");
  evaluate->add_option("--estimate", est, "estimate CSV");
  evaluate->add_option("--truth", truth, "reference CSV");
  for (auto* sub : {identify, estimate, synth, evaluate}) sub->add_option("--output-dir", out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (!seed.empty()) overrides.push_back("seed=" + seed);
    if (!threads.empty()) overrides.push_back("threads=" + threads);
    if (!omega.empty()) overrides.push_back("paths.omega=" + omega);
    if (!spec.empty()) overrides.push_back("paths.synth_spec=" + spec);
    if (!est.empty()) overrides.push_back("paths.estimate=" + est);
    if (!truth.empty()) overrides.push_back("paths.truth=" + truth);
    if (!out.empty()) overrides.push_back("paths.output_dir=" + out);
    const auto cfg = ghiest::load_run_config(config.empty() ? std::nullopt : std::optional<std::filesystem::path>(config),
                                             overrides);
    if (identify->parsed()) return ghiest::cmd_identify(cfg);
    if (estimate->parsed()) return ghiest::cmd_estimate(cfg);
    if (synth->parsed()) return ghiest::cmd_synth(cfg);
    return ghiest::cmd_evaluate(cfg);
  } catch (const ghiest::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return ghiest::kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return ghiest::kExitInput;
  }
}
