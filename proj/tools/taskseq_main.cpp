#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "taskseq/commands.hpp"
#include "taskseq/error.hpp"

namespace {

struct Flags {
  std::string course, events, grades, confidence, out, config, scenario, mode;
  double quantile = 0.0;
  std::uint64_t seed = 0;
  double holdout_frac = 0.0;
  int chains = 0;
  std::int64_t chain_length = 0, burn_in = 0, thinning = 0;
  double proposal_sd = 0.0, prior_sd = 0.0;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON config file; flags override its fields");
  cmd->add_option("--course", f.course, "course spec CSV");
  cmd->add_option("--events", f.events, "events CSV");
  cmd->add_option("--grades", f.grades, "grades CSV");
  cmd->add_option("--confidence", f.confidence, "confidence CSV");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--quantile", f.quantile, "group quantile q in (0, 0.5]");
  cmd->add_option("--seed", f.seed, "random seed");
}

void add_mcmc(CLI::App* cmd, Flags& f) {
  cmd->add_option("--chain-length", f.chain_length, "MCMC iterations including burn-in");
  cmd->add_option("--burn-in", f.burn_in, "MCMC burn-in iterations");
  cmd->add_option("--thinning", f.thinning, "keep every k-th post-burn-in state");
  cmd->add_option("--proposal-sd", f.proposal_sd, "random-walk proposal sd");
  cmd->add_option("--prior-sd", f.prior_sd, "Gaussian prior sd");
  cmd->add_option("--chains", f.chains, "independent chains per group");
}

taskseq::RunConfig build_config(const CLI::App& cmd, const Flags& f) {
  taskseq::RunConfig c;
  if (cmd.count("--config")) c = taskseq::config_from_json(taskseq::read_json(f.config));
  nlohmann::json overrides = nlohmann::json::object();
  auto set = [&](const char* flag, const char* key, const auto& value) {
    if (cmd.get_option_no_throw(flag) && cmd.count(flag)) overrides[key] = value;
  };
  set("--course", "course", f.course);
  set("--events", "events", f.events);
  set("--grades", "grades", f.grades);
  set("--confidence", "confidence", f.confidence);
  set("--out", "out", f.out);
  set("--quantile", "quantile", f.quantile);
  set("--seed", "seed", f.seed);
  set("--mode", "mode", f.mode);
  set("--holdout-frac", "holdout_frac", f.holdout_frac);
  set("--chains", "chains", f.chains);
  set("--scenario", "scenario", f.scenario);
  nlohmann::json mcmc = nlohmann::json::object();
  auto set_mcmc = [&](const char* flag, const char* key, const auto& value) {
    if (cmd.get_option_no_throw(flag) && cmd.count(flag)) mcmc[key] = value;
  };
  set_mcmc("--chain-length", "chain_length", f.chain_length);
  set_mcmc("--burn-in", "burn_in", f.burn_in);
  set_mcmc("--thinning", "thinning", f.thinning);
  set_mcmc("--proposal-sd", "proposal_sd", f.proposal_sd);
  set_mcmc("--prior-sd", "prior_sd", f.prior_sd);
  if (!mcmc.empty()) overrides["mcmc"] = mcmc;
  return taskseq::config_from_json(overrides, c);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Task-sequence analytics: sequence statistics, group contrasts and a hypercubic classifier"};
  app.require_subcommand(1);
  Flags f;

  auto* stats = app.add_subcommand("stats", "position/transition matrices, deviation profiles, heatmaps");
  add_common(stats, f);
  auto* contrast = app.add_subcommand("contrast", "group differences, task contrasts, confidence statistics");
  add_common(contrast, f);
  auto* fit = app.add_subcommand("fit", "fit one posterior per grade group and persist it");
  add_common(fit, f);
  add_mcmc(fit, f);
  auto* classify = app.add_subcommand("classify", "prefix classification experiment");
  add_common(classify, f);
  add_mcmc(classify, f);
  classify->add_option("--mode", f.mode, "in-sample or holdout");
  classify->add_option("--holdout-frac", f.holdout_frac, "held-out fraction per group");
  auto* simulate = app.add_subcommand("simulate", "write a synthetic cohort in the input CSV formats");
  add_common(simulate, f);
  simulate->add_option("--scenario", f.scenario, "scenario JSON file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    nlohmann::json err = {{"error", "InvalidArguments"}, {"category", "config"}, {"message", e.what()}};
    std::cerr << err.dump() << '\n';
    return 2;
  }

  try {
    nlohmann::json summary;
    if (*stats) summary = taskseq::cmd_stats(build_config(*stats, f));
    else if (*contrast) summary = taskseq::cmd_contrast(build_config(*contrast, f));
    else if (*fit) summary = taskseq::cmd_fit(build_config(*fit, f));
    else if (*classify) summary = taskseq::cmd_classify(build_config(*classify, f));
    else if (*simulate) summary = taskseq::cmd_simulate(build_config(*simulate, f));
    std::cout << summary.dump() << '\n';
    return 0;
  } catch (const taskseq::Error& e) {
    std::cerr << e.to_json().dump() << '\n';
    return taskseq::exit_code(e.category());
  } catch (const std::exception& e) {
    nlohmann::json err = {{"error", "InternalError"}, {"message", e.what()}};
    std::cerr << err.dump() << '\n';
    return 1;
  }
}
