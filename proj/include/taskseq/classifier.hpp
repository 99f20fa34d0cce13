#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "taskseq/cohort.hpp"
#include "taskseq/contrast.hpp"
#include "taskseq/hypertraps.hpp"

namespace taskseq {

struct ClassifierInput {
  const Posterior& g1;
  const Posterior& g2;
  double prior_g1 = 0.5;
  double prior_g2 = 0.5;

  /// Throws InvalidPrior / ShapeMismatch.
  void validate() const;
};

/// Logistic of a log-odds value, clamped to [2^-53, 1 - 2^-53] so results
/// stay strictly inside (0, 1). Built so that f(-x) == 1 - f(x) exactly.
double probability_from_log_odds(double log_odds);

/// log P(prefix | g1) + log P(g1) - log P(prefix | g2) - log P(g2).
double prefix_log_odds(std::span<const TaskId> prefix, const ClassifierInput& input);

/// P(g1 | prefix) from the odds ratio of posterior-averaged likelihoods.
double classify_prefix(std::span<const TaskId> prefix, const ClassifierInput& input);

struct LabeledSequence {
  std::string learner_id;
  std::string true_group;  // "g1" or "g2"
  std::vector<TaskId> sequence;
};

struct ProbabilityCurve {
  std::string learner_id;
  std::string true_group;
  std::vector<double> values;  // values[n-1] = P(g1 | first n tasks)
};

struct CurvePoint {
  int n = 0;
  std::size_t learners = 0;   // learners with at least n completions
  double mean = 0.0;
  double fraction_above_half = 0.0;
};

/// Mean curve and fraction above 0.5 at each prefix length n, over the
/// curves that reach length n.
std::vector<CurvePoint> aggregate_curves(const std::vector<ProbabilityCurve>& curves);

/// Throws EmptySequence for a learner without completions.
std::vector<ProbabilityCurve> probability_curves(const std::vector<LabeledSequence>& learners,
                                                 const ClassifierInput& input);

enum class ExperimentMode { InSample, Holdout };

std::string_view to_token(ExperimentMode mode);
ExperimentMode experiment_mode_from_token(std::string_view token);

struct ExperimentConfig {
  double quantile = 0.25;
  ExperimentMode mode = ExperimentMode::InSample;
  double holdout_frac = 0.3;
  std::uint64_t seed = 1;
  McmcConfig mcmc;  // seed is replaced by seeds derived from `seed`
  int chains = 1;
};

struct ExperimentReport {
  ExperimentConfig config;
  GroupSplit split;
  std::vector<std::string> train_g1, train_g2, eval_g1, eval_g2;
  double prior_g1 = 0.5;
  double prior_g2 = 0.5;
  Posterior posterior_g1;
  Posterior posterior_g2;
  std::vector<ProbabilityCurve> curves;
  std::vector<CurvePoint> aggregate_g1;  // over evaluated learners whose true group is g1
  std::vector<CurvePoint> aggregate_g2;
};

/// Splits the cohort by grade, fits one posterior per group and scores
/// evaluation learners prefix by prefix. In-sample mode trains and evaluates
/// on every learner of both groups; holdout mode shuffles each group with a
/// seeded generator, holds out round(holdout_frac * n) learners for
/// evaluation and trains on the rest. Learners with empty sequences are
/// left out of both roles. Throws GroupTooSmall when a training portion has
/// fewer than two learners or a holdout portion is empty.
ExperimentReport run_experiment(const Cohort& cohort, const ExperimentConfig& config);

/// Everything except the posterior samples (those are persisted separately).
nlohmann::json to_json(const ExperimentReport& report);
/// Long format `learner_id,true_group,n,p_g1`.
void write_curves_csv(const std::vector<ProbabilityCurve>& curves, const std::filesystem::path& path);

}  // namespace taskseq
