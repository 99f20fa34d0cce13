#include "taskseq/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "taskseq/csv.hpp"
#include "taskseq/error.hpp"

namespace taskseq {

void ClassifierInput::validate() const {
  if (!(prior_g1 > 0.0) || !(prior_g2 > 0.0) || std::fabs(prior_g1 + prior_g2 - 1.0) > 1e-12)
    throw config_error("InvalidPrior", "group priors must be positive and sum to 1",
                       {{"prior_g1", prior_g1}, {"prior_g2", prior_g2}});
  if (g1.tasks != g2.tasks)
    throw config_error("ShapeMismatch", "posteriors disagree on the number of tasks");
  if (g1.samples.empty() || g2.samples.empty())
    throw data_error("EmptyPosterior", "classifier needs non-empty posteriors");
}

double probability_from_log_odds(double log_odds) {
  constexpr double kUpper = 1.0 - 0x1p-53;
  double q = 1.0 / (1.0 + std::exp(-std::fabs(log_odds)));  // in [0.5, 1]
  q = std::min(q, kUpper);
  return log_odds >= 0.0 ? q : 1.0 - q;
}

double prefix_log_odds(std::span<const TaskId> prefix, const ClassifierInput& input) {
  input.validate();
  return (marginal_loglik(prefix, input.g1) + std::log(input.prior_g1)) -
         (marginal_loglik(prefix, input.g2) + std::log(input.prior_g2));
}

double classify_prefix(std::span<const TaskId> prefix, const ClassifierInput& input) {
  return probability_from_log_odds(prefix_log_odds(prefix, input));
}

std::vector<ProbabilityCurve> probability_curves(const std::vector<LabeledSequence>& learners,
                                                 const ClassifierInput& input) {
  input.validate();
  const double log_prior_ratio = std::log(input.prior_g1) - std::log(input.prior_g2);
  std::vector<ProbabilityCurve> curves;
  curves.reserve(learners.size());
  for (const auto& learner : learners) {
    if (learner.sequence.empty())
      throw data_error("EmptySequence", "learner " + learner.learner_id + " has no completions",
                       {{"learner_id", learner.learner_id}});
    const auto l1 = marginal_prefix_logliks(learner.sequence, input.g1);
    const auto l2 = marginal_prefix_logliks(learner.sequence, input.g2);
    ProbabilityCurve curve{learner.learner_id, learner.true_group, {}};
    curve.values.reserve(l1.size());
    for (std::size_t m = 0; m < l1.size(); ++m)
      curve.values.push_back(probability_from_log_odds((l1[m] - l2[m]) + log_prior_ratio));
    curves.push_back(std::move(curve));
  }
  return curves;
}

std::vector<CurvePoint> aggregate_curves(const std::vector<ProbabilityCurve>& curves) {
  std::size_t longest = 0;
  for (const auto& c : curves) longest = std::max(longest, c.values.size());
  std::vector<CurvePoint> points;
  for (std::size_t m = 0; m < longest; ++m) {
    CurvePoint p;
    p.n = static_cast<int>(m + 1);
    double sum = 0.0;
    std::size_t above = 0;
    for (const auto& c : curves) {
      if (c.values.size() <= m) continue;
      ++p.learners;
      sum += c.values[m];
      if (c.values[m] > 0.5) ++above;
    }
    p.mean = sum / static_cast<double>(p.learners);
    p.fraction_above_half = static_cast<double>(above) / static_cast<double>(p.learners);
    points.push_back(p);
  }
  return points;
}

std::string_view to_token(ExperimentMode mode) {
  return mode == ExperimentMode::InSample ? "in-sample" : "holdout";
}

ExperimentMode experiment_mode_from_token(std::string_view token) {
  if (token == "in-sample" || token == "in_sample") return ExperimentMode::InSample;
  if (token == "holdout") return ExperimentMode::Holdout;
  throw config_error("InvalidMode", "mode must be in-sample or holdout", {{"mode", std::string(token)}});
}

namespace {

struct Portion {
  std::vector<const LearnerRecord*> train;
  std::vector<const LearnerRecord*> eval;
};

Portion partition(const Cohort& cohort, const std::vector<std::string>& ids,
                  const ExperimentConfig& config, std::uint64_t seed, const char* group) {
  std::vector<const LearnerRecord*> members;
  for (const auto& id : ids) {
    const LearnerRecord* learner = cohort.find(id);
    if (learner && !learner->sequence.empty()) members.push_back(learner);
  }
  Portion p;
  if (config.mode == ExperimentMode::InSample) {
    p.train = members;
    p.eval = members;
  } else {
    Rng rng(seed);
    std::shuffle(members.begin(), members.end(), rng);
    const auto n_eval = static_cast<std::size_t>(
        std::lround(config.holdout_frac * static_cast<double>(members.size())));
    p.eval.assign(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_eval));
    p.train.assign(members.begin() + static_cast<std::ptrdiff_t>(n_eval), members.end());
    if (p.eval.empty())
      throw data_error("GroupTooSmall", std::string("holdout portion of group ") + group + " is empty",
                       {{"group", group}, {"members", members.size()}});
    auto by_id = [](const LearnerRecord* a, const LearnerRecord* b) { return a->id < b->id; };
    std::sort(p.eval.begin(), p.eval.end(), by_id);
    std::sort(p.train.begin(), p.train.end(), by_id);
  }
  if (p.train.size() < 2)
    throw data_error("GroupTooSmall",
                     std::string("training portion of group ") + group + " has fewer than 2 learners",
                     {{"group", group}, {"train", p.train.size()}});
  return p;
}

std::vector<std::vector<TaskId>> sequences_of(const std::vector<const LearnerRecord*>& learners) {
  std::vector<std::vector<TaskId>> out;
  for (const auto* l : learners) out.push_back(l->sequence);
  return out;
}

std::vector<std::string> ids_of(const std::vector<const LearnerRecord*>& learners) {
  std::vector<std::string> out;
  for (const auto* l : learners) out.push_back(l->id);
  return out;
}

}  // namespace

ExperimentReport run_experiment(const Cohort& cohort, const ExperimentConfig& config) {
  if (config.mode == ExperimentMode::Holdout && !(config.holdout_frac > 0.0 && config.holdout_frac < 1.0))
    throw config_error("InvalidHoldoutFraction", "holdout fraction must lie in (0, 1)",
                       {{"holdout_frac", config.holdout_frac}});
  config.mcmc.validate();

  ExperimentReport report;
  report.config = config;
  report.split = split_by_grade(cohort, config.quantile);

  const Portion g1 = partition(cohort, report.split.high, config, derive_seed(config.seed, 0), "g1");
  const Portion g2 = partition(cohort, report.split.low, config, derive_seed(config.seed, 1), "g2");
  report.train_g1 = ids_of(g1.train);
  report.train_g2 = ids_of(g2.train);
  report.eval_g1 = ids_of(g1.eval);
  report.eval_g2 = ids_of(g2.eval);

  const double n1 = static_cast<double>(g1.train.size());
  const double n2 = static_cast<double>(g2.train.size());
  report.prior_g1 = n1 / (n1 + n2);
  report.prior_g2 = n2 / (n1 + n2);

  const int T = cohort.course().task_count();
  McmcConfig mcmc1 = config.mcmc;
  mcmc1.seed = derive_seed(config.seed, 2);
  McmcConfig mcmc2 = config.mcmc;
  mcmc2.seed = derive_seed(config.seed, 3);
  report.posterior_g1 = fit_mcmc_chains(sequences_of(g1.train), T, mcmc1, config.chains, "g1");
  report.posterior_g2 = fit_mcmc_chains(sequences_of(g2.train), T, mcmc2, config.chains, "g2");

  ClassifierInput input{report.posterior_g1, report.posterior_g2, report.prior_g1, report.prior_g2};
  std::vector<LabeledSequence> eval;
  for (const auto* l : g1.eval) eval.push_back({l->id, "g1", l->sequence});
  for (const auto* l : g2.eval) eval.push_back({l->id, "g2", l->sequence});
  report.curves = probability_curves(eval, input);

  std::vector<ProbabilityCurve> c1, c2;
  for (const auto& c : report.curves) (c.true_group == "g1" ? c1 : c2).push_back(c);
  report.aggregate_g1 = aggregate_curves(c1);
  report.aggregate_g2 = aggregate_curves(c2);
  return report;
}

namespace {

nlohmann::json aggregate_json(const std::vector<CurvePoint>& points) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : points)
    out.push_back({{"n", p.n},
                   {"learners", p.learners},
                   {"mean", p.mean},
                   {"fraction_above_half", p.fraction_above_half}});
  return out;
}

nlohmann::json posterior_summary(const Posterior& p) {
  return {{"group", p.group},
          {"samples", p.samples.size()},
          {"acceptance_rate", p.diagnostics.acceptance_rate},
          {"chain_seeds", p.diagnostics.chain_seeds},
          {"config", to_json(p.config)}};
}

}  // namespace

nlohmann::json to_json(const ExperimentReport& r) {
  nlohmann::json curves = nlohmann::json::array();
  for (const auto& c : r.curves)
    curves.push_back({{"learner_id", c.learner_id}, {"true_group", c.true_group}, {"p_g1", c.values}});
  return {{"config",
           {{"quantile", r.config.quantile},
            {"mode", to_token(r.config.mode)},
            {"holdout_frac", r.config.holdout_frac},
            {"seed", r.config.seed},
            {"chains", r.config.chains},
            {"mcmc", to_json(r.config.mcmc)}}},
          {"split", to_json(r.split)},
          {"train", {{"g1", r.train_g1}, {"g2", r.train_g2}}},
          {"eval", {{"g1", r.eval_g1}, {"g2", r.eval_g2}}},
          {"priors", {{"g1", r.prior_g1}, {"g2", r.prior_g2}}},
          {"posteriors", {{"g1", posterior_summary(r.posterior_g1)}, {"g2", posterior_summary(r.posterior_g2)}}},
          {"curves", curves},
          {"aggregates", {{"g1", aggregate_json(r.aggregate_g1)}, {"g2", aggregate_json(r.aggregate_g2)}}}};
}

void write_curves_csv(const std::vector<ProbabilityCurve>& curves, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("WriteFailed", "cannot write " + path.string(), {{"path", path.string()}});
  out << "learner_id,true_group,n,p_g1\n";
  for (const auto& c : curves)
    for (std::size_t m = 0; m < c.values.size(); ++m)
      out << csv::escape(c.learner_id) << ',' << c.true_group << ',' << (m + 1) << ','
          << csv::format_double(c.values[m]) << '\n';
}

}  // namespace taskseq
