#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "taskseq/cohort.hpp"
#include "taskseq/matrix.hpp"
#include "taskseq/rng.hpp"

namespace taskseq {

/// T x T log-rate parameters of the accumulation model. The diagonal entry
/// (i, i) is the basal log-rate of task i; the off-diagonal entry (j, i) is
/// the additive change in task i's log-rate once task j is completed:
///
///   rate(i | acquired) = exp(theta(i, i) + sum_{j in acquired} theta(j, i))
///
/// and the next task is drawn with probability proportional to its rate.
class ThetaMatrix {
public:
  ThetaMatrix() = default;
  explicit ThetaMatrix(int tasks) : values_(static_cast<std::size_t>(tasks), static_cast<std::size_t>(tasks), 0.0) {}
  /// Throws InvalidTheta for a non-square or non-finite matrix.
  explicit ThetaMatrix(RealMatrix values);

  int task_count() const { return static_cast<int>(values_.rows()); }

  double basal(TaskId task) const { return at(task, task); }
  /// Effect of completed task `from` on the log-rate of task `to`.
  double at(TaskId from, TaskId to) const {
    return values_(static_cast<std::size_t>(from - 1), static_cast<std::size_t>(to - 1));
  }
  double& at(TaskId from, TaskId to) {
    return values_(static_cast<std::size_t>(from - 1), static_cast<std::size_t>(to - 1));
  }

  const RealMatrix& values() const { return values_; }
  RealMatrix& values() { return values_; }

  bool operator==(const ThetaMatrix&) const = default;

private:
  RealMatrix values_;
};

/// Set of acquired tasks; one vertex of the 2^T hypercube.
class TaskState {
public:
  explicit TaskState(int tasks) : bits_(static_cast<std::size_t>(tasks), false) {}
  TaskState(int tasks, std::span<const TaskId> acquired);

  int task_count() const { return static_cast<int>(bits_.size()); }
  int size() const { return count_; }
  bool full() const { return count_ == task_count(); }
  bool contains(TaskId task) const { return bits_[static_cast<std::size_t>(task - 1)]; }
  void add(TaskId task);

private:
  std::vector<bool> bits_;
  int count_ = 0;
};

/// P(next | state). Throws AlreadyAcquired, FullState or TaskOutOfRange.
double step_probability(const ThetaMatrix& theta, const TaskState& state, TaskId next);
double log_step_probability(const ThetaMatrix& theta, const TaskState& state, TaskId next);

/// Log-probability of observing `sequence` as the first |sequence| steps
/// from the empty state. Incomplete sequences are censored: no stopping
/// probability is included. Throws DuplicateTask / TaskOutOfRange.
double sequence_loglik(const ThetaMatrix& theta, std::span<const TaskId> sequence);

/// Log-likelihood of every prefix: element m is the log-probability of the
/// first m + 1 steps.
std::vector<double> prefix_logliks(const ThetaMatrix& theta, std::span<const TaskId> sequence);

struct McmcConfig {
  // Total Metropolis-Hastings iterations, burn-in included.
  std::int64_t chain_length = 200000;
  std::int64_t burn_in = 50000;
  std::int64_t thinning = 100;
  double proposal_sd = 0.1;
  double prior_sd = 5.0;
  std::uint64_t seed = 1;

  /// Number of retained samples.
  std::int64_t sample_count() const;
  /// Throws InvalidMcmcConfig, or EmptyPosterior when no sample would be kept.
  void validate() const;
};

nlohmann::json to_json(const McmcConfig& config);
McmcConfig mcmc_config_from_json(const nlohmann::json& j, McmcConfig defaults = {});

struct McmcDiagnostics {
  std::int64_t iterations = 0;
  std::int64_t accepted = 0;
  double acceptance_rate = 0.0;
  // Data log-likelihood (prior excluded) at each retained sample.
  std::vector<double> loglik_trace;
  std::vector<std::uint64_t> chain_seeds;
};

struct Posterior {
  std::string group;
  int tasks = 0;
  McmcConfig config;
  McmcDiagnostics diagnostics;
  std::vector<ThetaMatrix> samples;
};

/// Single-site random-walk Metropolis-Hastings targeting
///   prod_k P(sequence_k | theta) * N(theta; 0, prior_sd^2 I),
/// started from theta = 0. Each iteration perturbs one uniformly chosen
/// entry by N(0, proposal_sd^2). Deterministic given config.seed.
/// Empty sequences carry no information and are skipped; throws
/// EmptyTrainingSet when nothing remains.
Posterior fit_mcmc(const std::vector<std::vector<TaskId>>& sequences, int tasks,
                   const McmcConfig& config, std::string group = {});

/// Runs `chains` independent chains (seeds derived from config.seed) on
/// separate threads and concatenates them in chain order.
Posterior fit_mcmc_chains(const std::vector<std::vector<TaskId>>& sequences, int tasks,
                          const McmcConfig& config, int chains, std::string group = {});

Posterior merge_posteriors(const std::vector<Posterior>& chains);

std::vector<TaskId> sample_sequence(const ThetaMatrix& theta, int length, Rng& rng);
std::vector<TaskId> sample_sequence(const ThetaMatrix& theta, int length, std::uint64_t seed);

/// log( mean_s P(prefix | sample s) ), averaging likelihoods over samples.
double marginal_loglik(std::span<const TaskId> prefix, const Posterior& posterior);

/// marginal_loglik for every prefix length 1..|sequence| in one pass.
std::vector<double> marginal_prefix_logliks(std::span<const TaskId> sequence, const Posterior& posterior);

double log_mean_exp(std::span<const double> values);

inline constexpr std::string_view kPosteriorSchema = "taskseq.posterior/1";

nlohmann::json to_json(const ThetaMatrix& theta);
ThetaMatrix theta_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Posterior& posterior);
Posterior posterior_from_json(const nlohmann::json& j);

}  // namespace taskseq
