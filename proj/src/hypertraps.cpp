#include "taskseq/hypertraps.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "taskseq/error.hpp"

namespace taskseq {

ThetaMatrix::ThetaMatrix(RealMatrix values) : values_(std::move(values)) {
  if (values_.rows() != values_.cols())
    throw config_error("InvalidTheta", "theta must be square",
                       {{"rows", values_.rows()}, {"cols", values_.cols()}});
  for (double v : values_.values())
    if (!std::isfinite(v)) throw config_error("InvalidTheta", "theta entries must be finite");
}

TaskState::TaskState(int tasks, std::span<const TaskId> acquired) : TaskState(tasks) {
  for (TaskId t : acquired) add(t);
}

void TaskState::add(TaskId task) {
  if (task < 1 || task > task_count())
    throw data_error("TaskOutOfRange", "task " + std::to_string(task) + " out of range",
                     {{"task_id", task}});
  const auto k = static_cast<std::size_t>(task - 1);
  if (bits_[k]) throw data_error("DuplicateTask", "task " + std::to_string(task) + " already acquired",
                                 {{"task_id", task}});
  bits_[k] = true;
  ++count_;
}

double log_mean_exp(std::span<const double> values) {
  if (values.empty()) throw data_error("EmptyPosterior", "cannot average zero values");
  const double top = *std::max_element(values.begin(), values.end());
  if (top == -std::numeric_limits<double>::infinity()) return top;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - top);
  return top + std::log(sum / static_cast<double>(values.size()));
}

namespace {

// log sum_{u not acquired} exp(log_rates[u])
double log_normalizer(std::span<const double> log_rates, const std::vector<bool>& acquired) {
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t u = 0; u < log_rates.size(); ++u)
    if (!acquired[u]) top = std::max(top, log_rates[u]);
  double sum = 0.0;
  for (std::size_t u = 0; u < log_rates.size(); ++u)
    if (!acquired[u]) sum += std::exp(log_rates[u] - top);
  return top + std::log(sum);
}

void check_task(TaskId task, int tasks) {
  if (task < 1 || task > tasks)
    throw data_error("TaskOutOfRange", "task " + std::to_string(task) + " out of range 1.." +
                                           std::to_string(tasks),
                     {{"task_id", task}});
}

std::vector<double> log_rates(const ThetaMatrix& theta, const TaskState& state) {
  const int T = theta.task_count();
  std::vector<double> rates(static_cast<std::size_t>(T));
  for (TaskId i = 1; i <= T; ++i) {
    double r = theta.basal(i);
    for (TaskId j = 1; j <= T; ++j)
      if (j != i && state.contains(j)) r += theta.at(j, i);
    rates[static_cast<std::size_t>(i - 1)] = r;
  }
  return rates;
}

}  // namespace

double log_step_probability(const ThetaMatrix& theta, const TaskState& state, TaskId next) {
  const int T = theta.task_count();
  if (state.task_count() != T)
    throw config_error("ShapeMismatch", "state and theta disagree on T");
  check_task(next, T);
  if (state.full()) throw data_error("FullState", "every task is already acquired");
  if (state.contains(next))
    throw data_error("AlreadyAcquired", "task " + std::to_string(next) + " is already acquired",
                     {{"task_id", next}});
  auto rates = log_rates(theta, state);
  std::vector<bool> acquired(static_cast<std::size_t>(T));
  for (TaskId t = 1; t <= T; ++t) acquired[static_cast<std::size_t>(t - 1)] = state.contains(t);
  return rates[static_cast<std::size_t>(next - 1)] - log_normalizer(rates, acquired);
}

double step_probability(const ThetaMatrix& theta, const TaskState& state, TaskId next) {
  return std::exp(log_step_probability(theta, state, next));
}

std::vector<double> prefix_logliks(const ThetaMatrix& theta, std::span<const TaskId> sequence) {
  const int T = theta.task_count();
  const auto n = static_cast<std::size_t>(T);
  std::vector<bool> acquired(n, false);
  std::vector<double> rates(n);
  for (std::size_t i = 0; i < n; ++i) rates[i] = theta.values()(i, i);

  std::vector<double> out;
  out.reserve(sequence.size());
  double total = 0.0;
  for (TaskId t : sequence) {
    check_task(t, T);
    const auto k = static_cast<std::size_t>(t - 1);
    if (acquired[k])
      throw data_error("DuplicateTask", "task " + std::to_string(t) + " repeats in sequence",
                       {{"task_id", t}});
    total += rates[k] - log_normalizer(rates, acquired);
    out.push_back(total);
    acquired[k] = true;
    auto row = theta.values().row(k);
    for (std::size_t u = 0; u < n; ++u)
      if (u != k) rates[u] += row[u];
  }
  return out;
}

double sequence_loglik(const ThetaMatrix& theta, std::span<const TaskId> sequence) {
  if (sequence.empty()) return 0.0;
  return prefix_logliks(theta, sequence).back();
}

std::int64_t McmcConfig::sample_count() const {
  if (thinning <= 0 || chain_length <= burn_in) return 0;
  return (chain_length - burn_in) / thinning;
}

void McmcConfig::validate() const {
  if (chain_length < 0 || burn_in < 0 || thinning < 1)
    throw config_error("InvalidMcmcConfig",
                       "chain_length and burn_in must be >= 0 and thinning >= 1");
  if (!(proposal_sd > 0.0) || !std::isfinite(proposal_sd) || !(prior_sd > 0.0) ||
      !std::isfinite(prior_sd))
    throw config_error("InvalidMcmcConfig", "proposal_sd and prior_sd must be positive and finite");
  if (sample_count() == 0)
    throw config_error("EmptyPosterior", "no samples remain after burn-in and thinning",
                       {{"chain_length", chain_length}, {"burn_in", burn_in}, {"thinning", thinning}});
}

nlohmann::json to_json(const McmcConfig& c) {
  return {{"chain_length", c.chain_length}, {"burn_in", c.burn_in},
          {"thinning", c.thinning},         {"proposal_sd", c.proposal_sd},
          {"prior_sd", c.prior_sd},         {"seed", c.seed}};
}

McmcConfig mcmc_config_from_json(const nlohmann::json& j, McmcConfig c) {
  try {
    c.chain_length = j.value("chain_length", c.chain_length);
    c.burn_in = j.value("burn_in", c.burn_in);
    c.thinning = j.value("thinning", c.thinning);
    c.proposal_sd = j.value("proposal_sd", c.proposal_sd);
    c.prior_sd = j.value("prior_sd", c.prior_sd);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw config_error("InvalidMcmcConfig", e.what());
  }
  return c;
}

namespace {

// Per-step log-rates and normalizers for every training sequence, so that a
// single-entry change of theta is scored by touching only the steps it
// affects. Changing entry (a, b) by d alters task b's log-rate at every step
// where b is still available and a is acquired (all such steps when a == b).
class LikelihoodCache {
public:
  LikelihoodCache(const std::vector<std::vector<TaskId>>& sequences, int tasks) : tasks_(tasks) {
    const auto T = static_cast<std::size_t>(tasks);
    std::size_t steps = 0;
    for (const auto& s : sequences) {
      Sequence seq;
      seq.first_step = steps;
      seq.position.assign(T, static_cast<int>(s.size()));
      for (std::size_t m = 0; m < s.size(); ++m) {
        check_task(s[m], tasks);
        auto& p = seq.position[static_cast<std::size_t>(s[m] - 1)];
        if (p != static_cast<int>(s.size()))
          throw data_error("DuplicateTask", "task repeats in a training sequence",
                           {{"task_id", s[m]}});
        p = static_cast<int>(m);
        seq.tasks.push_back(s[m] - 1);
      }
      steps += s.size();
      sequences_.push_back(std::move(seq));
    }
    log_rate_.assign(steps * T, 0.0);
    log_z_.assign(steps, 0.0);
  }

  void rebuild(const RealMatrix& theta) {
    const auto T = static_cast<std::size_t>(tasks_);
    total_ = 0.0;
    std::vector<bool> acquired(T);
    for (const auto& seq : sequences_) {
      std::fill(acquired.begin(), acquired.end(), false);
      std::vector<double> rates(T);
      for (std::size_t i = 0; i < T; ++i) rates[i] = theta(i, i);
      for (std::size_t m = 0; m < seq.tasks.size(); ++m) {
        const std::size_t step = seq.first_step + m;
        std::copy(rates.begin(), rates.end(), log_rate_.begin() + static_cast<std::ptrdiff_t>(step * T));
        log_z_[step] = log_normalizer(rates, acquired);
        const auto k = static_cast<std::size_t>(seq.tasks[m]);
        total_ += rates[k] - log_z_[step];
        acquired[k] = true;
        auto row = theta.row(k);
        for (std::size_t u = 0; u < T; ++u)
          if (u != k) rates[u] += row[u];
      }
    }
  }

  double total() const { return total_; }

  // Change in total log-likelihood if entry (from, to) moves by d. The new
  // normalizers are kept for commit().
  double propose(std::size_t from, std::size_t to, double d) {
    pending_.clear();
    const double growth = std::expm1(d);
    double change = 0.0;
    for_each_affected(from, to, [&](const Sequence& seq, std::size_t step, bool chosen) {
      const double old_z = log_z_[step];
      const double share = std::exp(log_rate_at(step, to) - old_z);
      // A dominant term cancels badly in log1p; rescore the step instead.
      const double new_z = share <= 0.5 ? old_z + std::log1p(share * growth)
                                        : direct_log_z(seq, step, to, d);
      pending_.push_back(new_z);
      change -= new_z - old_z;
      if (chosen) change += d;
    });
    pending_change_ = change;
    return change;
  }

  void commit(std::size_t from, std::size_t to, double d) {
    std::size_t k = 0;
    for_each_affected(from, to, [&](const Sequence&, std::size_t step, bool) {
      log_rate_at(step, to) += d;
      log_z_[step] = pending_[k++];
    });
    total_ += pending_change_;
  }

private:
  struct Sequence {
    std::vector<int> tasks;     // 0-based
    std::vector<int> position;  // step at which each task is taken; size() if never
    std::size_t first_step = 0;
  };

  double& log_rate_at(std::size_t step, std::size_t task) {
    return log_rate_[step * static_cast<std::size_t>(tasks_) + task];
  }

  double direct_log_z(const Sequence& seq, std::size_t step, std::size_t to, double d) {
    const auto m = static_cast<int>(step - seq.first_step);
    const auto T = static_cast<std::size_t>(tasks_);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t u = 0; u < T; ++u)
      if (seq.position[u] >= m) top = std::max(top, log_rate_at(step, u) + (u == to ? d : 0.0));
    double sum = 0.0;
    for (std::size_t u = 0; u < T; ++u)
      if (seq.position[u] >= m) sum += std::exp(log_rate_at(step, u) + (u == to ? d : 0.0) - top);
    return top + std::log(sum);
  }

  template <typename F>
  void for_each_affected(std::size_t from, std::size_t to, F&& f) {
    for (const auto& seq : sequences_) {
      const int n = static_cast<int>(seq.tasks.size());
      int start = 0;
      if (from != to) {
        const int p = seq.position[from];
        if (p >= n) continue;
        start = p + 1;
      }
      const int taken = seq.position[to];
      const int stop = std::min(taken, n - 1);
      for (int m = start; m <= stop; ++m)
        f(seq, seq.first_step + static_cast<std::size_t>(m), m == taken);
    }
  }

  int tasks_;
  std::vector<Sequence> sequences_;
  std::vector<double> log_rate_;
  std::vector<double> log_z_;
  std::vector<double> pending_;
  double pending_change_ = 0.0;
  double total_ = 0.0;
};

// Incremental updates drift by rounding; a periodic rebuild bounds it.
constexpr std::int64_t kRebuildInterval = 4096;

}  // namespace

Posterior fit_mcmc(const std::vector<std::vector<TaskId>>& sequences, int tasks,
                   const McmcConfig& config, std::string group) {
  config.validate();
  if (tasks < 1) throw config_error("InvalidMcmcConfig", "model needs at least one task");
  std::vector<std::vector<TaskId>> training;
  for (const auto& s : sequences)
    if (!s.empty()) training.push_back(s);
  if (training.empty())
    throw data_error("EmptyTrainingSet", "no non-empty sequences to fit", {{"group", group}});

  const auto T = static_cast<std::size_t>(tasks);
  LikelihoodCache cache(training, tasks);
  RealMatrix theta(T, T, 0.0);
  cache.rebuild(theta);

  Rng rng(config.seed);
  std::uniform_int_distribution<std::size_t> pick(0, T * T - 1);
  std::normal_distribution<double> jump(0.0, config.proposal_sd);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double prior_scale = 1.0 / (2.0 * config.prior_sd * config.prior_sd);

  Posterior posterior;
  posterior.group = std::move(group);
  posterior.tasks = tasks;
  posterior.config = config;
  posterior.diagnostics.chain_seeds = {config.seed};
  posterior.samples.reserve(static_cast<std::size_t>(config.sample_count()));

  std::int64_t accepted = 0;
  for (std::int64_t it = 1; it <= config.chain_length; ++it) {
    const std::size_t idx = pick(rng);
    const std::size_t from = idx / T;
    const std::size_t to = idx % T;
    const double d = jump(rng);
    const double u = unit(rng);

    const double old_value = theta(from, to);
    const double new_value = old_value + d;
    const double log_alpha = cache.propose(from, to, d) +
                             (old_value * old_value - new_value * new_value) * prior_scale;
    if (std::isnan(log_alpha))
      throw numerical_error("NonFiniteLikelihood", "acceptance ratio is NaN", {{"iteration", it}});
    if (log_alpha >= 0.0 || std::log(u) < log_alpha) {
      theta(from, to) = new_value;
      cache.commit(from, to, d);
      ++accepted;
    }
    if (it % kRebuildInterval == 0) cache.rebuild(theta);
    if (!std::isfinite(cache.total()))
      throw numerical_error("NonFiniteLikelihood", "log-likelihood left the finite range",
                            {{"iteration", it}});
    if (it > config.burn_in && (it - config.burn_in) % config.thinning == 0) {
      posterior.samples.emplace_back(theta);
      posterior.diagnostics.loglik_trace.push_back(cache.total());
    }
  }
  posterior.diagnostics.iterations = config.chain_length;
  posterior.diagnostics.accepted = accepted;
  posterior.diagnostics.acceptance_rate =
      config.chain_length ? static_cast<double>(accepted) / static_cast<double>(config.chain_length) : 0.0;
  return posterior;
}

Posterior merge_posteriors(const std::vector<Posterior>& chains) {
  if (chains.empty()) throw data_error("EmptyPosterior", "nothing to merge");
  Posterior merged;
  merged.group = chains.front().group;
  merged.tasks = chains.front().tasks;
  merged.config = chains.front().config;
  merged.diagnostics.chain_seeds.clear();
  for (const auto& c : chains) {
    if (c.tasks != merged.tasks)
      throw config_error("ShapeMismatch", "chains disagree on the number of tasks");
    merged.samples.insert(merged.samples.end(), c.samples.begin(), c.samples.end());
    merged.diagnostics.iterations += c.diagnostics.iterations;
    merged.diagnostics.accepted += c.diagnostics.accepted;
    merged.diagnostics.loglik_trace.insert(merged.diagnostics.loglik_trace.end(),
                                           c.diagnostics.loglik_trace.begin(),
                                           c.diagnostics.loglik_trace.end());
    merged.diagnostics.chain_seeds.insert(merged.diagnostics.chain_seeds.end(),
                                          c.diagnostics.chain_seeds.begin(),
                                          c.diagnostics.chain_seeds.end());
  }
  if (merged.diagnostics.iterations > 0)
    merged.diagnostics.acceptance_rate = static_cast<double>(merged.diagnostics.accepted) /
                                         static_cast<double>(merged.diagnostics.iterations);
  return merged;
}

Posterior fit_mcmc_chains(const std::vector<std::vector<TaskId>>& sequences, int tasks,
                          const McmcConfig& config, int chains, std::string group) {
  if (chains < 1) throw config_error("InvalidMcmcConfig", "need at least one chain");
  if (chains == 1) return fit_mcmc(sequences, tasks, config, std::move(group));

  std::vector<Posterior> results(static_cast<std::size_t>(chains));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(chains));
  {
    std::vector<std::jthread> workers;
    for (int c = 0; c < chains; ++c) {
      workers.emplace_back([&, c] {
        McmcConfig chain_config = config;
        chain_config.seed = derive_seed(config.seed, static_cast<std::uint64_t>(c));
        try {
          results[static_cast<std::size_t>(c)] = fit_mcmc(sequences, tasks, chain_config, group);
        } catch (...) {
          errors[static_cast<std::size_t>(c)] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  Posterior merged = merge_posteriors(results);
  merged.config = config;
  return merged;
}

std::vector<TaskId> sample_sequence(const ThetaMatrix& theta, int length, Rng& rng) {
  const int T = theta.task_count();
  if (length < 1 || length > T)
    throw config_error("LengthOutOfRange", "sequence length must lie in 1..T",
                       {{"length", length}, {"T", T}});
  const auto n = static_cast<std::size_t>(T);
  std::vector<bool> acquired(n, false);
  std::vector<double> rates(n);
  for (std::size_t i = 0; i < n; ++i) rates[i] = theta.values()(i, i);

  std::vector<TaskId> out;
  out.reserve(static_cast<std::size_t>(length));
  std::vector<double> weights(n);
  for (int step = 0; step < length; ++step) {
    const double log_z = log_normalizer(rates, acquired);
    for (std::size_t u = 0; u < n; ++u) weights[u] = acquired[u] ? 0.0 : std::exp(rates[u] - log_z);
    std::discrete_distribution<std::size_t> next(weights.begin(), weights.end());
    const std::size_t k = next(rng);
    out.push_back(static_cast<TaskId>(k + 1));
    acquired[k] = true;
    auto row = theta.values().row(k);
    for (std::size_t u = 0; u < n; ++u)
      if (u != k) rates[u] += row[u];
  }
  return out;
}

std::vector<TaskId> sample_sequence(const ThetaMatrix& theta, int length, std::uint64_t seed) {
  Rng rng(seed);
  return sample_sequence(theta, length, rng);
}

std::vector<double> marginal_prefix_logliks(std::span<const TaskId> sequence, const Posterior& posterior) {
  if (posterior.samples.empty()) throw data_error("EmptyPosterior", "posterior has no samples");
  std::vector<std::vector<double>> per_sample;
  per_sample.reserve(posterior.samples.size());
  for (const auto& s : posterior.samples) per_sample.push_back(prefix_logliks(s, sequence));

  std::vector<double> out(sequence.size());
  std::vector<double> column(per_sample.size());
  for (std::size_t m = 0; m < sequence.size(); ++m) {
    for (std::size_t s = 0; s < per_sample.size(); ++s) column[s] = per_sample[s][m];
    out[m] = log_mean_exp(column);
  }
  return out;
}

double marginal_loglik(std::span<const TaskId> prefix, const Posterior& posterior) {
  if (posterior.samples.empty()) throw data_error("EmptyPosterior", "posterior has no samples");
  std::vector<double> values;
  values.reserve(posterior.samples.size());
  for (const auto& s : posterior.samples) values.push_back(sequence_loglik(s, prefix));
  return log_mean_exp(values);
}

nlohmann::json to_json(const ThetaMatrix& theta) {
  const auto v = theta.values().values();
  return {{"T", theta.task_count()}, {"values", std::vector<double>(v.begin(), v.end())}};
}

ThetaMatrix theta_from_json(const nlohmann::json& j) {
  try {
    const auto T = j.at("T").get<std::size_t>();
    const auto values = j.at("values").get<std::vector<double>>();
    if (values.size() != T * T) throw config_error("InvalidTheta", "theta needs T*T values");
    RealMatrix m(T, T);
    std::copy(values.begin(), values.end(), m.values().begin());
    return ThetaMatrix(std::move(m));
  } catch (const nlohmann::json::exception& e) {
    throw config_error("InvalidTheta", e.what());
  }
}

nlohmann::json to_json(const Posterior& p) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : p.samples) {
    const auto v = s.values().values();
    samples.push_back(std::vector<double>(v.begin(), v.end()));
  }
  return {{"schema", kPosteriorSchema},
          {"group", p.group},
          {"T", p.tasks},
          {"layout", "row-major; entry [j*T+i] is the effect of task j+1 on task i+1"},
          {"config", to_json(p.config)},
          {"seed", p.config.seed},
          {"diagnostics",
           {{"iterations", p.diagnostics.iterations},
            {"accepted", p.diagnostics.accepted},
            {"acceptance_rate", p.diagnostics.acceptance_rate},
            {"loglik_trace", p.diagnostics.loglik_trace},
            {"chain_seeds", p.diagnostics.chain_seeds},
            {"chains", p.diagnostics.chain_seeds.size()}}},
          {"samples", samples}};
}

Posterior posterior_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema").get<std::string>() != kPosteriorSchema)
      throw data_error("MalformedJson", "unsupported posterior schema");
    Posterior p;
    p.group = j.at("group").get<std::string>();
    p.tasks = j.at("T").get<int>();
    p.config = mcmc_config_from_json(j.at("config"));
    const auto& d = j.at("diagnostics");
    p.diagnostics.iterations = d.at("iterations").get<std::int64_t>();
    p.diagnostics.accepted = d.at("accepted").get<std::int64_t>();
    p.diagnostics.acceptance_rate = d.at("acceptance_rate").get<double>();
    p.diagnostics.loglik_trace = d.at("loglik_trace").get<std::vector<double>>();
    p.diagnostics.chain_seeds = d.at("chain_seeds").get<std::vector<std::uint64_t>>();
    const auto T = static_cast<std::size_t>(p.tasks);
    for (const auto& s : j.at("samples")) {
      auto values = s.get<std::vector<double>>();
      if (values.size() != T * T) throw data_error("MalformedJson", "sample has wrong size");
      RealMatrix m(T, T);
      std::copy(values.begin(), values.end(), m.values().begin());
      p.samples.emplace_back(std::move(m));
    }
    if (p.samples.empty()) throw data_error("EmptyPosterior", "posterior file has no samples");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw data_error("MalformedJson", e.what());
  }
}

}  // namespace taskseq
