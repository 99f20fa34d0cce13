#include "taskseq/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "taskseq/error.hpp"
#include "taskseq/rng.hpp"

namespace taskseq {

void Scenario::validate() const {
  auto fail = [](const std::string& msg) { return config_error("InvalidScenario", msg); };
  if (tasks < 1) throw fail("scenario needs at least one task");
  if (sessions < 1 || sessions > tasks) throw fail("sessions must lie in 1..T");
  if (dropout.stop_probability < 0.0 || dropout.stop_probability >= 1.0)
    throw fail("dropout stop probability must lie in [0, 1)");
  if (dropout.min_length < 1 || dropout.min_length > tasks) throw fail("dropout min_length must lie in 1..T");
  for (const auto& g : groups) {
    if (g.learners < 0) throw fail("group sizes must be >= 0");
    if (g.theta.task_count() != tasks) throw fail("theta of group '" + g.label + "' is not T x T");
    if (!(g.grade_min >= 0.0 && g.grade_min <= g.grade_max && g.grade_max <= 100.0))
      throw fail("grade band of group '" + g.label + "' must satisfy 0 <= min <= max <= 100");
    if (g.confidence_rate && !(*g.confidence_rate >= 0.0 && *g.confidence_rate <= 1.0))
      throw fail("confidence_rate must lie in [0, 1]");
  }
  if (quantile) {
    if (!(*quantile > 0.0 && *quantile <= 0.5)) throw fail("quantile must lie in (0, 0.5]");
    if (groups.size() < 2) throw fail("a quantile-aligned scenario needs at least two groups");
    for (std::size_t k = 1; k < groups.size(); ++k)
      if (!(groups[k - 1].grade_min > groups[k].grade_max))
        throw fail("grade bands must be disjoint and ordered from highest to lowest");
    int total = 0;
    for (const auto& g : groups) total += g.learners;
    const auto k = static_cast<int>(std::floor(*quantile * total));
    if (groups.front().learners != k || groups.back().learners != k)
      throw fail("first and last groups must each hold floor(q * N) = " + std::to_string(k) + " learners");
  }
}

CourseSpec Scenario::course() const {
  std::vector<TaskInfo> infos;
  const auto& types = task_types.empty()
                          ? std::vector<TaskType>(std::begin(kAllTaskTypes), std::end(kAllTaskTypes))
                          : task_types;
  for (int t = 1; t <= tasks; ++t) {
    // Even spread: task t falls in session ceil(t * S / T).
    const int session = static_cast<int>((static_cast<long long>(t) * sessions + tasks - 1) / tasks);
    infos.push_back({t, session, types[static_cast<std::size_t>(t - 1) % types.size()]});
  }
  return CourseSpec(std::move(infos));
}

SyntheticCohort generate_cohort(const Scenario& scenario) {
  scenario.validate();
  SyntheticCohort out;
  std::vector<LearnerRecord> learners;
  std::uint64_t index = 0;
  for (const auto& group : scenario.groups) {
    for (int k = 0; k < group.learners; ++k, ++index) {
      Rng rng(derive_seed(scenario.seed, index));
      int length = scenario.tasks;
      if (scenario.dropout.stop_probability > 0.0) {
        std::geometric_distribution<int> extra(scenario.dropout.stop_probability);
        length = std::min(scenario.tasks, scenario.dropout.min_length + extra(rng));
      }
      LearnerRecord learner;
      char id[64];
      std::snprintf(id, sizeof(id), "%s_%04d", group.label.c_str(), k + 1);
      learner.id = id;
      learner.sequence = sample_sequence(group.theta, length, rng);
      std::uniform_real_distribution<double> grade(group.grade_min, group.grade_max);
      learner.grade = group.grade_min == group.grade_max ? group.grade_min : grade(rng);
      if (group.confidence_rate) {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (TaskId t : learner.sequence) {
          const double u = unit(rng);
          Confidence c = Confidence::Confident;
          if (u >= *group.confidence_rate)
            c = (u - *group.confidence_rate) < 0.5 * (1.0 - *group.confidence_rate) ? Confidence::Revisit
                                                                                   : Confidence::Support;
          learner.confidence[t] = c;
        }
      }
      out.labels[learner.id] = group.label;
      learners.push_back(std::move(learner));
    }
  }
  out.cohort = Cohort(scenario.course(), std::move(learners));
  return out;
}

ThetaMatrix nominal_chain_theta(int tasks, double strength, double basal) {
  ThetaMatrix theta(tasks);
  for (TaskId i = 1; i <= tasks; ++i) theta.at(i, i) = basal;
  theta.at(1, 1) += strength;
  for (TaskId i = 1; i < tasks; ++i) theta.at(i, i + 1) = strength;
  return theta;
}

ThetaMatrix theta_from_spec(const nlohmann::json& spec, int tasks) {
  try {
    const std::string kind = spec.at("kind").get<std::string>();
    if (kind == "zero") return ThetaMatrix(tasks);
    if (kind == "nominal_chain")
      return nominal_chain_theta(tasks, spec.at("strength").get<double>(), spec.value("basal", 0.0));
    if (kind == "random") {
      const double sd = spec.at("sd").get<double>();
      Rng rng(spec.value("seed", std::uint64_t{1}));
      std::normal_distribution<double> draw(0.0, sd);
      ThetaMatrix theta(tasks);
      for (double& v : theta.values().values()) v = draw(rng);
      return theta;
    }
    if (kind == "matrix") {
      const auto rows = spec.at("values").get<std::vector<std::vector<double>>>();
      const auto T = static_cast<std::size_t>(tasks);
      if (rows.size() != T) throw config_error("InvalidTheta", "matrix theta must be T x T");
      RealMatrix m(T, T);
      for (std::size_t i = 0; i < T; ++i) {
        if (rows[i].size() != T) throw config_error("InvalidTheta", "matrix theta must be T x T");
        for (std::size_t j = 0; j < T; ++j) m(i, j) = rows[i][j];
      }
      return ThetaMatrix(std::move(m));
    }
    throw config_error("InvalidTheta", "unknown theta kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw config_error("InvalidTheta", e.what());
  }
}

Scenario scenario_from_json(const nlohmann::json& j) {
  try {
    Scenario s;
    s.tasks = j.at("T").get<int>();
    s.sessions = j.value("S", 1);
    if (j.contains("task_types"))
      for (const auto& token : j.at("task_types")) {
        auto type = task_type_from_token(token.get<std::string>());
        if (!type) throw config_error("InvalidScenario", "unknown task type " + token.dump());
        s.task_types.push_back(*type);
      }
    for (const auto& g : j.at("groups")) {
      GroupScenario group;
      group.label = g.at("label").get<std::string>();
      group.learners = g.at("N").get<int>();
      group.theta = theta_from_spec(g.value("theta", nlohmann::json{{"kind", "zero"}}), s.tasks);
      group.grade_min = g.value("grade_min", 0.0);
      group.grade_max = g.value("grade_max", 100.0);
      if (g.contains("confidence_rate") && !g.at("confidence_rate").is_null())
        group.confidence_rate = g.at("confidence_rate").get<double>();
      s.groups.push_back(std::move(group));
    }
    if (j.contains("dropout")) {
      s.dropout.stop_probability = j.at("dropout").value("stop_probability", 0.0);
      s.dropout.min_length = j.at("dropout").value("min_length", 1);
    }
    if (j.contains("quantile") && !j.at("quantile").is_null()) s.quantile = j.at("quantile").get<double>();
    s.seed = j.value("seed", std::uint64_t{1});
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw config_error("InvalidScenario", e.what());
  }
}

namespace {

void check_enumerable(const ThetaMatrix& theta) {
  if (theta.task_count() > kMaxEnumerationTasks)
    throw config_error("TooLarge", "enumeration is limited to T <= 8",
                       {{"T", theta.task_count()}});
}

// Depth-first walk over ordered prefixes carrying the log-probability.
template <typename Visit>
void walk(const ThetaMatrix& theta, int length, std::vector<TaskId>& prefix, TaskState& state,
          double log_p, Visit& visit) {
  if (static_cast<int>(prefix.size()) == length) {
    visit(prefix, log_p);
    return;
  }
  for (TaskId t = 1; t <= theta.task_count(); ++t) {
    if (state.contains(t)) continue;
    const double step = log_step_probability(theta, state, t);
    TaskState next = state;
    next.add(t);
    prefix.push_back(t);
    walk(theta, length, prefix, next, log_p + step, visit);
    prefix.pop_back();
  }
}

}  // namespace

std::map<std::vector<TaskId>, double> enumerate_orderings(const ThetaMatrix& theta, int length) {
  check_enumerable(theta);
  if (length < 0 || length > theta.task_count())
    throw config_error("LengthOutOfRange", "length must lie in 0..T", {{"length", length}});
  std::map<std::vector<TaskId>, double> out;
  std::vector<TaskId> prefix;
  TaskState state(theta.task_count());
  auto visit = [&](const std::vector<TaskId>& p, double log_p) { out[p] = std::exp(log_p); };
  walk(theta, length, prefix, state, 0.0, visit);
  return out;
}

PositionMatrix exact_position_matrix(const ThetaMatrix& theta) {
  check_enumerable(theta);
  const auto T = static_cast<std::size_t>(theta.task_count());
  PositionMatrix m{CountMatrix(T, T, 0), RealMatrix(T, T, 0.0)};
  std::vector<TaskId> prefix;
  TaskState state(theta.task_count());
  auto visit = [&](const std::vector<TaskId>& p, double log_p) {
    const double prob = std::exp(log_p);
    for (std::size_t j = 0; j < p.size(); ++j) m.probabilities(static_cast<std::size_t>(p[j] - 1), j) += prob;
  };
  walk(theta, theta.task_count(), prefix, state, 0.0, visit);
  return m;
}

}  // namespace taskseq
