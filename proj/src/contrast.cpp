#include "taskseq/contrast.hpp"

#include <algorithm>
#include <fstream>

#include "taskseq/csv.hpp"
#include "taskseq/error.hpp"
#include "taskseq/seqstats.hpp"

namespace taskseq {

GroupSplit split_by_grade(const Cohort& cohort, double q) {
  if (!(q > 0.0 && q <= 0.5))
    throw config_error("InvalidQuantile", "quantile must lie in (0, 0.5]", {{"quantile", q}});

  std::vector<const LearnerRecord*> graded;
  for (const auto& learner : cohort.learners())
    if (learner.grade) graded.push_back(&learner);
  if (graded.size() < 2)
    throw data_error("TooFewGraded", "at least two graded learners are required",
                     {{"graded", graded.size()}});

  std::sort(graded.begin(), graded.end(), [](const LearnerRecord* a, const LearnerRecord* b) {
    if (*a->grade != *b->grade) return *a->grade > *b->grade;
    return a->id < b->id;
  });

  const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(graded.size())));
  if (k == 0)
    throw data_error("TooFewGraded", "quantile leaves the groups empty",
                     {{"graded", graded.size()}, {"quantile", q}});

  GroupSplit split;
  split.quantile = q;
  for (std::size_t i = 0; i < k; ++i) split.high.push_back(graded[i]->id);
  for (std::size_t i = graded.size() - k; i < graded.size(); ++i) split.low.push_back(graded[i]->id);

  const std::size_t low_start = graded.size() - k;
  bool boundary_tie = (k < graded.size() && *graded[k - 1]->grade == *graded[k]->grade) ||
                      (low_start > 0 && *graded[low_start - 1]->grade == *graded[low_start]->grade);
  if (boundary_tie) split.warnings.push_back("boundary_tie");
  if (*graded.front()->grade == *graded.back()->grade) split.warnings.push_back("degenerate_split");
  return split;
}

GroupSplit swapped(const GroupSplit& split) {
  GroupSplit s = split;
  std::swap(s.high, s.low);
  return s;
}

DeltaTransition delta_transition(const Cohort& cohort, const GroupSplit& split, Level level) {
  auto conditional = [&](const std::vector<std::string>& ids, const char* group) {
    Cohort sub = cohort.subset(ids);
    try {
      return level == Level::Task ? transition_probability_matrix(sub).conditional
                                  : session_transition_matrix(sub).conditional;
    } catch (const Error& e) {
      if (e.kind() != "NoTransitions") throw;
      throw data_error("NoTransitions", std::string("no transitions in group ") + group,
                       {{"group", group}});
    }
  };
  RealMatrix high = conditional(split.high, "high");
  RealMatrix low = conditional(split.low, "low");

  DeltaTransition out{RealMatrix(high.rows(), high.cols()), RealMatrix(high.rows(), high.cols()),
                      RealMatrix(high.rows(), high.cols())};
  for (std::size_t i = 0; i < high.rows(); ++i) {
    for (std::size_t j = 0; j < high.cols(); ++j) {
      const double d = high(i, j) - low(i, j);
      out.delta(i, j) = d;
      out.high_larger(i, j) = d > 0.0 ? d : 0.0;
      out.low_larger(i, j) = d < 0.0 ? -d : 0.0;
    }
  }
  return out;
}

namespace {

struct GroupTaskStats {
  std::vector<std::size_t> completed;    // per task, learners who completed it
  std::vector<std::size_t> rank_sum;     // per task, sum of 1-based positions
  std::size_t learners = 0;
};

GroupTaskStats scan_group(const Cohort& cohort, const std::vector<std::string>& ids) {
  const auto T = static_cast<std::size_t>(cohort.course().task_count());
  GroupTaskStats s{std::vector<std::size_t>(T, 0), std::vector<std::size_t>(T, 0), 0};
  for (const auto& id : ids) {
    const LearnerRecord* learner = cohort.find(id);
    if (!learner)
      throw data_error("UnknownLearner", "split references unknown learner " + id,
                       {{"learner_id", id}});
    ++s.learners;
    for (std::size_t j = 0; j < learner->sequence.size(); ++j) {
      const auto t = static_cast<std::size_t>(learner->sequence[j] - 1);
      s.completed[t] += 1;
      s.rank_sum[t] += j + 1;
    }
  }
  return s;
}

std::optional<Quartiles> quartiles(std::vector<double> values) {
  if (values.empty()) return std::nullopt;
  std::sort(values.begin(), values.end());
  return Quartiles{stats::quantile_sorted(values, 0.25), stats::quantile_sorted(values, 0.5),
                   stats::quantile_sorted(values, 0.75)};
}

}  // namespace

TaskContrastReport task_contrast(const Cohort& cohort, const GroupSplit& split) {
  const auto high = scan_group(cohort, split.high);
  const auto low = scan_group(cohort, split.low);
  const auto& course = cohort.course();

  TaskContrastReport report;
  for (TaskId t = 1; t <= course.task_count(); ++t) {
    const auto k = static_cast<std::size_t>(t - 1);
    TaskContrast c;
    c.task = t;
    c.type = course.type_of(t);
    c.freq_high = high.learners ? static_cast<double>(high.completed[k]) / static_cast<double>(high.learners) : 0.0;
    c.freq_low = low.learners ? static_cast<double>(low.completed[k]) / static_cast<double>(low.learners) : 0.0;
    if (high.completed[k])
      c.meanrank_high = static_cast<double>(high.rank_sum[k]) / static_cast<double>(high.completed[k]);
    if (low.completed[k])
      c.meanrank_low = static_cast<double>(low.rank_sum[k]) / static_cast<double>(low.completed[k]);
    c.dfreq = c.freq_high - c.freq_low;
    if (c.meanrank_high && c.meanrank_low) c.drank = *c.meanrank_low - *c.meanrank_high;
    report.tasks.push_back(c);
  }

  for (TaskType type : kAllTaskTypes) {
    std::vector<double> dfreq, drank;
    for (const auto& c : report.tasks) {
      if (c.type != type || !c.drank) continue;
      dfreq.push_back(c.dfreq);
      drank.push_back(*c.drank);
    }
    report.types.push_back({type, dfreq.size(), quartiles(dfreq), quartiles(drank)});
  }
  return report;
}

std::optional<double> confidence_score(const LearnerRecord& learner,
                                       const std::optional<std::set<TaskId>>& tasks) {
  std::size_t confident = 0;
  std::size_t total = 0;
  for (const auto& [task, response] : learner.confidence) {
    if (tasks && !tasks->count(task)) continue;
    ++total;
    if (response == Confidence::Confident) ++confident;
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(confident) / static_cast<double>(total);
}

std::optional<double> task_confidence(const Cohort& cohort, TaskId task) {
  if (!cohort.course().contains(task))
    throw data_error("TaskOutOfRange", "task " + std::to_string(task) + " out of range",
                     {{"task_id", task}});
  std::size_t confident = 0;
  std::size_t total = 0;
  for (const auto& learner : cohort.learners()) {
    auto it = learner.confidence.find(task);
    if (it == learner.confidence.end()) continue;
    ++total;
    if (it->second == Confidence::Confident) ++confident;
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(confident) / static_cast<double>(total);
}

bool has_confidence_data(const Cohort& cohort) {
  return std::any_of(cohort.learners().begin(), cohort.learners().end(),
                     [](const LearnerRecord& l) { return !l.confidence.empty(); });
}

namespace {

GroupConfidence summarize(const std::vector<std::optional<double>>& scores) {
  std::vector<double> values;
  for (const auto& s : scores)
    if (s) values.push_back(*s);
  GroupConfidence g;
  g.scored = values.size();
  if (!values.empty()) g.mean = stats::mean(values);
  g.sd = stats::sample_sd(values);
  return g;
}

}  // namespace

ConfidenceStats confidence_stats(const Cohort& cohort, const GroupSplit& split) {
  ConfidenceStats out;
  for (const auto& learner : cohort.learners()) out.per_learner[learner.id] = confidence_score(learner);

  auto group_scores = [&](const std::vector<std::string>& ids) {
    std::vector<std::optional<double>> scores;
    for (const auto& id : ids) scores.push_back(out.per_learner.at(id));
    return scores;
  };
  out.high = summarize(group_scores(split.high));
  out.low = summarize(group_scores(split.low));

  const Cohort high = cohort.subset(split.high);
  const Cohort low = cohort.subset(split.low);
  for (TaskId t = 1; t <= cohort.course().task_count(); ++t) {
    auto h = task_confidence(high, t);
    auto l = task_confidence(low, t);
    if (!h || !l) continue;
    out.paired_tasks.push_back(t);
    out.high_task_confidence.push_back(*h);
    out.low_task_confidence.push_back(*l);
  }
  try {
    out.test = stats::paired_t_test(out.high_task_confidence, out.low_task_confidence);
  } catch (const Error& e) {
    out.test_error = e.kind();
  }
  return out;
}

nlohmann::json to_json(const GroupSplit& split) {
  return {{"quantile", split.quantile},
          {"high", split.high},
          {"low", split.low},
          {"warnings", split.warnings}};
}

namespace {

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json quartiles_json(const std::optional<Quartiles>& q) {
  if (!q) return nullptr;
  return {{"q1", q->q1}, {"median", q->median}, {"q3", q->q3}};
}

}  // namespace

nlohmann::json to_json(const ConfidenceStats& s) {
  nlohmann::json learners = nlohmann::json::object();
  for (const auto& [id, c] : s.per_learner) learners[id] = optional_json(c);
  auto group = [](const GroupConfidence& g) {
    return nlohmann::json{{"scored", g.scored}, {"mean", optional_json(g.mean)}, {"sd", optional_json(g.sd)}};
  };
  nlohmann::json test = nullptr;
  if (s.test) test = {{"t", s.test->t}, {"p", s.test->p}, {"df", s.test->df}, {"pairing", "task"}};
  return {{"per_learner", learners},
          {"high", group(s.high)},
          {"low", group(s.low)},
          {"paired_tasks", s.paired_tasks},
          {"high_task_confidence", s.high_task_confidence},
          {"low_task_confidence", s.low_task_confidence},
          {"paired_t_test", test},
          {"test_error", s.test_error ? nlohmann::json(*s.test_error) : nlohmann::json(nullptr)}};
}

nlohmann::json type_summaries_json(const TaskContrastReport& report) {
  nlohmann::json types = nlohmann::json::array();
  for (const auto& t : report.types)
    types.push_back({{"task_type", to_token(t.type)},
                     {"tasks", t.tasks},
                     {"dfreq", quartiles_json(t.dfreq)},
                     {"drank", quartiles_json(t.drank)}});
  return types;
}

void write_task_contrast_csv(const TaskContrastReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("WriteFailed", "cannot write " + path.string(), {{"path", path.string()}});
  auto opt = [](const std::optional<double>& v) { return v ? csv::format_double(*v) : std::string(); };
  out << "task_id,task_type,freq_high,freq_low,dfreq,meanrank_high,meanrank_low,drank\n";
  for (const auto& c : report.tasks)
    out << c.task << ',' << to_token(c.type) << ',' << csv::format_double(c.freq_high) << ','
        << csv::format_double(c.freq_low) << ',' << csv::format_double(c.dfreq) << ','
        << opt(c.meanrank_high) << ',' << opt(c.meanrank_low) << ',' << opt(c.drank) << '\n';
}

}  // namespace taskseq
