#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "taskseq/cohort.hpp"
#include "taskseq/matrix.hpp"
#include "taskseq/stats.hpp"

namespace taskseq {

/// Top and bottom floor(q * N') graded learners, N' = number of graded
/// learners. Grade ties are ordered by learner id ascending.
struct GroupSplit {
  std::vector<std::string> high;
  std::vector<std::string> low;
  double quantile = 0.25;
  // "boundary_tie" when a group boundary cuts through equal grades,
  // "degenerate_split" when every graded learner has the same grade.
  std::vector<std::string> warnings;
};

/// Throws InvalidQuantile unless 0 < q <= 0.5, TooFewGraded when fewer than
/// two learners are graded or a group would be empty.
GroupSplit split_by_grade(const Cohort& cohort, double q);

GroupSplit swapped(const GroupSplit& split);

enum class Level { Task, Session };

struct DeltaTransition {
  RealMatrix delta;         // conditional(high) - conditional(low)
  RealMatrix high_larger;   // max(delta, 0)
  RealMatrix low_larger;    // max(-delta, 0)
};

/// Throws NoTransitions with details {"group": "high"|"low"}.
DeltaTransition delta_transition(const Cohort& cohort, const GroupSplit& split, Level level);

struct TaskContrast {
  TaskId task = 0;
  TaskType type = TaskType::Coursework;
  double freq_high = 0.0;
  double freq_low = 0.0;
  std::optional<double> meanrank_high;
  std::optional<double> meanrank_low;
  double dfreq = 0.0;
  // meanrank_low - meanrank_high: positive when the high group does the task
  // earlier in its sequences.
  std::optional<double> drank;
};

struct Quartiles {
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
};

/// Median and interquartile range per task type, over that type's tasks
/// with a defined drank.
struct TypeSummary {
  TaskType type = TaskType::Coursework;
  std::size_t tasks = 0;
  std::optional<Quartiles> dfreq;
  std::optional<Quartiles> drank;
};

struct TaskContrastReport {
  std::vector<TaskContrast> tasks;
  std::vector<TypeSummary> types;
};

TaskContrastReport task_contrast(const Cohort& cohort, const GroupSplit& split);

/// confident / (revisit + support + confident) over the learner's responses,
/// optionally restricted to `tasks`. nullopt when no response is in scope.
std::optional<double> confidence_score(const LearnerRecord& learner,
                                       const std::optional<std::set<TaskId>>& tasks = std::nullopt);

/// Fraction of responding learners who answered Confident for `task`.
std::optional<double> task_confidence(const Cohort& cohort, TaskId task);

struct GroupConfidence {
  std::size_t scored = 0;
  std::optional<double> mean;
  std::optional<double> sd;
};

/// Learner-level scores, group summaries, and a paired t-test over tasks
/// that pairs per-task group mean confidence (tasks with at least one
/// response in both groups).
struct ConfidenceStats {
  std::map<std::string, std::optional<double>> per_learner;
  GroupConfidence high;
  GroupConfidence low;
  std::vector<TaskId> paired_tasks;
  std::vector<double> high_task_confidence;
  std::vector<double> low_task_confidence;
  std::optional<stats::TTestResult> test;
  std::optional<std::string> test_error;  // error kind when the test was not computable
};

ConfidenceStats confidence_stats(const Cohort& cohort, const GroupSplit& split);

bool has_confidence_data(const Cohort& cohort);

nlohmann::json to_json(const GroupSplit& split);
nlohmann::json to_json(const ConfidenceStats& stats);
nlohmann::json type_summaries_json(const TaskContrastReport& report);
/// `task_id,task_type,freq_high,freq_low,dfreq,meanrank_high,meanrank_low,drank`;
/// undefined values are written as empty fields.
void write_task_contrast_csv(const TaskContrastReport& report, const std::filesystem::path& path);

}  // namespace taskseq
