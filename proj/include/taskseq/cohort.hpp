#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace taskseq {

// Task and session IDs are 1-based throughout the public API.
using TaskId = int;
using SessionId = int;

enum class TaskType { Coursework, ReadingVideo, Quiz, GChart, MultiResponsePoll, DiscussionPost };

inline constexpr TaskType kAllTaskTypes[] = {
    TaskType::Coursework, TaskType::ReadingVideo,      TaskType::Quiz,
    TaskType::GChart,     TaskType::MultiResponsePoll, TaskType::DiscussionPost};

std::string_view to_token(TaskType type);
std::optional<TaskType> task_type_from_token(std::string_view token);

enum class Confidence { Confident, Revisit, Support };

std::string_view to_token(Confidence response);
std::optional<Confidence> confidence_from_token(std::string_view token);

struct TaskInfo {
  TaskId id = 0;
  SessionId session = 0;
  TaskType type = TaskType::Coursework;

  bool operator==(const TaskInfo&) const = default;
};

/// Course layout: tasks 1..T in nominal order, each mapped to a session and
/// a task type.
class CourseSpec {
public:
  CourseSpec() = default;
  /// Validates contiguity of IDs and non-decreasing sessions; throws
  /// NonContiguousTaskIds / SessionOrderViolation.
  explicit CourseSpec(std::vector<TaskInfo> tasks);

  int task_count() const { return static_cast<int>(tasks_.size()); }
  int session_count() const { return sessions_; }

  const TaskInfo& task(TaskId id) const { return tasks_.at(static_cast<std::size_t>(id - 1)); }
  SessionId session_of(TaskId id) const { return task(id).session; }
  TaskType type_of(TaskId id) const { return task(id).type; }
  bool contains(TaskId id) const { return id >= 1 && id <= task_count(); }

  const std::vector<TaskInfo>& tasks() const { return tasks_; }

  bool operator==(const CourseSpec&) const = default;

private:
  std::vector<TaskInfo> tasks_;
  int sessions_ = 0;
};

struct LearnerRecord {
  std::string id;
  std::vector<TaskId> sequence;
  std::optional<double> grade;
  std::map<TaskId, Confidence> confidence;
  // Set when two kept completions shared a timestamp.
  bool had_ties = false;

  bool operator==(const LearnerRecord&) const = default;
};

struct IngestDiagnostics {
  std::size_t duplicate_completions = 0;
  std::size_t learners_with_ties = 0;
  std::size_t confidence_overwrites = 0;

  bool operator==(const IngestDiagnostics&) const = default;
};

/// Ensemble of learner sequences over one course. Learners are kept sorted
/// by id.
class Cohort {
public:
  Cohort() = default;
  /// Validates every learner against the course; throws on duplicate learner
  /// ids, unknown or repeated tasks, or grades outside [0,100].
  Cohort(CourseSpec course, std::vector<LearnerRecord> learners,
         IngestDiagnostics diagnostics = {});

  const CourseSpec& course() const { return course_; }
  const std::vector<LearnerRecord>& learners() const { return learners_; }
  std::size_t size() const { return learners_.size(); }
  const IngestDiagnostics& diagnostics() const { return diagnostics_; }

  const LearnerRecord* find(std::string_view learner_id) const;

  /// Learners whose id appears in `ids`, in cohort order.
  Cohort subset(const std::vector<std::string>& ids) const;

  bool operator==(const Cohort&) const = default;

private:
  CourseSpec course_;
  std::vector<LearnerRecord> learners_;
  IngestDiagnostics diagnostics_;
};

}  // namespace taskseq
