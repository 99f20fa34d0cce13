#include "taskseq/cohort.hpp"

#include <algorithm>
#include <set>

#include "taskseq/error.hpp"

namespace taskseq {

namespace {

constexpr std::pair<TaskType, std::string_view> kTypeTokens[] = {
    {TaskType::Coursework, "coursework"},
    {TaskType::ReadingVideo, "reading_video"},
    {TaskType::Quiz, "quiz"},
    {TaskType::GChart, "gchart"},
    {TaskType::MultiResponsePoll, "multi_response_poll"},
    {TaskType::DiscussionPost, "discussion_post"},
};

constexpr std::pair<Confidence, std::string_view> kConfidenceTokens[] = {
    {Confidence::Confident, "confident"},
    {Confidence::Revisit, "revisit"},
    {Confidence::Support, "support"},
};

}  // namespace

std::string_view to_token(TaskType type) {
  for (const auto& [t, token] : kTypeTokens)
    if (t == type) return token;
  return "unknown";
}

std::optional<TaskType> task_type_from_token(std::string_view token) {
  for (const auto& [t, name] : kTypeTokens)
    if (name == token) return t;
  return std::nullopt;
}

std::string_view to_token(Confidence response) {
  for (const auto& [c, token] : kConfidenceTokens)
    if (c == response) return token;
  return "unknown";
}

std::optional<Confidence> confidence_from_token(std::string_view token) {
  for (const auto& [c, name] : kConfidenceTokens)
    if (name == token) return c;
  return std::nullopt;
}

CourseSpec::CourseSpec(std::vector<TaskInfo> tasks) : tasks_(std::move(tasks)) {
  std::sort(tasks_.begin(), tasks_.end(),
            [](const TaskInfo& a, const TaskInfo& b) { return a.id < b.id; });
  for (std::size_t k = 0; k < tasks_.size(); ++k) {
    if (tasks_[k].id != static_cast<TaskId>(k + 1))
      throw data_error("NonContiguousTaskIds",
                       "task ids must be exactly 1..T; expected " + std::to_string(k + 1) +
                           ", found " + std::to_string(tasks_[k].id),
                       {{"expected", k + 1}, {"found", tasks_[k].id}});
    if (tasks_[k].session < 1)
      throw data_error("SessionOrderViolation", "session ids must be >= 1",
                       {{"task_id", tasks_[k].id}});
    if (k > 0 && tasks_[k].session < tasks_[k - 1].session)
      throw data_error("SessionOrderViolation",
                       "session ids must be non-decreasing along nominal order (task " +
                           std::to_string(tasks_[k].id) + ")",
                       {{"task_id", tasks_[k].id}});
  }
  std::set<SessionId> distinct;
  for (const auto& t : tasks_) distinct.insert(t.session);
  sessions_ = tasks_.empty() ? 0 : tasks_.back().session;
  // Session ids index the coarse-grained matrices, so gaps are rejected.
  if (static_cast<int>(distinct.size()) != sessions_)
    throw data_error("SessionOrderViolation", "session ids must be exactly 1..S without gaps");
}

Cohort::Cohort(CourseSpec course, std::vector<LearnerRecord> learners,
               IngestDiagnostics diagnostics)
    : course_(std::move(course)), learners_(std::move(learners)), diagnostics_(diagnostics) {
  std::sort(learners_.begin(), learners_.end(),
            [](const LearnerRecord& a, const LearnerRecord& b) { return a.id < b.id; });
  for (std::size_t k = 1; k < learners_.size(); ++k)
    if (learners_[k].id == learners_[k - 1].id)
      throw data_error("DuplicateLearner", "learner id appears twice: " + learners_[k].id,
                       {{"learner_id", learners_[k].id}});

  const int T = course_.task_count();
  for (const auto& learner : learners_) {
    if (static_cast<int>(learner.sequence.size()) > T)
      throw data_error("SequenceTooLong", "learner " + learner.id + " has more tasks than T",
                       {{"learner_id", learner.id}});
    std::vector<bool> seen(static_cast<std::size_t>(T) + 1, false);
    for (TaskId t : learner.sequence) {
      if (!course_.contains(t))
        throw data_error("UnknownTaskId", "learner " + learner.id + " references task " +
                                              std::to_string(t),
                         {{"learner_id", learner.id}, {"task_id", t}});
      if (seen[static_cast<std::size_t>(t)])
        throw data_error("DuplicateTask", "learner " + learner.id + " repeats task " +
                                              std::to_string(t),
                         {{"learner_id", learner.id}, {"task_id", t}});
      seen[static_cast<std::size_t>(t)] = true;
    }
    for (const auto& [t, response] : learner.confidence)
      if (!course_.contains(t))
        throw data_error("UnknownTaskId", "confidence for unknown task " + std::to_string(t),
                         {{"learner_id", learner.id}, {"task_id", t}});
    if (learner.grade && !(*learner.grade >= 0.0 && *learner.grade <= 100.0))
      throw data_error("GradeOutOfRange", "grade outside [0,100] for " + learner.id,
                       {{"learner_id", learner.id}});
  }
}

const LearnerRecord* Cohort::find(std::string_view learner_id) const {
  auto it = std::lower_bound(
      learners_.begin(), learners_.end(), learner_id,
      [](const LearnerRecord& r, std::string_view id) { return r.id < id; });
  if (it == learners_.end() || it->id != learner_id) return nullptr;
  return &*it;
}

Cohort Cohort::subset(const std::vector<std::string>& ids) const {
  std::set<std::string, std::less<>> wanted(ids.begin(), ids.end());
  std::vector<LearnerRecord> picked;
  for (const auto& learner : learners_)
    if (wanted.count(learner.id)) picked.push_back(learner);
  return Cohort(course_, std::move(picked));
}

}  // namespace taskseq
