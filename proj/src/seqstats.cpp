#include "taskseq/seqstats.hpp"

#include <algorithm>
#include <fstream>

#include "taskseq/csv.hpp"
#include "taskseq/error.hpp"

namespace taskseq {

namespace {

void normalize_rows(const CountMatrix& counts, RealMatrix& out) {
  out = RealMatrix(counts.rows(), counts.cols(), 0.0);
  for (std::size_t i = 0; i < counts.rows(); ++i) {
    std::int64_t total = 0;
    for (auto c : counts.row(i)) total += c;
    if (total == 0) continue;
    for (std::size_t j = 0; j < counts.cols(); ++j)
      out(i, j) = static_cast<double>(counts(i, j)) / static_cast<double>(total);
  }
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("WriteFailed", "cannot write " + path.string(), {{"path", path.string()}});
  return out;
}

template <typename T, typename Fmt>
void write_dense(const Matrix<T>& m, const std::filesystem::path& path, const std::string& corner,
                 Fmt fmt) {
  auto out = open_output(path);
  out << corner;
  for (std::size_t j = 0; j < m.cols(); ++j) out << ',' << (j + 1);
  out << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    out << (i + 1);
    for (std::size_t j = 0; j < m.cols(); ++j) out << ',' << fmt(m(i, j));
    out << '\n';
  }
}

}  // namespace

PositionMatrix position_probability_matrix(const Cohort& cohort) {
  const auto T = static_cast<std::size_t>(cohort.course().task_count());
  PositionMatrix result{CountMatrix(T, T, 0), {}};
  bool any = false;
  for (const auto& learner : cohort.learners()) {
    for (std::size_t j = 0; j < learner.sequence.size(); ++j) {
      result.counts(static_cast<std::size_t>(learner.sequence[j] - 1), j) += 1;
      any = true;
    }
  }
  if (!any) throw data_error("EmptyCohort", "no learner has a non-empty sequence");
  normalize_rows(result.counts, result.probabilities);
  return result;
}

TransitionMatrix transition_matrix_from_sequences(const std::vector<std::vector<int>>& sequences,
                                                  int size) {
  const auto n = static_cast<std::size_t>(size);
  TransitionMatrix result{CountMatrix(n, n, 0), {}, {}};
  std::int64_t total = 0;
  for (const auto& seq : sequences) {
    for (std::size_t k = 1; k < seq.size(); ++k) {
      result.counts(static_cast<std::size_t>(seq[k - 1] - 1), static_cast<std::size_t>(seq[k] - 1)) += 1;
      ++total;
    }
  }
  if (total == 0) throw data_error("NoTransitions", "no sequence has two or more entries");
  result.joint = RealMatrix(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      result.joint(i, j) = static_cast<double>(result.counts(i, j)) / static_cast<double>(total);
  normalize_rows(result.counts, result.conditional);
  return result;
}

TransitionMatrix transition_probability_matrix(const Cohort& cohort) {
  std::vector<std::vector<int>> sequences;
  for (const auto& learner : cohort.learners()) sequences.push_back(learner.sequence);
  return transition_matrix_from_sequences(sequences, cohort.course().task_count());
}

TransitionMatrix session_transition_matrix(const Cohort& cohort) {
  const auto& course = cohort.course();
  std::vector<std::vector<int>> sequences;
  for (const auto& learner : cohort.learners()) {
    std::vector<int> sessions;
    sessions.reserve(learner.sequence.size());
    for (TaskId t : learner.sequence) sessions.push_back(course.session_of(t));
    sequences.push_back(std::move(sessions));
  }
  return transition_matrix_from_sequences(sequences, course.session_count());
}

DeviationProfile deviation_profile(const LearnerRecord& learner, const CourseSpec& spec) {
  if (learner.sequence.empty())
    throw data_error("EmptySequence", "learner " + learner.id + " has no completed tasks",
                     {{"learner_id", learner.id}});
  const auto n = learner.sequence.size();
  std::vector<TaskId> sorted = learner.sequence;
  std::sort(sorted.begin(), sorted.end());

  DeviationProfile profile;
  profile.learner_id = learner.id;
  profile.tasks = learner.sequence;
  profile.values.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    auto rank = static_cast<std::size_t>(
        std::lower_bound(sorted.begin(), sorted.end(), learner.sequence[j]) - sorted.begin());
    profile.values.push_back((static_cast<double>(j) - static_cast<double>(rank)) /
                             static_cast<double>(n));
  }
  profile.completion_fraction = static_cast<double>(n) / static_cast<double>(spec.task_count());
  return profile;
}

std::vector<double> position_histogram(const PositionMatrix& matrix, TaskId task) {
  if (task < 1 || static_cast<std::size_t>(task) > matrix.probabilities.rows())
    throw data_error("TaskOutOfRange", "task " + std::to_string(task) + " out of range",
                     {{"task_id", task}});
  auto row = matrix.probabilities.row(static_cast<std::size_t>(task - 1));
  return {row.begin(), row.end()};
}

void write_matrix_csv(const RealMatrix& m, const std::filesystem::path& path,
                      const std::string& corner) {
  write_dense(m, path, corner, [](double v) { return csv::format_double(v); });
}

void write_count_csv(const CountMatrix& m, const std::filesystem::path& path,
                     const std::string& corner) {
  write_dense(m, path, corner, [](std::int64_t v) { return std::to_string(v); });
}

nlohmann::json to_json(const RealMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"values", rows}};
}

namespace {

nlohmann::json counts_json(const CountMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    rows.push_back(std::vector<std::int64_t>(r.begin(), r.end()));
  }
  return rows;
}

}  // namespace

nlohmann::json to_json(const PositionMatrix& m) {
  return {{"counts", counts_json(m.counts)}, {"probabilities", to_json(m.probabilities)}};
}

nlohmann::json to_json(const TransitionMatrix& m) {
  return {{"counts", counts_json(m.counts)},
          {"joint", to_json(m.joint)},
          {"conditional", to_json(m.conditional)}};
}

void write_edge_list_csv(const TransitionMatrix& m, const std::filesystem::path& path) {
  auto out = open_output(path);
  out << "from,to,count,joint,conditional\n";
  for (std::size_t i = 0; i < m.counts.rows(); ++i)
    for (std::size_t j = 0; j < m.counts.cols(); ++j)
      if (m.counts(i, j) > 0)
        out << (i + 1) << ',' << (j + 1) << ',' << m.counts(i, j) << ','
            << csv::format_double(m.joint(i, j)) << ',' << csv::format_double(m.conditional(i, j))
            << '\n';
}

void write_deviation_csv(const std::vector<DeviationProfile>& profiles,
                         const std::filesystem::path& path) {
  auto out = open_output(path);
  out << "learner_id,task_id,position,deviation\n";
  for (const auto& p : profiles)
    for (std::size_t j = 0; j < p.tasks.size(); ++j)
      out << csv::escape(p.learner_id) << ',' << p.tasks[j] << ',' << (j + 1) << ','
          << csv::format_double(p.values[j]) << '\n';
}

}  // namespace taskseq
