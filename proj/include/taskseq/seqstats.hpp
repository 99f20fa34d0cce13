#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "taskseq/cohort.hpp"
#include "taskseq/matrix.hpp"

namespace taskseq {

/// counts(i, j) = learners whose (j+1)-th completed task is i+1;
/// probabilities are row-normalized counts. Rows of never-completed tasks
/// stay zero: a zero row means "no evidence", not "uniform".
struct PositionMatrix {
  CountMatrix counts;
  RealMatrix probabilities;
};

/// Adjacent-pair statistics. `joint` is counts / total pairs and
/// `conditional` is `joint` row-normalized. Because tasks are acquired
/// irreversibly, `conditional` is not the transition kernel of a Markov
/// chain over acquisition states; it is the empirical next-task frequency.
struct TransitionMatrix {
  CountMatrix counts;
  RealMatrix joint;
  RealMatrix conditional;
};

struct DeviationProfile {
  std::string learner_id;
  std::vector<TaskId> tasks;     // the learner's sequence
  std::vector<double> values;    // deviation per entry of `tasks`, in [-1, 1]
  double completion_fraction = 0.0;
};

/// Throws EmptyCohort when every sequence is empty.
PositionMatrix position_probability_matrix(const Cohort& cohort);

/// Throws NoTransitions when no learner has two or more completions.
TransitionMatrix transition_probability_matrix(const Cohort& cohort);

/// Same statistics after replacing each task by its session. Consecutive
/// same-session steps are kept, so the diagonal counts within-session moves.
TransitionMatrix session_transition_matrix(const Cohort& cohort);

/// Transition statistics for arbitrary label sequences over 1..size.
TransitionMatrix transition_matrix_from_sequences(const std::vector<std::vector<int>>& sequences,
                                                  int size);

/// deviation(t) = (position of t - rank of t among the learner's own tasks
/// sorted by id) / n. Negative values mean "earlier than the learner's own
/// nominal-relative order". A learner who skips tasks but keeps nominal
/// order gets all zeros.
DeviationProfile deviation_profile(const LearnerRecord& learner, const CourseSpec& spec);

/// Row `task` of P. Throws TaskOutOfRange.
std::vector<double> position_histogram(const PositionMatrix& matrix, TaskId task);

// Exports. Dense CSVs carry a header row of column ids and a leading column of
// row ids, both 1-based.
void write_matrix_csv(const RealMatrix& m, const std::filesystem::path& path,
                      const std::string& corner = "id");
void write_count_csv(const CountMatrix& m, const std::filesystem::path& path,
                     const std::string& corner = "id");
nlohmann::json to_json(const RealMatrix& m);
nlohmann::json to_json(const PositionMatrix& m);
nlohmann::json to_json(const TransitionMatrix& m);
/// `from,to,count,joint,conditional` for every nonzero count.
void write_edge_list_csv(const TransitionMatrix& m, const std::filesystem::path& path);
/// Long format `learner_id,task_id,position,deviation`.
void write_deviation_csv(const std::vector<DeviationProfile>& profiles,
                         const std::filesystem::path& path);

}  // namespace taskseq
