#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "taskseq/cohort.hpp"
#include "taskseq/hypertraps.hpp"
#include "taskseq/seqstats.hpp"

namespace taskseq {

struct GroupScenario {
  std::string label;
  int learners = 0;
  ThetaMatrix theta;
  // Grades are drawn uniformly from [grade_min, grade_max].
  double grade_min = 0.0;
  double grade_max = 100.0;
  // Probability of answering "confident" for each completed task; the rest
  // split evenly between revisit and support. No responses when unset.
  std::optional<double> confidence_rate;
};

/// Sequence length = min(T, min_length + G) with G geometric in the number
/// of continued steps (per-step stop probability `stop_probability`); a
/// stop probability of 0 gives full-length sequences.
struct DropoutModel {
  double stop_probability = 0.0;
  int min_length = 1;
};

struct Scenario {
  int tasks = 0;
  int sessions = 1;  // tasks are spread evenly over sessions in nominal order
  std::vector<TaskType> task_types;  // cycled over tasks; all six types when empty
  // Ordered from highest to lowest grade band.
  std::vector<GroupScenario> groups;
  DropoutModel dropout;
  // When set, the first and last groups must be exactly the top and bottom
  // floor(q * N) learners under split_by_grade.
  std::optional<double> quantile;
  std::uint64_t seed = 1;

  /// Throws InvalidScenario.
  void validate() const;
  CourseSpec course() const;
};

struct SyntheticCohort {
  Cohort cohort;
  std::map<std::string, std::string> labels;  // learner id -> group label
};

/// Learner k (counted across groups) draws from its own stream
/// derive_seed(seed, k): length, then sequence, then grade, then confidence.
SyntheticCohort generate_cohort(const Scenario& scenario);

/// Builds theta from a JSON description:
///   {"kind": "zero"}
///   {"kind": "nominal_chain", "strength": s, "basal": b}
///       diagonal b, (i, i+1) = s, and task 1's basal raised by s
///   {"kind": "random", "sd": x, "seed": k}
///   {"kind": "matrix", "values": [[...], ...]}
ThetaMatrix theta_from_spec(const nlohmann::json& spec, int tasks);

ThetaMatrix nominal_chain_theta(int tasks, double strength, double basal = 0.0);

Scenario scenario_from_json(const nlohmann::json& j);

/// Exact probability of every ordered length-n prefix. Throws TooLarge for
/// T > 8.
std::map<std::vector<TaskId>, double> enumerate_orderings(const ThetaMatrix& theta, int length);

/// Position matrix implied by the model, by enumeration of all T! orderings.
/// Counts are left at zero. Throws TooLarge for T > 8.
PositionMatrix exact_position_matrix(const ThetaMatrix& theta);

inline constexpr int kMaxEnumerationTasks = 8;

}  // namespace taskseq
