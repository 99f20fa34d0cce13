#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "taskseq/cohort.hpp"

namespace taskseq {

struct Timestamp {
  std::int64_t seconds = 0;  // since 1970-01-01T00:00:00Z
  std::int32_t nanos = 0;
  auto operator<=>(const Timestamp&) const = default;
};

enum class TimestampFormat { EpochSeconds, Iso8601 };

/// Parses `YYYY-MM-DD[(T| )HH:MM[:SS[.frac]]][Z|(+|-)HH[:]MM]`.
std::optional<Timestamp> parse_iso8601(std::string_view text);

struct EventParseOptions {
  // Break timestamp ties by ascending task id. When off, tied events keep
  // file order, which makes the result depend on row order.
  bool tie_break_by_task_id = true;
};

CourseSpec parse_course_spec(const std::filesystem::path& path);

/// Builds one duplicate-free sequence per learner from timestamped events;
/// only the earliest completion of each task is kept. Learners are sorted by
/// id.
Cohort parse_events(const std::filesystem::path& path, const CourseSpec& spec,
                    EventParseOptions options = {});

Cohort attach_grades(const Cohort& cohort, const std::filesystem::path& path);

/// Later rows for the same (learner, task) overwrite earlier ones; the number
/// of overwrites lands in diagnostics().confidence_overwrites.
Cohort attach_confidence(const Cohort& cohort, const std::filesystem::path& path);

// Writers in the same formats the parsers accept. Events are written with
// integer timestamps equal to the 1-based sequence position.
void write_course_csv(const CourseSpec& spec, const std::filesystem::path& path);
void write_events_csv(const Cohort& cohort, const std::filesystem::path& path);
void write_grades_csv(const Cohort& cohort, const std::filesystem::path& path);
void write_confidence_csv(const Cohort& cohort, const std::filesystem::path& path);

nlohmann::json to_json(const CourseSpec& spec);
nlohmann::json to_json(const Cohort& cohort);
CourseSpec course_from_json(const nlohmann::json& j);
Cohort cohort_from_json(const nlohmann::json& j);

inline constexpr std::string_view kCohortSchema = "taskseq.cohort/1";

}  // namespace taskseq
