#include "taskseq/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <fstream>
#include <map>

#include "taskseq/csv.hpp"
#include "taskseq/error.hpp"

namespace taskseq {

namespace {

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

std::optional<int> fixed_int(std::string_view s, std::size_t pos, std::size_t len) {
  if (pos + len > s.size()) return std::nullopt;
  auto part = s.substr(pos, len);
  if (!all_digits(part)) return std::nullopt;
  int v = 0;
  for (char c : part) v = v * 10 + (c - '0');
  return v;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("WriteFailed", "cannot write " + path.string(), {{"path", path.string()}});
  return out;
}

TaskId parse_task_field(const csv::Row& row, std::size_t column) {
  auto value = csv::parse_int(row.fields[column]);
  if (!value)
    throw data_error("MalformedRow", "line " + std::to_string(row.line) + ": bad task_id '" +
                                         row.fields[column] + "'",
                     {{"line", row.line}});
  return static_cast<TaskId>(*value);
}

}  // namespace

std::optional<Timestamp> parse_iso8601(std::string_view s) {
  auto year = fixed_int(s, 0, 4);
  auto month = fixed_int(s, 5, 2);
  auto day = fixed_int(s, 8, 2);
  if (!year || !month || !day || s.size() < 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  using namespace std::chrono;
  year_month_day ymd{std::chrono::year{*year}, std::chrono::month{static_cast<unsigned>(*month)},
                     std::chrono::day{static_cast<unsigned>(*day)}};
  if (!ymd.ok()) return std::nullopt;
  std::int64_t seconds = sys_days{ymd}.time_since_epoch().count() * 86400LL;
  std::int64_t nanos = 0;
  std::size_t pos = 10;
  if (pos < s.size() && (s[pos] == 'T' || s[pos] == ' ')) {
    auto hh = fixed_int(s, pos + 1, 2);
    auto mm = fixed_int(s, pos + 4, 2);
    if (!hh || !mm || s[pos + 3] != ':' || *hh > 23 || *mm > 59) return std::nullopt;
    seconds += *hh * 3600LL + *mm * 60LL;
    pos += 6;
    if (pos < s.size() && s[pos] == ':') {
      auto ss = fixed_int(s, pos + 1, 2);
      if (!ss || *ss > 60) return std::nullopt;
      seconds += *ss;
      pos += 3;
      if (pos < s.size() && (s[pos] == '.' || s[pos] == ',')) {
        ++pos;
        std::size_t start = pos;
        std::int64_t scale = 100000000;
        while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
          nanos += (s[pos] - '0') * scale;
          scale /= 10;
          ++pos;
        }
        if (pos == start) return std::nullopt;
      }
    }
  }
  if (pos < s.size()) {
    if (s[pos] == 'Z' && pos + 1 == s.size()) {
      pos += 1;
    } else if (s[pos] == '+' || s[pos] == '-') {
      int sign = s[pos] == '+' ? 1 : -1;
      auto oh = fixed_int(s, pos + 1, 2);
      if (!oh) return std::nullopt;
      std::size_t mpos = pos + 3;
      if (mpos < s.size() && s[mpos] == ':') ++mpos;
      auto om = fixed_int(s, mpos, 2);
      if (!om || mpos + 2 != s.size()) return std::nullopt;
      seconds -= sign * (*oh * 3600LL + *om * 60LL);
      pos = s.size();
    } else {
      return std::nullopt;
    }
  }
  if (pos != s.size()) return std::nullopt;
  return Timestamp{seconds, static_cast<std::int32_t>(nanos)};
}

CourseSpec parse_course_spec(const std::filesystem::path& path) {
  auto rows = csv::read(path, {"task_id", "session_id", "task_type"});
  std::vector<TaskInfo> tasks;
  tasks.reserve(rows.size());
  for (const auto& row : rows) {
    auto id = csv::parse_int(row.fields[0]);
    auto session = csv::parse_int(row.fields[1]);
    auto type = task_type_from_token(row.fields[2]);
    if (!id || !session || !type)
      throw data_error("MalformedRow", path.string() + ":" + std::to_string(row.line),
                       {{"line", row.line}, {"path", path.string()}});
    tasks.push_back({static_cast<TaskId>(*id), static_cast<SessionId>(*session), *type});
  }
  // Check duplicates before sorting hides them as a contiguity failure.
  std::vector<TaskId> ids;
  for (const auto& t : tasks) ids.push_back(t.id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw data_error("NonContiguousTaskIds", "duplicate task id in " + path.string());
  // Session order is judged along nominal (task id) order, not file order.
  return CourseSpec(std::move(tasks));
}

Cohort parse_events(const std::filesystem::path& path, const CourseSpec& spec,
                    EventParseOptions options) {
  auto rows = csv::read(path, {"learner_id", "task_id", "timestamp"});

  struct Event {
    TaskId task;
    Timestamp time;
    std::size_t order;
  };
  std::map<std::string, std::vector<Event>> by_learner;
  std::optional<TimestampFormat> format;

  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields[0].empty())
      throw data_error("MalformedRow", "empty learner_id", {{"line", row.line}});
    TaskId task = parse_task_field(row, 1);
    if (!spec.contains(task))
      throw data_error("UnknownTaskId",
                       "line " + std::to_string(row.line) + ": unknown task " + std::to_string(task),
                       {{"line", row.line}, {"task_id", task}});

    const std::string& raw = row.fields[2];
    bool is_epoch = csv::parse_int(raw).has_value();
    TimestampFormat this_format = is_epoch ? TimestampFormat::EpochSeconds : TimestampFormat::Iso8601;
    if (format && *format != this_format)
      throw data_error("TimestampParseError",
                       "line " + std::to_string(row.line) + ": mixed epoch and ISO-8601 timestamps",
                       {{"line", row.line}});
    format = this_format;

    Timestamp time;
    if (is_epoch) {
      time.seconds = *csv::parse_int(raw);
    } else {
      auto parsed = parse_iso8601(raw);
      if (!parsed)
        throw data_error("TimestampParseError",
                         "line " + std::to_string(row.line) + ": cannot parse '" + raw + "'",
                         {{"line", row.line}});
      time = *parsed;
    }
    by_learner[row.fields[0]].push_back({task, time, r});
  }

  IngestDiagnostics diagnostics;
  std::vector<LearnerRecord> learners;
  for (auto& [id, events] : by_learner) {
    if (options.tie_break_by_task_id) {
      std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
        if (a.time != b.time) return a.time < b.time;
        if (a.task != b.task) return a.task < b.task;
        return a.order < b.order;
      });
    } else {
      std::stable_sort(events.begin(), events.end(),
                       [](const Event& a, const Event& b) { return a.time < b.time; });
    }

    LearnerRecord learner;
    learner.id = id;
    std::vector<bool> seen(static_cast<std::size_t>(spec.task_count()) + 1, false);
    std::optional<Timestamp> previous;
    for (const auto& e : events) {
      if (seen[static_cast<std::size_t>(e.task)]) {
        ++diagnostics.duplicate_completions;
        continue;
      }
      seen[static_cast<std::size_t>(e.task)] = true;
      if (previous && *previous == e.time) learner.had_ties = true;
      previous = e.time;
      learner.sequence.push_back(e.task);
    }
    if (learner.had_ties) ++diagnostics.learners_with_ties;
    learners.push_back(std::move(learner));
  }
  return Cohort(spec, std::move(learners), diagnostics);
}

Cohort attach_grades(const Cohort& cohort, const std::filesystem::path& path) {
  auto rows = csv::read(path, {"learner_id", "grade"});
  std::vector<LearnerRecord> learners = cohort.learners();
  for (const auto& row : rows) {
    const std::string& id = row.fields[0];
    auto it = std::find_if(learners.begin(), learners.end(),
                           [&](const LearnerRecord& r) { return r.id == id; });
    if (it == learners.end())
      throw data_error("UnknownLearner", "grades: unknown learner " + id,
                       {{"line", row.line}, {"learner_id", id}});
    auto grade = csv::parse_double(row.fields[1]);
    if (!grade)
      throw data_error("MalformedRow", "grades: bad grade on line " + std::to_string(row.line),
                       {{"line", row.line}});
    if (*grade < 0.0 || *grade > 100.0)
      throw data_error("GradeOutOfRange", "grade for " + id + " outside [0,100]",
                       {{"line", row.line}, {"learner_id", id}});
    it->grade = *grade;
  }
  return Cohort(cohort.course(), std::move(learners), cohort.diagnostics());
}

Cohort attach_confidence(const Cohort& cohort, const std::filesystem::path& path) {
  auto rows = csv::read(path, {"learner_id", "task_id", "response"});
  std::vector<LearnerRecord> learners = cohort.learners();
  IngestDiagnostics diagnostics = cohort.diagnostics();
  for (const auto& row : rows) {
    const std::string& id = row.fields[0];
    auto it = std::find_if(learners.begin(), learners.end(),
                           [&](const LearnerRecord& r) { return r.id == id; });
    if (it == learners.end())
      throw data_error("UnknownLearner", "confidence: unknown learner " + id,
                       {{"line", row.line}, {"learner_id", id}});
    TaskId task = parse_task_field(row, 1);
    if (!cohort.course().contains(task))
      throw data_error("UnknownTaskId", "confidence: unknown task " + std::to_string(task),
                       {{"line", row.line}, {"task_id", task}});
    auto response = confidence_from_token(row.fields[2]);
    if (!response)
      throw data_error("UnknownResponse", "confidence: unknown response '" + row.fields[2] + "'",
                       {{"line", row.line}, {"token", row.fields[2]}});
    auto [slot, inserted] = it->confidence.insert_or_assign(task, *response);
    if (!inserted) ++diagnostics.confidence_overwrites;
  }
  return Cohort(cohort.course(), std::move(learners), diagnostics);
}

void write_course_csv(const CourseSpec& spec, const std::filesystem::path& path) {
  auto out = open_output(path);
  out << "task_id,session_id,task_type\n";
  for (const auto& t : spec.tasks()) out << t.id << ',' << t.session << ',' << to_token(t.type) << '\n';
}

void write_events_csv(const Cohort& cohort, const std::filesystem::path& path) {
  auto out = open_output(path);
  out << "learner_id,task_id,timestamp\n";
  for (const auto& learner : cohort.learners())
    for (std::size_t k = 0; k < learner.sequence.size(); ++k)
      out << csv::escape(learner.id) << ',' << learner.sequence[k] << ',' << (k + 1) << '\n';
}

void write_grades_csv(const Cohort& cohort, const std::filesystem::path& path) {
  auto out = open_output(path);
  out << "learner_id,grade\n";
  for (const auto& learner : cohort.learners())
    if (learner.grade) out << csv::escape(learner.id) << ',' << csv::format_double(*learner.grade) << '\n';
}

void write_confidence_csv(const Cohort& cohort, const std::filesystem::path& path) {
  auto out = open_output(path);
  out << "learner_id,task_id,response\n";
  for (const auto& learner : cohort.learners())
    for (const auto& [task, response] : learner.confidence)
      out << csv::escape(learner.id) << ',' << task << ',' << to_token(response) << '\n';
}

nlohmann::json to_json(const CourseSpec& spec) {
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& t : spec.tasks())
    tasks.push_back({{"task_id", t.id}, {"session_id", t.session}, {"task_type", to_token(t.type)}});
  return {{"T", spec.task_count()}, {"S", spec.session_count()}, {"tasks", tasks}};
}

nlohmann::json to_json(const Cohort& cohort) {
  nlohmann::json learners = nlohmann::json::array();
  for (const auto& l : cohort.learners()) {
    nlohmann::json confidence = nlohmann::json::array();
    for (const auto& [task, response] : l.confidence)
      confidence.push_back({{"task_id", task}, {"response", to_token(response)}});
    learners.push_back({{"learner_id", l.id},
                        {"sequence", l.sequence},
                        {"grade", l.grade ? nlohmann::json(*l.grade) : nlohmann::json(nullptr)},
                        {"confidence", confidence},
                        {"had_ties", l.had_ties}});
  }
  const auto& d = cohort.diagnostics();
  return {{"schema", kCohortSchema},
          {"course", to_json(cohort.course())},
          {"N", cohort.size()},
          {"learners", learners},
          {"diagnostics",
           {{"duplicate_completions", d.duplicate_completions},
            {"learners_with_ties", d.learners_with_ties},
            {"confidence_overwrites", d.confidence_overwrites}}}};
}

CourseSpec course_from_json(const nlohmann::json& j) {
  try {
    std::vector<TaskInfo> tasks;
    for (const auto& t : j.at("tasks")) {
      auto type = task_type_from_token(t.at("task_type").get<std::string>());
      if (!type) throw data_error("MalformedRow", "unknown task_type in course JSON");
      tasks.push_back({t.at("task_id").get<TaskId>(), t.at("session_id").get<SessionId>(), *type});
    }
    return CourseSpec(std::move(tasks));
  } catch (const nlohmann::json::exception& e) {
    throw data_error("MalformedJson", e.what());
  }
}

Cohort cohort_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema").get<std::string>() != kCohortSchema)
      throw data_error("MalformedJson", "unsupported cohort schema");
    CourseSpec course = course_from_json(j.at("course"));
    std::vector<LearnerRecord> learners;
    for (const auto& l : j.at("learners")) {
      LearnerRecord r;
      r.id = l.at("learner_id").get<std::string>();
      r.sequence = l.at("sequence").get<std::vector<TaskId>>();
      if (!l.at("grade").is_null()) r.grade = l.at("grade").get<double>();
      for (const auto& c : l.at("confidence")) {
        auto response = confidence_from_token(c.at("response").get<std::string>());
        if (!response) throw data_error("UnknownResponse", "unknown response in cohort JSON");
        r.confidence[c.at("task_id").get<TaskId>()] = *response;
      }
      r.had_ties = l.value("had_ties", false);
      learners.push_back(std::move(r));
    }
    IngestDiagnostics d;
    if (j.contains("diagnostics")) {
      const auto& jd = j.at("diagnostics");
      d.duplicate_completions = jd.value("duplicate_completions", std::size_t{0});
      d.learners_with_ties = jd.value("learners_with_ties", std::size_t{0});
      d.confidence_overwrites = jd.value("confidence_overwrites", std::size_t{0});
    }
    return Cohort(std::move(course), std::move(learners), d);
  } catch (const nlohmann::json::exception& e) {
    throw data_error("MalformedJson", e.what());
  }
}

}  // namespace taskseq
