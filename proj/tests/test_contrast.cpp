#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "oracles.hpp"
#include "taskseq/contrast.hpp"
#include "taskseq/error.hpp"

using namespace taskseq;
using doctest::Approx;

namespace {

LearnerRecord graded(std::string id, std::vector<int> seq, double grade) {
  LearnerRecord r;
  r.id = std::move(id);
  r.sequence = std::move(seq);
  r.grade = grade;
  return r;
}

}  // namespace

TEST_CASE("split by grade") {
  auto course = testing::simple_course(3);
  std::vector<std::vector<int>> seqs(8, std::vector<int>{1});
  auto cohort = testing::cohort_of(course, seqs, {10, 20, 30, 40, 50, 60, 70, 80});
  auto s = split_by_grade(cohort, 0.25);
  CHECK(s.high == std::vector<std::string>{"L007", "L006"});
  CHECK(s.low == std::vector<std::string>{"L001", "L000"});
  CHECK(s.warnings.empty());

  auto half = split_by_grade(cohort, 0.5);
  CHECK(half.high.size() == 4);
  CHECK(half.low.size() == 4);
  CHECK(half.low.front() == "L003");

  auto flat = split_by_grade(testing::cohort_of(course, seqs, std::vector<double>(8, 50.0)), 0.25);
  CHECK(flat.high == std::vector<std::string>{"L000", "L001"});
  CHECK(flat.low == std::vector<std::string>{"L006", "L007"});
  CHECK(std::count(flat.warnings.begin(), flat.warnings.end(), "degenerate_split") == 1);
  CHECK(std::count(flat.warnings.begin(), flat.warnings.end(), "boundary_tie") == 1);

  auto ties = split_by_grade(testing::cohort_of(course, seqs, {10, 20, 30, 40, 50, 60, 70, 70}), 0.25);
  CHECK(ties.warnings == std::vector<std::string>{});
  auto cut = split_by_grade(testing::cohort_of(course, seqs, {10, 20, 30, 40, 50, 70, 70, 80}), 0.25);
  CHECK(cut.high == std::vector<std::string>{"L007", "L005"});
  CHECK(cut.warnings == std::vector<std::string>{"boundary_tie"});
}

TEST_CASE("split ignores ungraded learners and validates inputs") {
  auto course = testing::simple_course(2);
  std::vector<std::vector<int>> seqs(5, std::vector<int>{1});
  auto cohort = testing::cohort_of(course, seqs, {1, 2, 3, 4});  // L004 ungraded
  auto s = split_by_grade(cohort, 0.5);
  CHECK(s.high == std::vector<std::string>{"L003", "L002"});
  CHECK(s.low == std::vector<std::string>{"L001", "L000"});

  CHECK_THROWS_WITH_AS(split_by_grade(cohort, 0.0), doctest::Contains("InvalidQuantile"), Error);
  CHECK_THROWS_WITH_AS(split_by_grade(cohort, 0.6), doctest::Contains("InvalidQuantile"), Error);
  CHECK_THROWS_WITH_AS(split_by_grade(cohort, 0.2), doctest::Contains("TooFewGraded"), Error);
  CHECK_THROWS_WITH_AS(split_by_grade(testing::cohort_of(course, seqs, {1}), 0.5),
                       doctest::Contains("TooFewGraded"), Error);
}

TEST_CASE("property: split is grade monotone and disjoint") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    auto cohort = testing::random_cohort(rng);
    std::size_t graded_count = 0;
    for (const auto& l : cohort.learners()) graded_count += l.grade.has_value();
    const double q = std::uniform_real_distribution<double>(0.05, 0.5)(rng);
    if (graded_count < 2 || std::floor(q * static_cast<double>(graded_count)) == 0) continue;
    auto s = split_by_grade(cohort, q);
    const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(graded_count)));
    CHECK(s.high.size() == k);
    CHECK(s.low.size() == k);
    double min_high = 1e300, max_low = -1e300;
    for (const auto& id : s.high) min_high = std::min(min_high, *cohort.find(id)->grade);
    for (const auto& id : s.low) max_low = std::max(max_low, *cohort.find(id)->grade);
    CHECK(min_high >= max_low);
    for (const auto& id : s.high) CHECK(std::find(s.low.begin(), s.low.end(), id) == s.low.end());
  }
}

TEST_CASE("delta transition examples") {
  auto course = testing::simple_course(3);
  auto cohort = testing::cohort_of(course, {{1, 2, 3}, {3, 2, 1}}, {90, 10});
  auto split = split_by_grade(cohort, 0.5);
  auto d = delta_transition(cohort, split, Level::Task);
  const double expected[3][3] = {{0, 1, 0}, {-1, 0, 1}, {0, -1, 0}};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(d.delta(i, j) == expected[i][j]);
      CHECK(d.high_larger(i, j) == std::max(expected[i][j], 0.0));
      CHECK(d.low_larger(i, j) == std::max(-expected[i][j], 0.0));
    }

  auto same = testing::cohort_of(course, {{1, 3, 2}, {1, 3, 2}}, {90, 10});
  auto z = delta_transition(same, split_by_grade(same, 0.5), Level::Task);
  for (double v : z.delta.values()) CHECK(v == 0.0);

  auto flat = testing::cohort_of(course, {{1, 2, 3}, {3}}, {90, 10});
  try {
    delta_transition(flat, split_by_grade(flat, 0.5), Level::Task);
    FAIL("expected NoTransitions");
  } catch (const Error& e) {
    CHECK(e.kind() == "NoTransitions");
    CHECK(e.details().at("group") == "low");
  }
}

TEST_CASE("property: delta transition is exactly antisymmetric") {
  std::mt19937_64 rng(8);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    auto cohort = testing::random_cohort(rng);
    GroupSplit split;
    try {
      split = split_by_grade(cohort, 0.5);
    } catch (const Error&) {
      continue;
    }
    for (Level level : {Level::Task, Level::Session}) {
      try {
        auto a = delta_transition(cohort, split, level);
        auto b = delta_transition(cohort, swapped(split), level);
        for (std::size_t k = 0; k < a.delta.values().size(); ++k) {
          CHECK(a.delta.values()[k] == -b.delta.values()[k]);
          CHECK(a.high_larger.values()[k] == b.low_larger.values()[k]);
        }
        ++checked;
      } catch (const Error& e) {
        CHECK(e.kind() == "NoTransitions");
      }
    }
  }
  CHECK(checked > 50);
}

TEST_CASE("task contrast examples") {
  // task 7 at positions {3, 5} in the high group and {10} in the low group
  auto course = testing::simple_course(10);
  std::vector<LearnerRecord> learners{
      graded("h1", {1, 2, 7, 3, 4, 5, 6, 8, 9, 10}, 90),
      graded("h2", {1, 2, 3, 4, 7, 5, 6, 8, 9, 10}, 80),
      graded("l1", {1, 2, 3, 4, 5, 6, 8, 9, 10, 7}, 10),
      graded("l2", {1, 2}, 5),
  };
  Cohort cohort(course, learners);
  GroupSplit split;
  split.high = {"h1", "h2"};
  split.low = {"l1", "l2"};
  auto report = task_contrast(cohort, split);
  const auto& t7 = report.tasks[6];
  CHECK(t7.freq_high == 1.0);
  CHECK(t7.freq_low == 0.5);
  CHECK(*t7.meanrank_high == 4.0);
  CHECK(*t7.meanrank_low == 10.0);
  CHECK(*t7.drank == 6.0);

  GroupSplit only_full{{"h1", "h2"}, {"l1"}, 0.5, {}};
  auto full = task_contrast(cohort, only_full);
  CHECK(full.tasks[6].dfreq == 0.0);
  CHECK(*full.tasks[6].drank == 6.0);

  auto one_sided = testing::cohort_of(testing::simple_course(3), {{1, 2}, {1}}, {90, 10});
  auto r = task_contrast(one_sided, split_by_grade(one_sided, 0.5));
  CHECK(r.tasks[1].dfreq == 1.0);
  CHECK_FALSE(r.tasks[1].drank.has_value());
  CHECK_FALSE(r.tasks[2].meanrank_high.has_value());
  CHECK(r.tasks[2].dfreq == 0.0);
}

TEST_CASE("identical groups put every type median at the origin") {
  auto course = testing::simple_course(12);
  std::vector<int> seq(12);
  std::iota(seq.begin(), seq.end(), 1);
  auto cohort = testing::cohort_of(course, {seq, seq, seq, seq}, {1, 2, 3, 4});
  auto report = task_contrast(cohort, split_by_grade(cohort, 0.5));
  for (const auto& c : report.tasks) {
    CHECK(c.dfreq == 0.0);
    CHECK(*c.drank == 0.0);
  }
  REQUIRE(report.types.size() == 6);
  for (const auto& t : report.types) {
    CHECK(t.tasks == 2);
    CHECK(t.dfreq->median == 0.0);
    CHECK(t.drank->median == 0.0);
    CHECK(t.drank->q1 == 0.0);
    CHECK(t.drank->q3 == 0.0);
  }
}

TEST_CASE("property: task contrast matches a brute-force scan") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    auto cohort = testing::random_cohort(rng);
    GroupSplit split;
    try {
      split = split_by_grade(cohort, 0.25);
    } catch (const Error&) {
      continue;
    }
    auto report = task_contrast(cohort, split);
    for (const auto& c : report.tasks) {
      auto h = oracles::scan_task(cohort, split.high, c.task);
      auto l = oracles::scan_task(cohort, split.low, c.task);
      CHECK(c.freq_high == h.freq);
      CHECK(c.freq_low == l.freq);
      CHECK(c.meanrank_high == h.meanrank);
      CHECK(c.meanrank_low == l.meanrank);
      CHECK((c.dfreq >= -1.0 && c.dfreq <= 1.0));
      CHECK(c.drank.has_value() == (h.meanrank && l.meanrank));
    }
  }
}

TEST_CASE("property: quadrant semantics on constructed cohorts") {
  std::mt19937_64 rng(4);
  const int T = 10;
  auto course = testing::simple_course(T);
  for (int trial = 0; trial < 100; ++trial) {
    const int target = 1 + static_cast<int>(rng() % T);
    auto seqs = testing::random_sequences(rng, T, 12, 0);
    std::vector<double> grades;
    // first 6 learners are high; they complete target at position 1, the low
    // group later or never.
    for (int k = 0; k < 12; ++k) {
      auto& s = seqs[static_cast<std::size_t>(k)];
      s.erase(std::remove(s.begin(), s.end(), target), s.end());
      if (k < 6) {
        s.insert(s.begin(), target);
      } else if (rng() % 2 && !s.empty()) {
        s.insert(s.begin() + 1 + static_cast<long>(rng() % s.size()), target);
      }
      grades.push_back(k < 6 ? 100.0 - k : 20.0 - k);
    }
    if (std::none_of(seqs.begin() + 6, seqs.end(), [&](const auto& s) {
          return std::find(s.begin(), s.end(), target) != s.end();
        }))
      seqs[6] = {((target % T) + 1), target};
    auto cohort = testing::cohort_of(course, seqs, grades);
    auto c = task_contrast(cohort, split_by_grade(cohort, 0.5)).tasks[static_cast<std::size_t>(target - 1)];
    CHECK(c.dfreq >= 0.0);
    REQUIRE(c.drank.has_value());
    CHECK(*c.drank > 0.0);
  }
}

TEST_CASE("confidence scores") {
  LearnerRecord l;
  l.confidence = {{1, Confidence::Confident}, {2, Confidence::Confident}, {3, Confidence::Revisit}, {4, Confidence::Support}};
  CHECK(*confidence_score(l) == 0.5);
  CHECK(*confidence_score(l, std::set<TaskId>{1, 2}) == 1.0);
  CHECK(*confidence_score(l, std::set<TaskId>{3}) == 0.0);
  CHECK_FALSE(confidence_score(l, std::set<TaskId>{9}).has_value());
  CHECK_FALSE(confidence_score(LearnerRecord{}).has_value());
}

TEST_CASE("task confidence") {
  auto course = testing::simple_course(3);
  std::vector<LearnerRecord> learners;
  for (int k = 0; k < 81; ++k) {
    LearnerRecord r;
    r.id = "L" + std::to_string(100 + k);
    r.confidence[1] = k < 59 ? Confidence::Confident : Confidence::Support;
    r.confidence[2] = Confidence::Revisit;
    if (k < 4) r.confidence[3] = k < 2 ? Confidence::Confident : Confidence::Support;
    learners.push_back(r);
  }
  Cohort cohort(course, learners);
  CHECK(*task_confidence(cohort, 1) == Approx(59.0 / 81.0).epsilon(1e-15));
  CHECK(*task_confidence(cohort, 1) == Approx(0.728).epsilon(1e-3));
  CHECK(*task_confidence(cohort, 2) == 0.0);
  CHECK(*task_confidence(cohort, 3) == 0.5);
  CHECK_THROWS_WITH_AS(task_confidence(cohort, 4), doctest::Contains("TaskOutOfRange"), Error);
  CHECK_FALSE(task_confidence(testing::cohort_of(course, {{1}}), 1).has_value());
}

TEST_CASE("confidence stats pair group means by task") {
  auto course = testing::simple_course(4);
  std::vector<LearnerRecord> learners;
  auto add = [&](std::string id, double grade, std::map<TaskId, Confidence> c) {
    LearnerRecord r = graded(std::move(id), {1}, grade);
    r.confidence = std::move(c);
    learners.push_back(r);
  };
  const auto C = Confidence::Confident, R = Confidence::Revisit;
  add("a", 90, {{1, C}, {2, C}, {3, C}, {4, R}});
  add("b", 80, {{1, C}, {2, C}, {3, R}, {4, R}});
  add("c", 20, {{1, C}, {2, R}, {3, R}});
  add("d", 10, {{1, R}, {2, R}, {3, R}});
  Cohort cohort(course, learners);
  auto s = confidence_stats(cohort, split_by_grade(cohort, 0.5));
  CHECK(*s.per_learner.at("a") == 0.75);
  CHECK(*s.high.mean == 0.625);
  CHECK(*s.low.mean == Approx(1.0 / 6.0));
  CHECK(s.paired_tasks == std::vector<TaskId>{1, 2, 3});
  CHECK(s.high_task_confidence == std::vector<double>{1.0, 1.0, 0.5});
  CHECK(s.low_task_confidence == std::vector<double>{0.5, 0.0, 0.0});
  // differences (0.5, 1, 0.5): mean 2/3, sd sqrt(1/12), n = 3
  REQUIRE(s.test.has_value());
  CHECK(s.test->t == Approx((2.0 / 3.0) / (std::sqrt(1.0 / 12.0) / std::sqrt(3.0))));
  CHECK(s.test->df == 2.0);

  auto j = to_json(s);
  CHECK(j.at("paired_t_test").at("pairing") == "task");
}

TEST_CASE("confidence stats report a test that cannot be computed") {
  auto course = testing::simple_course(2);
  std::vector<LearnerRecord> learners{graded("a", {1}, 90), graded("b", {1}, 10)};
  learners[0].confidence[1] = Confidence::Confident;
  learners[1].confidence[1] = Confidence::Revisit;
  Cohort cohort(course, learners);
  auto s = confidence_stats(cohort, split_by_grade(cohort, 0.5));
  CHECK_FALSE(s.test.has_value());
  CHECK(*s.test_error == "TooFewPairs");
}

TEST_CASE("property: confidence score bounds and order invariance") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    LearnerRecord a, b;
    std::vector<std::pair<TaskId, Confidence>> responses;
    for (TaskId t = 1; t <= 20; ++t)
      if (rng() % 3) responses.emplace_back(t, static_cast<Confidence>(rng() % 3));
    for (const auto& [t, c] : responses) a.confidence[t] = c;
    std::shuffle(responses.begin(), responses.end(), rng);
    for (const auto& [t, c] : responses) b.confidence[t] = c;
    auto ca = confidence_score(a), cb = confidence_score(b);
    CHECK(ca == cb);
    if (ca) CHECK((*ca >= 0.0 && *ca <= 1.0));
  }
}

TEST_CASE("task contrast CSV") {
  testing::TempDir dir;
  auto cohort = testing::cohort_of(testing::simple_course(2), {{1, 2}, {1}}, {90, 10});
  auto report = task_contrast(cohort, split_by_grade(cohort, 0.5));
  write_task_contrast_csv(report, dir / "c.csv");
  CHECK(testing::slurp(dir / "c.csv") ==
        "task_id,task_type,freq_high,freq_low,dfreq,meanrank_high,meanrank_low,drank\n"
        "1,coursework,1,1,0,1,1,0\n2,reading_video,1,0,1,2,,\n");
}
