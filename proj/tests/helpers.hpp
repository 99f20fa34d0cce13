#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "taskseq/cohort.hpp"

namespace testing {

class TempDir {
public:
  TempDir() {
    static int counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("taskseq_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  std::filesystem::path write(const std::string& name, const std::string& content) const {
    auto p = path_ / name;
    std::ofstream(p, std::ios::binary) << content;
    return p;
  }

private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// T tasks spread over `sessions` sessions of near-equal size, all quizzes.
inline taskseq::CourseSpec simple_course(int tasks, int sessions = 1) {
  std::vector<taskseq::TaskInfo> infos;
  for (int t = 1; t <= tasks; ++t)
    infos.push_back({t, static_cast<int>((static_cast<long long>(t) * sessions + tasks - 1) / tasks),
                     taskseq::kAllTaskTypes[static_cast<std::size_t>(t - 1) % 6]});
  return taskseq::CourseSpec(std::move(infos));
}

inline taskseq::Cohort cohort_of(const taskseq::CourseSpec& course,
                                 const std::vector<std::vector<int>>& sequences,
                                 const std::vector<double>& grades = {}) {
  std::vector<taskseq::LearnerRecord> learners;
  for (std::size_t k = 0; k < sequences.size(); ++k) {
    taskseq::LearnerRecord r;
    char id[16];
    std::snprintf(id, sizeof(id), "L%03zu", k);
    r.id = id;
    r.sequence = sequences[k];
    if (k < grades.size()) r.grade = grades[k];
    learners.push_back(std::move(r));
  }
  return taskseq::Cohort(course, std::move(learners));
}

/// Random duplicate-free sequences: a random subset of random length in
/// [0, T] in random order.
inline std::vector<std::vector<int>> random_sequences(std::mt19937_64& rng, int tasks, int learners,
                                                      int min_length = 0) {
  std::vector<std::vector<int>> out;
  std::vector<int> all(static_cast<std::size_t>(tasks));
  std::iota(all.begin(), all.end(), 1);
  std::uniform_int_distribution<int> len(min_length, tasks);
  for (int k = 0; k < learners; ++k) {
    std::shuffle(all.begin(), all.end(), rng);
    out.emplace_back(all.begin(), all.begin() + len(rng));
  }
  return out;
}

/// Random cohort with grades in [0, 100] and a random session layout.
inline taskseq::Cohort random_cohort(std::mt19937_64& rng, int max_tasks = 30, int max_learners = 100) {
  std::uniform_int_distribution<int> tdist(1, max_tasks);
  std::uniform_int_distribution<int> ndist(1, max_learners);
  const int T = tdist(rng);
  const int N = ndist(rng);
  std::uniform_int_distribution<int> sdist(1, T);
  auto course = simple_course(T, sdist(rng));
  auto seqs = random_sequences(rng, T, N);
  std::uniform_real_distribution<double> g(0.0, 100.0);
  std::vector<double> grades;
  for (int k = 0; k < N; ++k) grades.push_back(std::round(g(rng)));  // rounding forces some ties
  return cohort_of(course, seqs, grades);
}

}  // namespace testing
