#include "taskseq/commands.hpp"

#include <algorithm>
#include <fstream>

#include "taskseq/contrast.hpp"
#include "taskseq/csv.hpp"
#include "taskseq/error.hpp"
#include "taskseq/ingest.hpp"
#include "taskseq/report.hpp"
#include "taskseq/seqstats.hpp"
#include "taskseq/synth.hpp"

namespace fs = std::filesystem;

namespace taskseq {

void write_json(const nlohmann::json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("WriteFailed", "cannot write " + path.string(), {{"path", path.string()}});
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw data_error("MissingFile", "cannot open " + path.string(), {{"path", path.string()}});
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw data_error("MalformedJson", path.string() + ": " + e.what(), {{"path", path.string()}});
  }
}

RunConfig config_from_json(const nlohmann::json& j, RunConfig c) {
  try {
    auto path_field = [&](const char* key, std::optional<fs::path>& slot) {
      if (j.contains(key) && !j.at(key).is_null()) slot = fs::path(j.at(key).get<std::string>());
    };
    path_field("course", c.course);
    path_field("events", c.events);
    path_field("grades", c.grades);
    path_field("confidence", c.confidence);
    if (j.contains("out")) c.out = j.at("out").get<std::string>();
    if (j.contains("quantile") && !j.at("quantile").is_null()) c.quantile = j.at("quantile").get<double>();
    if (j.contains("seed") && !j.at("seed").is_null()) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("mcmc")) c.mcmc = mcmc_config_from_json(j.at("mcmc"), c.mcmc);
    if (j.contains("mode")) c.mode = experiment_mode_from_token(j.at("mode").get<std::string>());
    if (j.contains("holdout_frac")) c.holdout_frac = j.at("holdout_frac").get<double>();
    if (j.contains("chains")) c.chains = j.at("chains").get<int>();
    if (j.contains("scenario") && !j.at("scenario").is_null()) {
      if (j.at("scenario").is_string()) {
        c.scenario_path = fs::path(j.at("scenario").get<std::string>());
      } else {
        c.scenario_inline = j.at("scenario");
        c.scenario_path.reset();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw config_error("InvalidConfig", e.what());
  }
  return c;
}

nlohmann::json to_json(const RunConfig& c) {
  auto path = [](const std::optional<fs::path>& p) {
    return p ? nlohmann::json(p->generic_string()) : nlohmann::json(nullptr);
  };
  nlohmann::json j = {{"course", path(c.course)},
                      {"events", path(c.events)},
                      {"grades", path(c.grades)},
                      {"confidence", path(c.confidence)},
                      {"out", c.out.generic_string()},
                      {"quantile", c.quantile ? nlohmann::json(*c.quantile) : nlohmann::json(nullptr)},
                      {"seed", c.seed ? nlohmann::json(*c.seed) : nlohmann::json(nullptr)},
                      {"mcmc", to_json(c.mcmc)},
                      {"mode", to_token(c.mode)},
                      {"holdout_frac", c.holdout_frac},
                      {"chains", c.chains}};
  if (c.scenario_path)
    j["scenario"] = c.scenario_path->generic_string();
  else if (!c.scenario_inline.is_null())
    j["scenario"] = c.scenario_inline;
  else
    j["scenario"] = nullptr;
  return j;
}

Cohort load_cohort(const RunConfig& config) {
  if (!config.course) throw config_error("MissingInput", "--course is required");
  if (!config.events) throw config_error("MissingInput", "--events is required");
  CourseSpec course = parse_course_spec(*config.course);
  Cohort cohort = parse_events(*config.events, course);
  if (config.grades) cohort = attach_grades(cohort, *config.grades);
  if (config.confidence) cohort = attach_confidence(cohort, *config.confidence);
  return cohort;
}

namespace {

void prepare_output(const RunConfig& config) {
  std::error_code ec;
  fs::create_directories(config.out, ec);
  if (ec)
    throw data_error("WriteFailed", "cannot create output directory " + config.out.string(),
                     {{"path", config.out.string()}});
  write_json(to_json(config), config.out / "config.json");
}

double require_quantile(const RunConfig& config) {
  if (!config.quantile) throw config_error("MissingQuantile", "--quantile is required for this command");
  if (!(*config.quantile > 0.0 && *config.quantile <= 0.5))
    throw config_error("InvalidQuantile", "quantile must lie in (0, 0.5]", {{"quantile", *config.quantile}});
  return *config.quantile;
}

std::uint64_t require_seed(const RunConfig& config) {
  if (!config.seed) throw config_error("MissingSeed", "--seed is required for stochastic commands");
  return *config.seed;
}

void write_transition(const TransitionMatrix& m, const fs::path& dir, const std::string& stem) {
  write_matrix_csv(m.conditional, dir / (stem + ".csv"), "from\\to");
  write_matrix_csv(m.joint, dir / (stem + "_joint.csv"), "from\\to");
  write_count_csv(m.counts, dir / (stem + "_counts.csv"), "from\\to");
  write_edge_list_csv(m, dir / (stem + "_edges.csv"));
  write_json(to_json(m), dir / (stem + ".json"));
}

}  // namespace

nlohmann::json cmd_stats(const RunConfig& config) {
  Cohort cohort = load_cohort(config);
  prepare_output(config);
  const fs::path& out = config.out;
  const int T = cohort.course().task_count();

  PositionMatrix position = position_probability_matrix(cohort);
  write_matrix_csv(position.probabilities, out / "position_matrix.csv", "task\\position");
  write_count_csv(position.counts, out / "position_counts.csv", "task\\position");
  write_json(to_json(position), out / "position_matrix.json");
  {
    std::ofstream hist(out / "position_histograms.csv", std::ios::binary);
    hist << "task_id,position,probability\n";
    for (TaskId t = 1; t <= T; ++t) {
      auto row = position_histogram(position, t);
      for (std::size_t j = 0; j < row.size(); ++j)
        if (row[j] != 0.0) hist << t << ',' << (j + 1) << ',' << csv::format_double(row[j]) << '\n';
    }
  }

  TransitionMatrix transition = transition_probability_matrix(cohort);
  write_transition(transition, out, "transition_matrix");
  TransitionMatrix sessions = session_transition_matrix(cohort);
  write_transition(sessions, out, "session_transition_matrix");

  // Raster rows by descending grade; ungraded learners last, by id.
  std::vector<const LearnerRecord*> ordered;
  for (const auto& l : cohort.learners())
    if (!l.sequence.empty()) ordered.push_back(&l);
  std::stable_sort(ordered.begin(), ordered.end(), [](const LearnerRecord* a, const LearnerRecord* b) {
    if (a->grade.has_value() != b->grade.has_value()) return a->grade.has_value();
    if (a->grade && *a->grade != *b->grade) return *a->grade > *b->grade;
    return a->id < b->id;
  });
  std::vector<DeviationProfile> profiles;
  std::vector<report::RasterRow> raster;
  for (const auto* l : ordered) {
    profiles.push_back(deviation_profile(*l, cohort.course()));
    raster.push_back({l->id, l->grade.value_or(0.0), profiles.back().values});
  }
  write_deviation_csv(profiles, out / "deviation_profiles.csv");
  write_json(to_json(cohort), out / "cohort.json");

  report::heatmap_svg(position.probabilities,
                      {"Position probabilities P", "completion position", "task (nominal order)", report::ColorScale::Linear},
                      out / "position_heatmap.svg");
  report::heatmap_svg(transition.conditional,
                      {"Task transition probabilities (log scale)", "next task", "previous task", report::ColorScale::Log},
                      out / "transition_heatmap.svg");
  report::heatmap_svg(sessions.conditional,
                      {"Session transition probabilities", "next session", "previous session", report::ColorScale::Linear},
                      out / "session_heatmap.svg");
  report::deviation_raster_svg(raster, T, out / "deviation_raster.svg");

  std::size_t excluded = cohort.size() - ordered.size();
  return {{"command", "stats"},
          {"T", T},
          {"S", cohort.course().session_count()},
          {"N", cohort.size()},
          {"empty_sequences_excluded", excluded}};
}

nlohmann::json cmd_contrast(const RunConfig& config) {
  const double q = require_quantile(config);
  Cohort cohort = load_cohort(config);
  prepare_output(config);
  const fs::path& out = config.out;

  GroupSplit split = split_by_grade(cohort, q);
  write_json(to_json(split), out / "split.json");

  for (Level level : {Level::Task, Level::Session}) {
    const std::string stem = level == Level::Task ? "delta_task" : "delta_session";
    DeltaTransition d = delta_transition(cohort, split, level);
    write_matrix_csv(d.delta, out / (stem + ".csv"), "from\\to");
    write_matrix_csv(d.high_larger, out / (stem + "_high_larger.csv"), "from\\to");
    write_matrix_csv(d.low_larger, out / (stem + "_low_larger.csv"), "from\\to");
    report::heatmap_svg(d.delta,
                        {level == Level::Task ? "Task transition difference (high - low)"
                                              : "Session transition difference (high - low)",
                         "next", "previous", report::ColorScale::Diverging},
                        out / (stem + ".svg"));
  }

  TaskContrastReport contrast = task_contrast(cohort, split);
  write_task_contrast_csv(contrast, out / "task_contrast.csv");
  write_json(type_summaries_json(contrast), out / "type_summary.json");
  report::contrast_scatter_svg(contrast, out / "contrast_scatter.svg");

  nlohmann::json summary = {{"command", "contrast"},
                            {"quantile", q},
                            {"high", split.high.size()},
                            {"low", split.low.size()},
                            {"warnings", split.warnings}};
  if (has_confidence_data(cohort)) {
    write_json(to_json(confidence_stats(cohort, split)), out / "confidence.json");
    summary["confidence"] = "confidence.json";
  } else {
    summary["confidence"] = nullptr;
    summary["notice"] = "no confidence responses; confidence analysis omitted";
  }
  write_json(summary, out / "contrast_summary.json");
  return summary;
}

namespace {

std::vector<std::vector<TaskId>> group_sequences(const Cohort& cohort, const std::vector<std::string>& ids) {
  std::vector<std::vector<TaskId>> out;
  for (const auto& id : ids)
    if (const auto* l = cohort.find(id); l && !l->sequence.empty()) out.push_back(l->sequence);
  return out;
}

}  // namespace

nlohmann::json cmd_fit(const RunConfig& config) {
  const double q = require_quantile(config);
  const std::uint64_t seed = require_seed(config);
  Cohort cohort = load_cohort(config);
  prepare_output(config);

  GroupSplit split = split_by_grade(cohort, q);
  const int T = cohort.course().task_count();
  nlohmann::json summary = {{"command", "fit"}, {"quantile", q}, {"seed", seed}, {"split", to_json(split)}};
  const std::pair<const char*, const std::vector<std::string>*> groups[] = {{"g1", &split.high}, {"g2", &split.low}};
  std::uint64_t stream = 0;
  for (const auto& [label, ids] : groups) {
    auto sequences = group_sequences(cohort, *ids);
    if (sequences.size() < 2)
      throw data_error("GroupTooSmall", std::string("group ") + label + " has fewer than 2 learners with completions",
                       {{"group", label}, {"learners", sequences.size()}});
    McmcConfig mcmc = config.mcmc;
    mcmc.seed = derive_seed(seed, stream++);
    Posterior p = fit_mcmc_chains(sequences, T, mcmc, config.chains, label);
    write_json(to_json(p), config.out / (std::string("posterior_") + label + ".json"));
    summary[label] = {{"learners", sequences.size()},
                      {"samples", p.samples.size()},
                      {"acceptance_rate", p.diagnostics.acceptance_rate}};
  }
  write_json(summary, config.out / "fit_summary.json");
  return summary;
}

nlohmann::json cmd_classify(const RunConfig& config) {
  const double q = require_quantile(config);
  const std::uint64_t seed = require_seed(config);
  Cohort cohort = load_cohort(config);
  prepare_output(config);

  ExperimentConfig ec;
  ec.quantile = q;
  ec.mode = config.mode;
  ec.holdout_frac = config.holdout_frac;
  ec.seed = seed;
  ec.mcmc = config.mcmc;
  ec.chains = config.chains;
  ExperimentReport r = run_experiment(cohort, ec);

  const std::string stem = std::string("experiment_") + (config.mode == ExperimentMode::InSample ? "in_sample" : "holdout");
  write_json(to_json(r), config.out / (stem + ".json"));
  write_curves_csv(r.curves, config.out / (stem + "_curves.csv"));
  write_json(to_json(r.posterior_g1), config.out / (stem + "_posterior_g1.json"));
  write_json(to_json(r.posterior_g2), config.out / (stem + "_posterior_g2.json"));

  std::vector<ProbabilityCurve> c1, c2;
  for (const auto& c : r.curves) (c.true_group == "g1" ? c1 : c2).push_back(c);
  report::curves_svg(c1, r.aggregate_g1, "P(g1) for learners in g1 (" + std::string(to_token(config.mode)) + ")",
                     config.out / (stem + "_g1.svg"));
  report::curves_svg(c2, r.aggregate_g2, "P(g1) for learners in g2 (" + std::string(to_token(config.mode)) + ")",
                     config.out / (stem + "_g2.svg"));
  return {{"command", "classify"},
          {"mode", to_token(config.mode)},
          {"evaluated", r.curves.size()},
          {"report", stem + ".json"}};
}

nlohmann::json cmd_simulate(const RunConfig& config) {
  nlohmann::json scenario_json;
  if (config.scenario_path)
    scenario_json = read_json(*config.scenario_path);
  else if (!config.scenario_inline.is_null())
    scenario_json = config.scenario_inline;
  else
    throw config_error("MissingInput", "simulate needs a scenario (--scenario or config field)");
  scenario_json["seed"] = require_seed(config);
  Scenario scenario = scenario_from_json(scenario_json);
  SyntheticCohort synthetic = generate_cohort(scenario);
  prepare_output(config);

  const fs::path& out = config.out;
  write_course_csv(synthetic.cohort.course(), out / "course.csv");
  write_events_csv(synthetic.cohort, out / "events.csv");
  write_grades_csv(synthetic.cohort, out / "grades.csv");
  if (has_confidence_data(synthetic.cohort)) write_confidence_csv(synthetic.cohort, out / "confidence.csv");
  {
    std::ofstream labels(out / "labels.csv", std::ios::binary);
    labels << "learner_id,group\n";
    for (const auto& [id, label] : synthetic.labels) labels << csv::escape(id) << ',' << csv::escape(label) << '\n';
  }
  write_json(scenario_json, out / "scenario.json");
  return {{"command", "simulate"}, {"N", synthetic.cohort.size()}, {"T", scenario.tasks}};
}

}  // namespace taskseq
