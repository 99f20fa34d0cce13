#include <doctest.h>

#include <boost/math/special_functions/gamma.hpp>
#include <map>
#include <random>

#include "helpers.hpp"
#include "oracles.hpp"
#include "taskseq/error.hpp"
#include "taskseq/hypertraps.hpp"

using namespace taskseq;
using doctest::Approx;

namespace {

ThetaMatrix random_theta(std::mt19937_64& rng, int T, double sd = 1.5) {
  std::normal_distribution<double> z(0.0, sd);
  ThetaMatrix theta(T);
  for (double& v : theta.values().values()) v = z(rng);
  return theta;
}

std::vector<double> flat(const ThetaMatrix& theta) {
  return {theta.values().values().begin(), theta.values().values().end()};
}

McmcConfig short_config(std::uint64_t seed = 3) {
  McmcConfig c;
  c.chain_length = 6000;
  c.burn_in = 1000;
  c.thinning = 50;
  c.proposal_sd = 0.3;
  c.seed = seed;
  return c;
}

double chi_square_p(double stat, double dof) { return boost::math::gamma_q(dof / 2.0, stat / 2.0); }

}  // namespace

TEST_CASE("step probability examples") {
  ThetaMatrix zero(4);
  for (TaskId t = 1; t <= 4; ++t) CHECK(step_probability(zero, TaskState(4), t) == Approx(0.25).epsilon(1e-15));
  std::vector<TaskId> done{1, 2};
  TaskState half(4, done);
  CHECK(step_probability(zero, half, 3) == Approx(0.5).epsilon(1e-15));
  CHECK(step_probability(zero, half, 4) == Approx(0.5).epsilon(1e-15));

  ThetaMatrix two(2);
  two.at(1, 1) = std::log(3.0);
  CHECK(step_probability(two, TaskState(2), 1) == Approx(0.75).epsilon(1e-15));

  CHECK_THROWS_WITH_AS(step_probability(zero, half, 1), doctest::Contains("AlreadyAcquired"), Error);
  std::vector<TaskId> all{1, 2};
  CHECK_THROWS_WITH_AS(step_probability(two, TaskState(2, all), 1), doctest::Contains("FullState"), Error);
  CHECK_THROWS_WITH_AS(step_probability(zero, half, 5), doctest::Contains("TaskOutOfRange"), Error);
}

TEST_CASE("off-diagonal entries act from completed to affected task") {
  ThetaMatrix theta(3);
  theta.at(1, 3) = std::log(4.0);  // completing 1 boosts 3
  std::vector<TaskId> one{1};
  CHECK(step_probability(theta, TaskState(3, one), 3) == Approx(0.8).epsilon(1e-15));
  CHECK(step_probability(theta, TaskState(3), 3) == Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("sequence log-likelihood examples") {
  std::vector<TaskId> full{2, 3, 1}, prefix{4, 2}, twelve{1, 2};
  CHECK(sequence_loglik(ThetaMatrix(3), full) == Approx(std::log(1.0 / 6.0)).epsilon(1e-14));
  CHECK(sequence_loglik(ThetaMatrix(4), prefix) == Approx(std::log(1.0 / 12.0)).epsilon(1e-14));
  ThetaMatrix theta(3);
  theta.at(1, 1) = std::log(2.0);
  CHECK(sequence_loglik(theta, twelve) == Approx(std::log(0.25)).epsilon(1e-14));
  CHECK(sequence_loglik(theta, std::vector<TaskId>{}) == 0.0);

  auto logs = prefix_logliks(theta, twelve);
  REQUIRE(logs.size() == 2);
  CHECK(logs[0] == Approx(std::log(0.5)).epsilon(1e-14));
  CHECK(logs[1] == Approx(std::log(0.25)).epsilon(1e-14));

  std::vector<TaskId> dup{1, 1}, out{1, 4};
  CHECK_THROWS_WITH_AS(sequence_loglik(theta, dup), doctest::Contains("DuplicateTask"), Error);
  CHECK_THROWS_WITH_AS(sequence_loglik(theta, out), doctest::Contains("TaskOutOfRange"), Error);
}

TEST_CASE("long sequences stay finite in log space") {
  std::mt19937_64 rng(1);
  const int T = 123;
  auto theta = random_theta(rng, T, 0.5);
  std::vector<TaskId> seq(T);
  std::iota(seq.begin(), seq.end(), 1);
  const double ll = sequence_loglik(theta, seq);
  CHECK(std::isfinite(ll));
  CHECK(ll < -300.0);
}

TEST_CASE("invalid theta") {
  RealMatrix rect(2, 3, 0.0);
  CHECK_THROWS_WITH_AS(ThetaMatrix{rect}, doctest::Contains("InvalidTheta"), Error);
  RealMatrix nan(2, 2, 0.0);
  nan(0, 1) = std::nan("");
  CHECK_THROWS_WITH_AS(ThetaMatrix{nan}, doctest::Contains("InvalidTheta"), Error);
}

TEST_CASE("property: normalization, shift invariance and agreement with plain arithmetic") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int T = 2 + static_cast<int>(rng() % 9);
    auto theta = random_theta(rng, T);
    auto seq = testing::random_sequences(rng, T, 1, 1)[0];
    std::vector<TaskId> acquired(seq.begin(), seq.end() - 1);
    TaskState state(T, acquired);
    double total = 0;
    for (TaskId u = 1; u <= T; ++u)
      if (!state.contains(u)) total += step_probability(theta, state, u);
    CHECK(std::fabs(total - 1.0) <= 1e-12);

    ThetaMatrix shifted = theta;
    const double c = std::normal_distribution<double>(0.0, 10.0)(rng);
    for (TaskId i = 1; i <= T; ++i) shifted.at(i, i) += c;
    for (TaskId u = 1; u <= T; ++u)
      if (!state.contains(u))
        CHECK(step_probability(shifted, state, u) == Approx(step_probability(theta, state, u)).epsilon(1e-12));

    CHECK(sequence_loglik(theta, seq) ==
          Approx(std::log(oracles::ordering_probability(flat(theta), T, seq))).epsilon(1e-11));
  }
}

TEST_CASE("property: full orderings sum to one") {
  std::mt19937_64 rng(21);
  for (int T = 1; T <= 6; ++T) {
    for (int trial = 0; trial < 10; ++trial) {
      auto theta = random_theta(rng, T);
      std::vector<TaskId> order(static_cast<std::size_t>(T));
      std::iota(order.begin(), order.end(), 1);
      double total = 0;
      do total += std::exp(sequence_loglik(theta, order));
      while (std::next_permutation(order.begin(), order.end()));
      CHECK(std::fabs(total - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("sample sequence examples") {
  ThetaMatrix zero(3);
  Rng rng(42);
  std::map<std::vector<TaskId>, int> counts;
  const int draws = 100000;
  for (int k = 0; k < draws; ++k) counts[sample_sequence(zero, 3, rng)]++;
  REQUIRE(counts.size() == 6);
  double stat = 0;
  const double sigma = std::sqrt(draws * (1.0 / 6.0) * (5.0 / 6.0));
  for (const auto& [order, n] : counts) {
    CHECK(std::fabs(n - draws / 6.0) <= 3 * sigma);
    stat += (n - draws / 6.0) * (n - draws / 6.0) / (draws / 6.0);
  }
  CHECK(chi_square_p(stat, 5) > 0.001);

  ThetaMatrix peaked(3);
  peaked.at(2, 2) = 10.0;
  int first_two = 0;
  for (int k = 0; k < 10000; ++k) first_two += sample_sequence(peaked, 1, rng)[0] == 2;
  CHECK(std::exp(10.0) / (std::exp(10.0) + 2.0) == Approx(0.9999092083843409).epsilon(1e-15));
  CHECK(first_two > 9900);

  std::mt19937_64 g(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int T = 1 + static_cast<int>(g() % 12);
    auto s = sample_sequence(random_theta(g, T), T, g());
    std::sort(s.begin(), s.end());
    std::vector<TaskId> ids(static_cast<std::size_t>(T));
    std::iota(ids.begin(), ids.end(), 1);
    CHECK(s == ids);
  }
  CHECK(sample_sequence(zero, 2, 9) == sample_sequence(zero, 2, 9));
  CHECK_THROWS_WITH_AS(sample_sequence(zero, 0, 1), doctest::Contains("LengthOutOfRange"), Error);
  CHECK_THROWS_WITH_AS(sample_sequence(zero, 4, 1), doctest::Contains("LengthOutOfRange"), Error);
}

TEST_CASE("sampling agrees with the likelihood for a non-uniform model") {
  std::mt19937_64 g(8);
  auto theta = random_theta(g, 3, 1.0);
  Rng rng(77);
  std::map<std::vector<TaskId>, int> counts;
  const int draws = 100000;
  for (int k = 0; k < draws; ++k) counts[sample_sequence(theta, 3, rng)]++;
  std::vector<TaskId> order{1, 2, 3};
  double stat = 0;
  do {
    const double expected = draws * std::exp(sequence_loglik(theta, order));
    const double n = counts[order];
    stat += (n - expected) * (n - expected) / expected;
  } while (std::next_permutation(order.begin(), order.end()));
  CHECK(chi_square_p(stat, 5) > 0.001);
}

TEST_CASE("marginal likelihood examples") {
  auto single = [](double p) {
    ThetaMatrix t(2);
    t.at(1, 1) = std::log(p / (1.0 - p));
    return t;
  };
  std::vector<TaskId> prefix{1};
  Posterior post;
  post.tasks = 2;
  post.samples = {single(0.2), single(0.4)};
  CHECK(marginal_loglik(prefix, post) == Approx(std::log(0.3)).epsilon(1e-14));

  Posterior same;
  same.tasks = 2;
  same.samples = {single(0.2), single(0.2)};
  CHECK(marginal_loglik(prefix, same) == Approx(std::log(0.2)).epsilon(1e-14));

  std::mt19937_64 g(3);
  Posterior one;
  one.tasks = 5;
  one.samples = {random_theta(g, 5)};
  std::vector<TaskId> seq{3, 1, 5};
  CHECK(marginal_loglik(seq, one) == sequence_loglik(one.samples[0], seq));

  one.samples.push_back(random_theta(g, 5));
  auto all = marginal_prefix_logliks(seq, one);
  for (std::size_t m = 0; m < seq.size(); ++m)
    CHECK(all[m] == Approx(marginal_loglik(std::span(seq).first(m + 1), one)).epsilon(1e-13));

  std::vector<double> huge{-2000.0, -2000.0};
  CHECK(log_mean_exp(huge) == Approx(-2000.0).epsilon(1e-15));
  CHECK_THROWS_AS(log_mean_exp(std::vector<double>{}), Error);
}

TEST_CASE("MCMC config validation") {
  McmcConfig c;
  CHECK(c.sample_count() == 1500);
  c.chain_length = 50000;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("EmptyPosterior"), Error);
  try {
    c.validate();
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::Config);
  }
  c = McmcConfig{};
  c.thinning = 0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("InvalidMcmcConfig"), Error);
  c = McmcConfig{};
  c.proposal_sd = -1;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("InvalidMcmcConfig"), Error);

  auto j = to_json(short_config());
  CHECK(mcmc_config_from_json(j).chain_length == 6000);
  CHECK(mcmc_config_from_json(nlohmann::json::object()).chain_length == 200000);
}

TEST_CASE("fit rejects empty training data") {
  std::vector<std::vector<TaskId>> none{{}, {}};
  CHECK_THROWS_WITH_AS(fit_mcmc(none, 3, short_config()), doctest::Contains("EmptyTrainingSet"), Error);
}

TEST_CASE("fit is deterministic and the cached likelihood matches a direct recomputation") {
  std::mt19937_64 g(2);
  auto seqs = testing::random_sequences(g, 6, 25, 1);
  auto a = fit_mcmc(seqs, 6, short_config(), "g1");
  auto b = fit_mcmc(seqs, 6, short_config(), "g1");
  REQUIRE(a.samples.size() == 100);
  CHECK(a.samples == b.samples);
  CHECK(a.diagnostics.loglik_trace == b.diagnostics.loglik_trace);
  CHECK(a.diagnostics.iterations == 6000);
  CHECK(a.diagnostics.acceptance_rate > 0.05);
  CHECK(a.diagnostics.acceptance_rate < 0.99);

  auto c = fit_mcmc(seqs, 6, short_config(4), "g1");
  CHECK_FALSE(c.samples == a.samples);

  for (std::size_t s = 0; s < a.samples.size(); ++s) {
    double direct = 0;
    for (const auto& seq : seqs) direct += sequence_loglik(a.samples[s], seq);
    CHECK(a.diagnostics.loglik_trace[s] == Approx(direct).epsilon(1e-10));
  }
}

TEST_CASE("cached likelihood survives many rebuild periods") {
  std::mt19937_64 g(6);
  auto seqs = testing::random_sequences(g, 10, 30, 3);
  McmcConfig c = short_config(9);
  c.chain_length = 30000;
  c.burn_in = 0;
  c.thinning = 997;
  auto post = fit_mcmc(seqs, 10, c);
  for (std::size_t s = 0; s < post.samples.size(); ++s) {
    double direct = 0;
    for (const auto& seq : seqs) direct += sequence_loglik(post.samples[s], seq);
    CHECK(post.diagnostics.loglik_trace[s] == Approx(direct).epsilon(1e-10));
  }
}

TEST_CASE("two-task posterior matches numerical integration") {
  // P(first = 1) = logistic(theta11 - theta22); under the N(0, 25) prior the
  // difference is N(0, 50) a priori, and integrating against the likelihood
  // gives a posterior mean of 0.8906413097.
  std::vector<std::vector<TaskId>> seqs{{1, 2}};
  McmcConfig c;
  c.chain_length = 420000;
  c.burn_in = 20000;
  c.thinning = 10;
  c.proposal_sd = 1.0;
  c.prior_sd = 5.0;
  c.seed = 12345;
  auto post = fit_mcmc_chains(seqs, 2, c, 4);
  REQUIRE(post.samples.size() == 160000);
  CHECK(post.diagnostics.chain_seeds.size() == 4);
  double sum = 0;
  for (const auto& theta : post.samples) sum += step_probability(theta, TaskState(2), 1);
  const double mean = sum / static_cast<double>(post.samples.size());
  CHECK(mean > 0.5);
  CHECK(mean == Approx(0.8906413097).epsilon(0.015 / 0.89));

  auto again = fit_mcmc_chains(seqs, 2, c, 4);
  CHECK(again.samples == post.samples);
}

TEST_CASE("posterior JSON round trip") {
  std::mt19937_64 g(4);
  auto post = fit_mcmc(testing::random_sequences(g, 4, 10, 1), 4, short_config(), "g2");
  auto j = to_json(post);
  CHECK(j.at("schema") == kPosteriorSchema);
  auto back = posterior_from_json(j);
  CHECK(back.group == "g2");
  CHECK(back.tasks == 4);
  CHECK(back.samples == post.samples);
  CHECK(back.config.seed == post.config.seed);
  CHECK(to_json(back).dump() == j.dump());
}
