#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "test_support.hpp"
#include "vvo/baselines.hpp"

using namespace vvo;
using vvo::testing::data_path;

namespace {

struct Scenario {
  FeederNetwork net;
  ExogenousProfile profile;
  explicit Scenario(const std::string& file)
      : net(load_network(data_path(file))), profile(ExogenousProfile::synthetic(net.options.profile_seed)) {}
};

// Reward of a discrete toy action scored with the Gauss-Seidel reference.
double oracle_reward(const VvoEnv& env, const std::vector<int>& discrete) {
  const auto& net = env.network();
  Setpoints sp = neutral_setpoints(net, env.irradiance());
  std::copy_n(discrete.begin(), sp.cap_status.size(), sp.cap_status.begin());
  sp.tap_index[0] = discrete.back();
  const auto vm = testing::oracle_voltages(net, make_state(net, sp, env.load_factors()));
  int bad = 0;
  for (std::size_t i = 0; i < vm.size(); ++i)
    if (i != net.slack_index() && (vm[i] < 0.95 || vm[i] > 1.05)) ++bad;
  return -static_cast<double>(bad) / static_cast<double>(vm.size() - 1);
}

bool non_decreasing(const std::vector<double>& t) { return std::is_sorted(t.begin(), t.end()); }

// Hour of day with the most violations under the neutral action.
int stressed_hour(VvoEnv& env, std::uint64_t seed, double& neutral_reward) {
  int best = 0;
  neutral_reward = 1.0;
  for (int h = 0; h < 24; ++h) {
    env.reset(seed, h);
    const double r = env.evaluate(neutral_action(env.network())).reward;
    if (r < neutral_reward) {
      neutral_reward = r;
      best = h;
    }
  }
  env.reset(seed, best);
  return best;
}

}  // namespace

TEST_CASE("toy action space has 132 discrete combinations") {
  Scenario s("toy_discrete.json");
  VvoEnv env(s.net, s.profile);
  CHECK(env.space().n_continuous == 0);
  CHECK(env.space().discrete_cardinalities == std::vector<int>{2, 2, 33});
  CHECK(discrete_combinations(env.space()) == 132);
}

TEST_CASE("exhaustive search finds the true optimum of the toy") {
  Scenario s("toy_discrete.json");
  VvoEnv env(s.net, s.profile);
  for (int hour : {3, 12, 19}) {
    env.reset(7, hour);
    double best = -2.0;
    for (int c0 = 0; c0 < 2; ++c0)
      for (int c1 = 0; c1 < 2; ++c1)
        for (int t = 0; t < 33; ++t) best = std::max(best, oracle_reward(env, {c0, c1, t}));
    const auto r = brute_force_solve(env, 1000, 1);
    CHECK(r.evaluations == 132);
    CHECK(r.trace.size() == 132);
    CHECK(r.best_reward == doctest::Approx(best).epsilon(1e-12));
    CHECK(oracle_reward(env, r.best_action.discrete) == doctest::Approx(best).epsilon(1e-12));
    CHECK(non_decreasing(r.trace));

    // sampled methods never beat it
    const auto random = brute_force_solve(env, 300, 5, SamplingMode::Random);
    CHECK(random.best_reward <= r.best_reward);
    PsoConfig cfg;
    cfg.num_particles = 20;
    cfg.max_iters = 5;
    cfg.seed = 3;
    CHECK(pso_solve(env, cfg).best_reward <= r.best_reward);
  }
}

TEST_CASE("exhaustive enumeration respects a smaller budget") {
  Scenario s("toy_discrete.json");
  VvoEnv env(s.net, s.profile);
  env.reset(1, 12);
  const auto r = brute_force_solve(env, 40, 0, SamplingMode::Exhaustive);
  CHECK(r.evaluations == 40);
  CHECK(r.trace.size() == 40);
  // auto falls back to random sampling when the budget cannot cover every combination
  const auto a = brute_force_solve(env, 40, 0, SamplingMode::Auto);
  const auto b = brute_force_solve(env, 40, 0, SamplingMode::Random);
  CHECK(a.trace == b.trace);
}

TEST_CASE("budget 1 returns the single sample") {
  Scenario s("feeder13.json");
  VvoEnv env(s.net, s.profile);
  env.reset(2, 13);
  const auto r = brute_force_solve(env, 1, 9);
  CHECK(r.evaluations == 1);
  REQUIRE(r.trace.size() == 1);
  CHECK(r.trace[0] == r.best_reward);
  CHECK(env.evaluate(r.best_action).reward == r.best_reward);
  CHECK_THROWS_AS(brute_force_solve(env, 0, 9), std::invalid_argument);
}

TEST_CASE("random sampling: budget accounting, bounds, monotone trace, determinism") {
  Scenario s("feeder13.json");
  VvoEnv env(s.net, s.profile);
  env.reset(4, 14);
  for (long budget : {5L, 50L, 400L}) {
    const auto r = brute_force_solve(env, budget, 21, SamplingMode::Random);
    CHECK(r.evaluations == budget);
    CHECK(static_cast<long>(r.trace.size()) == budget);
    CHECK(non_decreasing(r.trace));
    CHECK(r.best_reward >= -1.0);
    CHECK(r.best_reward <= 0.0);
    CHECK((r.best_action.continuous.array().abs() <= 1.0).all());
    const auto again = brute_force_solve(env, budget, 21, SamplingMode::Random);
    CHECK(again.trace == r.trace);
    CHECK(again.best_action.discrete == r.best_action.discrete);
  }
  // a larger budget extends the same sample stream
  const auto small = brute_force_solve(env, 50, 21, SamplingMode::Random);
  const auto large = brute_force_solve(env, 400, 21, SamplingMode::Random);
  CHECK(large.best_reward >= small.best_reward);
  CHECK(std::equal(small.trace.begin(), small.trace.end(), large.trace.begin()));
}

TEST_CASE("PSO with one particle and no iterations returns its initial sample") {
  Scenario s("feeder13.json");
  VvoEnv env(s.net, s.profile);
  env.reset(4, 14);
  PsoConfig cfg;
  cfg.num_particles = 1;
  cfg.max_iters = 0;
  cfg.seed = 12;
  const auto r = pso_solve(env, cfg);
  CHECK(r.evaluations == 1);
  CHECK(r.trace.size() == 1);
  CHECK(env.evaluate(r.best_action).reward == r.best_reward);
  CHECK((r.best_action.continuous.array().abs() <= 1.0).all());
}

TEST_CASE("PSO stops in the first iteration when the neutral region is already clean") {
  Scenario s("toy_discrete.json");
  VvoEnv env(s.net, s.profile);
  env.reset(1, 12);
  PsoConfig cfg;
  cfg.seed = 2;
  const auto r = pso_solve(env, cfg);
  CHECK(r.best_reward == 0.0);
  CHECK(r.evaluations <= 2L * cfg.num_particles);
}

TEST_CASE("PSO invalid configuration") {
  Scenario s("toy_discrete.json");
  VvoEnv env(s.net, s.profile);
  env.reset(1, 12);
  PsoConfig cfg;
  cfg.num_particles = 0;
  CHECK_THROWS_AS(pso_solve(env, cfg), std::invalid_argument);
  cfg.num_particles = 3;
  cfg.max_iters = -1;
  CHECK_THROWS_AS(pso_solve(env, cfg), std::invalid_argument);
}

TEST_CASE("PSO: bounds, budget, monotone trace, determinism") {
  Scenario s("feeder13.json");
  VvoEnv env(s.net, s.profile);
  double neutral = 0.0;
  stressed_hour(env, 1, neutral);
  PsoConfig cfg;
  cfg.num_particles = 30;
  cfg.max_iters = 10;
  cfg.seed = 8;
  const auto r = pso_solve(env, cfg);
  CHECK(r.evaluations <= 30L * 11);
  CHECK(r.evaluations % 30 == 0);
  CHECK(non_decreasing(r.trace));
  CHECK(r.best_reward >= -1.0);
  CHECK(r.best_reward <= 0.0);
  CHECK((r.best_action.continuous.array().abs() <= 1.0).all());
  const auto& card = env.space().discrete_cardinalities;
  for (std::size_t k = 0; k < card.size(); ++k) {
    CHECK(r.best_action.discrete[k] >= 0);
    CHECK(r.best_action.discrete[k] < card[k]);
  }
  const auto again = pso_solve(env, cfg);
  CHECK(again.trace == r.trace);
  CHECK(again.best_action.continuous == r.best_action.continuous);
}

TEST_CASE("PSO matches or beats random search at equal budget on a stressed feeder") {
  auto raw = load_network(data_path("feeder13.json"));
  for (double scale : {3.5, 3.75}) {
    FeederNetwork stressed = raw;
    for (auto& l : stressed.loads) {
      l.base_p_kw *= scale;
      l.base_q_kvar *= scale;
    }
    const auto net = make_network(stressed);
    const auto profile = ExogenousProfile::synthetic(net.options.profile_seed);
    VvoEnv env(net, profile);
    env.reset(1, 19);
    REQUIRE(env.evaluate(neutral_action(net)).reward < -0.5);
    double pso_sum = 0.0, random_sum = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      PsoConfig cfg;
      cfg.seed = seed;
      const auto pso = pso_solve(env, cfg);
      const auto random = brute_force_solve(env, pso.evaluations, seed, SamplingMode::Random);
      CHECK(random.evaluations == pso.evaluations);
      CHECK(pso.evaluations <= 100L * 51);
      pso_sum += pso.best_reward;
      random_sum += random.best_reward;
    }
    CAPTURE(scale);
    CHECK(pso_sum >= random_sum);
  }
}
