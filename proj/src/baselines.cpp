#include "vvo/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace vvo {

long discrete_combinations(const ActionSpace& space) {
  long n = 1;
  for (int c : space.discrete_cardinalities) n *= c;
  return n;
}

namespace {

struct Tracker {
  SearchResult result;
  void offer(const ActionVector& a, double reward) {
    ++result.evaluations;
    if (result.evaluations == 1 || reward > result.best_reward) {
      result.best_reward = reward;
      result.best_action = a;
    }
  }
};

ActionVector random_action(const ActionSpace& s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ActionVector a;
  a.continuous.resize(s.n_continuous);
  for (int j = 0; j < s.n_continuous; ++j) a.continuous(j) = u(rng);
  for (int c : s.discrete_cardinalities) a.discrete.push_back(std::uniform_int_distribution<int>(0, c - 1)(rng));
  return a;
}

}  // namespace

SearchResult brute_force_solve(VvoEnv& env, long budget, std::uint64_t seed, SamplingMode mode) {
  if (budget < 1) throw std::invalid_argument("budget must be at least 1");
  const auto& space = env.space();
  if (mode == SamplingMode::Auto)
    mode = space.n_continuous == 0 && discrete_combinations(space) <= budget ? SamplingMode::Exhaustive
                                                                              : SamplingMode::Random;
  Tracker t;
  if (mode == SamplingMode::Exhaustive) {
    ActionVector a = neutral_action(env.network());
    std::fill(a.discrete.begin(), a.discrete.end(), 0);
    const long total = std::min(budget, discrete_combinations(space));
    for (long k = 0; k < total; ++k) {
      t.offer(a, env.evaluate(a).reward);
      t.result.trace.push_back(t.result.best_reward);
      // odometer increment, last head fastest
      for (int h = space.n_discrete() - 1; h >= 0; --h) {
        if (++a.discrete[h] < space.discrete_cardinalities[h]) break;
        a.discrete[h] = 0;
      }
    }
    return t.result;
  }
  std::mt19937_64 rng(seed);
  for (long k = 0; k < budget; ++k) {
    const auto a = random_action(space, rng);
    t.offer(a, env.evaluate(a).reward);
    t.result.trace.push_back(t.result.best_reward);
  }
  return t.result;
}

SearchResult pso_solve(VvoEnv& env, const PsoConfig& cfg) {
  if (cfg.num_particles < 1) throw std::invalid_argument("PSO needs at least one particle");
  if (cfg.max_iters < 0) throw std::invalid_argument("PSO iteration count must be non-negative");
  const auto& space = env.space();
  const int nc = space.n_continuous;
  const int dims = nc + space.n_discrete();
  Eigen::VectorXd lo(dims), hi(dims);
  for (int j = 0; j < nc; ++j) {
    lo(j) = -1.0;
    hi(j) = 1.0;
  }
  for (int k = 0; k < space.n_discrete(); ++k) {
    lo(nc + k) = 0.0;
    hi(nc + k) = space.discrete_cardinalities[k] - 1;
  }
  const Eigen::VectorXd range = hi - lo;

  auto to_action = [&](const Eigen::VectorXd& x) {
    ActionVector a;
    a.continuous = x.head(nc);
    for (int k = 0; k < space.n_discrete(); ++k)
      a.discrete.push_back(static_cast<int>(std::lround(std::clamp(x(nc + k), lo(nc + k), hi(nc + k)))));
    return a;
  };

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = cfg.num_particles;
  Eigen::MatrixXd pos(dims, n), vel(dims, n), best_pos(dims, n);
  Eigen::VectorXd best_val(n);
  Tracker t;
  Eigen::VectorXd global_pos(dims);

  for (int p = 0; p < n; ++p) {
    for (int d = 0; d < dims; ++d) {
      pos(d, p) = lo(d) + unit(rng) * range(d);
      vel(d, p) = (2.0 * unit(rng) - 1.0) * 0.1 * range(d);
    }
    const auto a = to_action(pos.col(p));
    best_val(p) = env.evaluate(a).reward;
    best_pos.col(p) = pos.col(p);
    const bool improved = t.result.evaluations == 0 || best_val(p) >= t.result.best_reward;
    t.offer(a, best_val(p));
    if (improved) global_pos = pos.col(p);
  }
  t.result.trace.push_back(t.result.best_reward);

  for (int it = 0; it < cfg.max_iters && t.result.best_reward < 0.0; ++it) {
    for (int p = 0; p < n; ++p) {
      for (int d = 0; d < dims; ++d) {
        const double r1 = unit(rng), r2 = unit(rng);
        double v = cfg.inertia * vel(d, p) + cfg.c1 * r1 * (best_pos(d, p) - pos(d, p)) +
                   cfg.c2 * r2 * (global_pos(d) - pos(d, p));
        v = std::clamp(v, -range(d), range(d));
        vel(d, p) = v;
        pos(d, p) = std::clamp(pos(d, p) + v, lo(d), hi(d));
      }
      const auto a = to_action(pos.col(p));
      const double r = env.evaluate(a).reward;
      if (r >= best_val(p)) {
        best_val(p) = r;
        best_pos.col(p) = pos.col(p);
      }
      const bool improved = r >= t.result.best_reward;
      t.offer(a, r);
      if (improved) global_pos = pos.col(p);
    }
    t.result.trace.push_back(t.result.best_reward);
  }
  return t.result;
}

}  // namespace vvo
