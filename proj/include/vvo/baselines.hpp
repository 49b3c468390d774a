#pragma once

#include <cstdint>
#include <vector>

#include "vvo/env.hpp"

namespace vvo {

struct PsoConfig {
  int num_particles = 100;
  int max_iters = 50;
  double inertia = 0.729;
  double c1 = 1.49445;
  double c2 = 1.49445;
  std::uint64_t seed = 0;
};

struct SearchResult {
  ActionVector best_action;
  double best_reward = -1.0;
  long evaluations = 0;
  std::vector<double> trace;  // best-so-far reward; per evaluation (sampling) or per iteration (PSO)
};

/// Global-best PSO over the flattened action vector. Discrete dimensions are
/// searched as continuous positions in [0, cardinality - 1] and rounded when
/// scored. Stops early once a zero-violation action is found. `env` must be
/// reset at the hour of interest; its episode is not ended.
SearchResult pso_solve(VvoEnv& env, const PsoConfig& cfg);

enum class SamplingMode { Auto, Random, Exhaustive };

/// Best of `budget` uniform random actions, or, in exhaustive mode, the first
/// `budget` discrete combinations in lexicographic order with the continuous
/// block held at its neutral value. Auto selects exhaustive when the scenario
/// has no continuous devices and the combination count fits in the budget.
SearchResult brute_force_solve(VvoEnv& env, long budget, std::uint64_t seed, SamplingMode mode = SamplingMode::Auto);

/// Number of distinct discrete actions.
long discrete_combinations(const ActionSpace& space);

}  // namespace vvo
