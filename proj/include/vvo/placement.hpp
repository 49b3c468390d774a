#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vvo/grid_model.hpp"
#include "vvo/powerflow.hpp"
#include "vvo/profile.hpp"

namespace vvo {

struct PlacementOptions {
  // Rated PV power placed at the candidate bus; hourly output is irradiance * rating.
  double pv_rating_kw = 100.0;
  // Seed for the per-hour load-factor draws (each hour draws from its own stream).
  std::uint64_t load_seed = 0;
  // Worker threads for candidate fan-out; 0 picks hardware concurrency.
  int threads = 1;
};

struct PlacementCandidate {
  std::string pv_bus;
  std::string battery_bus;
  double fitness = 0.0;  // v_total + l_total
  long v_total = 0;      // violating bus-hours
  double l_total = 0.0;  // summed hourly losses, pu
  int diverged_hours = 0;
};

struct PlacementRanking {
  std::vector<PlacementCandidate> candidates;  // ascending fitness
  std::vector<int> hours;
};

/// Contiguous hours {0, stride, 2 stride, ...}, `count` of them, all below 8760.
std::vector<int> horizon_hours(int count, int stride = 1);

/// Load factors used for `hour` during placement; independent of evaluation order.
std::vector<double> placement_load_factors(const FeederNetwork& net, const ExogenousProfile& profile, int hour,
                                           std::uint64_t load_seed);

/// Hourly sweep with a PV of the configured rating at `pv_bus` (battery idle at
/// `battery_bus`), existing devices at neutral controls. A diverged hour counts
/// every non-slack bus as violating and adds no loss.
PlacementCandidate evaluate_fitness(const FeederNetwork& net, const std::string& pv_bus,
                                    const std::string& battery_bus, const ExogenousProfile& profile,
                                    const std::vector<int>& hours, const PlacementOptions& options = {});

/// Orders candidates by (fitness, bus id), ids compared numerically when both are integers.
bool placement_less(const PlacementCandidate& a, const PlacementCandidate& b);

/// Evaluates every candidate bus independently, sorts ascending and keeps `top_k`.
PlacementRanking rank_placements(const FeederNetwork& net, const std::vector<std::string>& candidates,
                                 const ExogenousProfile& profile, const std::vector<int>& hours, std::size_t top_k,
                                 const PlacementOptions& options = {});

/// Greedy variant: after each pick the chosen PV stays in the network for later rounds.
PlacementRanking rank_placements_sequential(const FeederNetwork& net, const std::vector<std::string>& candidates,
                                            const ExogenousProfile& profile, const std::vector<int>& hours,
                                            std::size_t top_k, const PlacementOptions& options = {});

/// Every non-slack bus id.
std::vector<std::string> all_candidate_buses(const FeederNetwork& net);

}  // namespace vvo
