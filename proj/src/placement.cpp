#include "vvo/placement.hpp"

#include <algorithm>
#include <charconv>
#include <random>
#include <stdexcept>
#include <thread>

#include "vvo/env.hpp"
#include "vvo/runtime.hpp"

namespace vvo {

std::vector<int> horizon_hours(int count, int stride) {
  if (count <= 0) throw std::invalid_argument("empty horizon");
  if (stride <= 0) throw std::invalid_argument("hour stride must be positive");
  std::vector<int> hours;
  for (int i = 0; i < count; ++i) {
    const long h = static_cast<long>(i) * stride;
    if (h >= kHoursPerYear) throw std::invalid_argument("horizon extends past hour 8759");
    hours.push_back(static_cast<int>(h));
  }
  return hours;
}

std::vector<double> placement_load_factors(const FeederNetwork& net, const ExogenousProfile& profile, int hour,
                                           std::uint64_t load_seed) {
  std::mt19937_64 rng(mix_seed(load_seed, static_cast<std::uint64_t>(hour)));
  return hour_load_factors(profile, hour, net.loads.size(), net.options.load_sigma, rng);
}

PlacementCandidate evaluate_fitness(const FeederNetwork& net, const std::string& pv_bus,
                                    const std::string& battery_bus, const ExogenousProfile& profile,
                                    const std::vector<int>& hours, const PlacementOptions& options) {
  const auto pv_index = net.bus_index(pv_bus);
  net.bus_index(battery_bus);
  PlacementCandidate c{pv_bus, battery_bus};
  PowerFlowSolver solver;
  const int monitored = static_cast<int>(net.num_buses()) - 1;
  for (int hour : hours) {
    const double irr = profile.irradiance(hour);
    auto state = make_state(net, neutral_setpoints(net, irr),
                            placement_load_factors(net, profile, hour, options.load_seed));
    state.p_inj(static_cast<Eigen::Index>(pv_index)) += net.to_pu(irr * options.pv_rating_kw);
    try {
      const auto sol = solver.solve(net, state);
      c.v_total += count_violations(sol, net).count;
      c.l_total += sol.losses_pu;
    } catch (const PowerFlowDiverged&) {
      c.v_total += monitored;
      ++c.diverged_hours;
    }
  }
  c.fitness = static_cast<double>(c.v_total) + c.l_total;
  return c;
}

namespace {

bool parse_int(const std::string& s, long& out) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool id_less(const std::string& a, const std::string& b) {
  long x = 0, y = 0;
  if (parse_int(a, x) && parse_int(b, y) && x != y) return x < y;
  return a < b;
}

}  // namespace

bool placement_less(const PlacementCandidate& a, const PlacementCandidate& b) {
  if (a.fitness != b.fitness) return a.fitness < b.fitness;
  if (a.pv_bus != b.pv_bus) return id_less(a.pv_bus, b.pv_bus);
  return id_less(a.battery_bus, b.battery_bus);
}

std::vector<std::string> all_candidate_buses(const FeederNetwork& net) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < net.num_buses(); ++i)
    if (i != net.slack_index()) ids.push_back(net.buses[i].id);
  return ids;
}

namespace {

std::vector<PlacementCandidate> evaluate_all(const FeederNetwork& net, const std::vector<std::string>& candidates,
                                             const ExogenousProfile& profile, const std::vector<int>& hours,
                                             const PlacementOptions& options) {
  std::vector<PlacementCandidate> out(candidates.size());
  int threads = options.threads > 0 ? options.threads : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, static_cast<int>(std::max<std::size_t>(candidates.size(), 1)));
  auto work = [&](int worker) {
    for (std::size_t i = worker; i < candidates.size(); i += threads)
      out[i] = evaluate_fitness(net, candidates[i], candidates[i], profile, hours, options);
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < threads; ++w) pool.emplace_back(work, w);
  }
  return out;
}

}  // namespace

PlacementRanking rank_placements(const FeederNetwork& net, const std::vector<std::string>& candidates,
                                 const ExogenousProfile& profile, const std::vector<int>& hours, std::size_t top_k,
                                 const PlacementOptions& options) {
  if (candidates.empty()) throw std::invalid_argument("no placement candidates");
  if (hours.empty()) throw std::invalid_argument("empty horizon");
  PlacementRanking r;
  r.hours = hours;
  r.candidates = evaluate_all(net, candidates, profile, hours, options);
  std::sort(r.candidates.begin(), r.candidates.end(), placement_less);
  if (r.candidates.size() > top_k) r.candidates.resize(top_k);
  return r;
}

PlacementRanking rank_placements_sequential(const FeederNetwork& net, const std::vector<std::string>& candidates,
                                            const ExogenousProfile& profile, const std::vector<int>& hours,
                                            std::size_t top_k, const PlacementOptions& options) {
  if (candidates.empty()) throw std::invalid_argument("no placement candidates");
  if (hours.empty()) throw std::invalid_argument("empty horizon");
  PlacementRanking r;
  r.hours = hours;
  FeederNetwork current = net;
  std::vector<std::string> remaining = candidates;
  while (r.candidates.size() < top_k && !remaining.empty()) {
    auto scored = evaluate_all(current, remaining, profile, hours, options);
    const auto best = *std::min_element(scored.begin(), scored.end(), placement_less);
    r.candidates.push_back(best);
    std::erase(remaining, best.pv_bus);
    FeederNetwork next = current;
    next.pvs.push_back({best.pv_bus, options.pv_rating_kw, 0.0, options.pv_rating_kw, 0.0, 0.0});
    current = make_network(std::move(next));
  }
  return r;
}

}  // namespace vvo
