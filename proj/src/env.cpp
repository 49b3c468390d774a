#include "vvo/env.hpp"

#include <algorithm>
#include <stdexcept>

namespace vvo {

ActionSpace action_space_descriptor(const FeederNetwork& net) {
  ActionSpace s;
  s.n_pv = static_cast<int>(net.pvs.size());
  s.n_batt = static_cast<int>(net.batteries.size());
  s.n_caps = static_cast<int>(net.capacitors.size());
  s.n_taps = static_cast<int>(net.transformers.size());
  s.n_continuous = 2 * s.n_pv + s.n_batt;
  for (int i = 0; i < s.n_caps; ++i) s.discrete_cardinalities.push_back(2);
  for (const auto& t : net.transformers) s.discrete_cardinalities.push_back(t.num_positions);
  s.obs_dim = static_cast<int>(net.buses.size() + net.loads.size());
  return s;
}

std::uint64_t descriptor_hash(const ActionSpace& space) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::int64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= static_cast<std::uint64_t>((v >> (8 * b)) & 0xff);
      h *= 1099511628211ULL;
    }
  };
  mix(space.n_pv);
  mix(space.n_batt);
  mix(space.n_caps);
  mix(space.n_taps);
  mix(space.obs_dim);
  for (int c : space.discrete_cardinalities) mix(c);
  return h;
}

namespace {

double affine(double x, double lo, double hi) {
  x = std::clamp(x, -1.0, 1.0);
  return lo + (x + 1.0) * 0.5 * (hi - lo);
}

double inverse_affine(double value, double lo, double hi) {
  if (hi <= lo) return 0.0;
  return std::clamp(2.0 * (value - lo) / (hi - lo) - 1.0, -1.0, 1.0);
}

double pv_p_ceiling(const PvSystem& pv, double irradiance) {
  return std::min(pv.p_max_kw, pv.pmpp_kw * std::clamp(irradiance, 0.0, 1.0));
}

}  // namespace

Setpoints decode_action(const ActionVector& a, const FeederNetwork& net, double irradiance) {
  const auto space = action_space_descriptor(net);
  if (a.continuous.size() != space.n_continuous || static_cast<int>(a.discrete.size()) != space.n_discrete())
    throw std::invalid_argument("action does not match the scenario's action space");

  Setpoints sp;
  const int n_pv = space.n_pv;
  for (int i = 0; i < n_pv; ++i) {
    const auto& pv = net.pvs[i];
    sp.pv_q_kvar.push_back(affine(a.continuous(i), pv.q_min_kvar, pv.q_max_kvar));
    const double hi = pv_p_ceiling(pv, irradiance);
    const double lo = std::min(pv.p_min_kw, hi);
    sp.pv_p_kw.push_back(affine(a.continuous(n_pv + i), lo, hi));
  }
  for (int i = 0; i < space.n_batt; ++i) {
    const auto& b = net.batteries[i];
    sp.batt_p_kw.push_back(affine(a.continuous(2 * n_pv + i), b.p_min_kw, b.p_max_kw));
  }
  for (int k = 0; k < space.n_discrete(); ++k) {
    const int v = std::clamp(a.discrete[k], 0, space.discrete_cardinalities[k] - 1);
    if (k < space.n_caps)
      sp.cap_status.push_back(v);
    else
      sp.tap_index.push_back(v);
  }
  return sp;
}

Setpoints neutral_setpoints(const FeederNetwork& net, double irradiance) {
  Setpoints sp;
  for (const auto& pv : net.pvs) {
    sp.pv_q_kvar.push_back(0.0);
    sp.pv_p_kw.push_back(pv_p_ceiling(pv, irradiance));
  }
  sp.batt_p_kw.assign(net.batteries.size(), 0.0);
  sp.cap_status.assign(net.capacitors.size(), 0);
  for (const auto& t : net.transformers) sp.tap_index.push_back(t.neutral_index());
  return sp;
}

ActionVector neutral_action(const FeederNetwork& net) {
  const auto space = action_space_descriptor(net);
  ActionVector a;
  a.continuous = Eigen::VectorXd::Zero(space.n_continuous);
  const int n_pv = space.n_pv;
  for (int i = 0; i < n_pv; ++i) {
    a.continuous(i) = inverse_affine(0.0, net.pvs[i].q_min_kvar, net.pvs[i].q_max_kvar);
    a.continuous(n_pv + i) = 1.0;
  }
  for (int i = 0; i < space.n_batt; ++i)
    a.continuous(2 * n_pv + i) = inverse_affine(0.0, net.batteries[i].p_min_kw, net.batteries[i].p_max_kw);
  a.discrete.assign(net.capacitors.size(), 0);
  for (const auto& t : net.transformers) a.discrete.push_back(t.neutral_index());
  return a;
}

NetworkState make_state(const FeederNetwork& net, const Setpoints& sp, const std::vector<double>& load_factors) {
  if (load_factors.size() != net.loads.size())
    throw std::invalid_argument("one load factor per load required");
  NetworkState s;
  s.tap_indices = sp.tap_index;
  s.cap_status = sp.cap_status;
  const auto n = static_cast<Eigen::Index>(net.num_buses());
  s.p_inj = Eigen::VectorXd::Zero(n);
  s.q_inj = Eigen::VectorXd::Zero(n);
  for (std::size_t i = 0; i < net.pvs.size(); ++i) {
    const auto b = net.bus_index(net.pvs[i].bus);
    s.p_inj(b) += net.to_pu(sp.pv_p_kw[i]);
    s.q_inj(b) += net.to_pu(sp.pv_q_kvar[i]);
  }
  for (std::size_t i = 0; i < net.batteries.size(); ++i)
    s.p_inj(net.bus_index(net.batteries[i].bus)) += net.to_pu(sp.batt_p_kw[i]);
  for (std::size_t i = 0; i < net.loads.size(); ++i) {
    const auto& l = net.loads[i];
    const auto b = net.bus_index(l.bus);
    s.p_inj(b) -= net.to_pu(l.base_p_kw * load_factors[i]);
    s.q_inj(b) -= net.to_pu(l.base_q_kvar * load_factors[i]);
  }
  return s;
}

VvoEnv::VvoEnv(const FeederNetwork& net, const ExogenousProfile& profile, PowerFlowOptions pf)
    : net_(net), profile_(profile), space_(action_space_descriptor(net)), solver_(pf) {}

Observation VvoEnv::reset(std::uint64_t seed, std::optional<int> hour) {
  rng_.seed(seed);
  return reset(hour);
}

Observation VvoEnv::reset(std::optional<int> hour) {
  if (hour) {
    if (*hour < 0 || *hour >= kHoursPerYear) throw std::out_of_range("hour outside [0, 8760)");
    hour_ = *hour;
  } else {
    hour_ = std::uniform_int_distribution<int>(0, kHoursPerYear - 1)(rng_);
  }
  irradiance_ = profile_.irradiance(hour_);
  load_factors_ = hour_load_factors(profile_, hour_, net_.loads.size(), net_.options.load_sigma, rng_);

  const auto state = make_state(net_, neutral_setpoints(net_, irradiance_), load_factors_);
  try {
    const auto sol = solver_.solve(net_, state);
    baseline_converged_ = true;
    obs_ = build_observation(sol.vm);
  } catch (const PowerFlowDiverged&) {
    baseline_converged_ = false;
    obs_ = build_observation(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(net_.num_buses())));
  }
  ready_ = true;
  return obs_;
}

Setpoints VvoEnv::decode(const ActionVector& a) const { return decode_action(a, net_, irradiance_); }

StepOutcome VvoEnv::evaluate(const ActionVector& a) {
  if (!ready_) throw std::logic_error("reset must be called before step");
  StepOutcome out;
  const auto state = make_state(net_, decode(a), load_factors_);
  try {
    const auto sol = solver_.solve(net_, state);
    const auto v = count_violations(sol, net_);
    out.reward = v.count == 0 ? 0.0 : -v.fraction;
    out.info = {v.count, sol.losses_pu, true};
    out.observation = build_observation(sol.vm);
  } catch (const PowerFlowDiverged&) {
    out.reward = -1.0;
    const int monitored = static_cast<int>(net_.num_buses()) - 1;
    out.info = {monitored, 0.0, false};
    out.observation = build_observation(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(net_.num_buses())));
  }
  out.done = true;
  return out;
}

StepOutcome VvoEnv::step(const ActionVector& a) {
  auto out = evaluate(a);
  ready_ = false;
  return out;
}

Observation VvoEnv::build_observation(const Eigen::VectorXd& vm) const {
  Observation obs(space_.obs_dim);
  const auto n = vm.size();
  obs.head(n) = vm;
  for (std::size_t i = 0; i < net_.loads.size(); ++i)
    obs(n + static_cast<Eigen::Index>(i)) = net_.to_pu(net_.loads[i].base_p_kw * load_factors_[i]);
  return obs;
}

}  // namespace vvo
