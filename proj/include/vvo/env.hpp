#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vvo/grid_model.hpp"
#include "vvo/powerflow.hpp"
#include "vvo/profile.hpp"

namespace vvo {

/// Sizes of the hybrid action space and the observation vector.
/// Continuous block order: Q_PV[0..n_pv), P_PV[0..n_pv), P_batt[0..n_batt).
/// Discrete block order: one binary head per capacitor, then one head per transformer.
struct ActionSpace {
  int n_pv = 0;
  int n_batt = 0;
  int n_caps = 0;
  int n_taps = 0;
  int n_continuous = 0;
  std::vector<int> discrete_cardinalities;
  int obs_dim = 0;

  int n_discrete() const { return static_cast<int>(discrete_cardinalities.size()); }
  bool operator==(const ActionSpace&) const = default;
};

ActionSpace action_space_descriptor(const FeederNetwork& net);

/// Stable digest of the action space and observation layout, used to match
/// checkpoints against scenarios.
std::uint64_t descriptor_hash(const ActionSpace& space);

using Observation = Eigen::VectorXd;

struct ActionVector {
  Eigen::VectorXd continuous;  // normalized, [-1, 1]
  std::vector<int> discrete;
};

/// Physical device setpoints after denormalization.
struct Setpoints {
  std::vector<double> pv_p_kw;
  std::vector<double> pv_q_kvar;
  std::vector<double> batt_p_kw;
  std::vector<int> cap_status;
  std::vector<int> tap_index;
};

/// Maps a normalized action onto device bounds. Continuous entries are clamped
/// to [-1, 1]; the PV active-power ceiling becomes min(p_max, pmpp * irradiance);
/// discrete entries are clamped into their head's range.
Setpoints decode_action(const ActionVector& a, const FeederNetwork& net, double irradiance);

/// Neutral controls: mid tap, capacitors off, PV at unity power factor and
/// available maximum power, batteries idle.
Setpoints neutral_setpoints(const FeederNetwork& net, double irradiance);

/// Normalized action whose decoding is the neutral setpoints (PV P at +1).
ActionVector neutral_action(const FeederNetwork& net);

/// Bus injections and control state for given setpoints and load factors.
NetworkState make_state(const FeederNetwork& net, const Setpoints& sp, const std::vector<double>& load_factors);

struct StepInfo {
  int violation_count = 0;
  double losses_pu = 0.0;
  bool converged = true;
};

struct StepOutcome {
  Observation observation;
  double reward = 0.0;
  bool done = true;
  StepInfo info;
};

/// One-control-step Volt-VAR episode over a shared, immutable feeder. The
/// network and profile must outlive the environment.
class VvoEnv {
 public:
  VvoEnv(const FeederNetwork& net, const ExogenousProfile& profile, PowerFlowOptions pf = {});

  /// Reseeds the episode stream, then starts an episode.
  Observation reset(std::uint64_t seed, std::optional<int> hour);
  /// Starts the next episode from the environment's own random stream.
  Observation reset(std::optional<int> hour = std::nullopt);

  /// Applies `a`, solves, and ends the episode.
  StepOutcome step(const ActionVector& a);
  /// Scores `a` against the current episode without ending it.
  StepOutcome evaluate(const ActionVector& a);

  Setpoints decode(const ActionVector& a) const;

  const ActionSpace& space() const { return space_; }
  const FeederNetwork& network() const { return net_; }
  int hour() const { return hour_; }
  double irradiance() const { return irradiance_; }
  const std::vector<double>& load_factors() const { return load_factors_; }
  bool baseline_converged() const { return baseline_converged_; }
  const Observation& observation() const { return obs_; }

 private:
  Observation build_observation(const Eigen::VectorXd& vm) const;

  const FeederNetwork& net_;
  const ExogenousProfile& profile_;
  ActionSpace space_;
  PowerFlowSolver solver_;
  std::mt19937_64 rng_;
  bool ready_ = false;
  int hour_ = 0;
  double irradiance_ = 0.0;
  std::vector<double> load_factors_;
  bool baseline_converged_ = true;
  Observation obs_;
};

}  // namespace vvo
