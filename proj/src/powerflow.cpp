#include "vvo/powerflow.hpp"

namespace vvo {

NetworkState NetworkState::nominal(const FeederNetwork& net) {
  NetworkState s;
  for (const auto& t : net.transformers) s.tap_indices.push_back(t.neutral_index());
  for (const auto& c : net.capacitors) s.cap_status.push_back(c.status);
  const auto n = static_cast<Eigen::Index>(net.num_buses());
  s.p_inj = Eigen::VectorXd::Zero(n);
  s.q_inj = Eigen::VectorXd::Zero(n);
  return s;
}

PowerFlowSolution solve(const FeederNetwork& net, const NetworkState& state, PowerFlowOptions options) {
  PowerFlowSolver solver(options);
  return solver.solve(net, state);
}

ViolationCount count_violations(const PowerFlowSolution& sol, const FeederNetwork& net) {
  ViolationCount out;
  const auto slack = static_cast<Eigen::Index>(net.slack_index());
  int monitored = 0;
  for (Eigen::Index i = 0; i < sol.vm.size(); ++i) {
    if (i == slack) continue;
    ++monitored;
    if (sol.vm(i) < kVoltageLow || sol.vm(i) > kVoltageHigh) ++out.count;
  }
  out.fraction = monitored == 0 ? 0.0 : static_cast<double>(out.count) / monitored;
  return out;
}

double total_losses(const PowerFlowSolution& sol, const FeederNetwork& net, const NetworkState& state) {
  return series_losses(sol, net, state);
}

double power_balance_residual(const PowerFlowSolution& sol, const FeederNetwork& net,
                              const NetworkState& state) {
  double injected = sol.slack_power.real();
  const auto slack = static_cast<Eigen::Index>(net.slack_index());
  for (Eigen::Index i = 0; i < state.p_inj.size(); ++i)
    if (i != slack) injected += state.p_inj(i);
  return injected - total_losses(sol, net, state);
}

}  // namespace vvo
