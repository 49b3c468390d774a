#pragma once

#include <algorithm>
#include <complex>
#include <filesystem>
#include <string>
#include <vector>

#include "vvo/grid_model.hpp"
#include "vvo/powerflow.hpp"

namespace vvo::testing {

inline std::filesystem::path data_path(const std::string& name) { return std::filesystem::path(VVO_DATA_DIR) / name; }

/// Slack "1" feeding bus "2" through z = r + jx.
inline FeederNetwork two_bus(double r = 0.01, double x = 0.02) {
  FeederNetwork n;
  n.buses = {{"1", 4.16, BusType::Slack, 3, 1.0}, {"2", 4.16, BusType::Load, 3, 1.0}};
  n.lines = {{"1", "2", r, x, 0.0}};
  return make_network(n);
}

/// Slack -> transformer -> bus "a" -> line -> bus "b".
inline FeederNetwork tapped_chain() {
  FeederNetwork n;
  n.buses = {{"s", 4.16, BusType::Slack, 3, 1.0}, {"a", 4.16, BusType::Load, 3, 1.0}, {"b", 4.16, BusType::Load, 3, 1.0}};
  Transformer t;
  t.from_bus = "s";
  t.to_bus = "a";
  t.resistance_pu = 0.0;
  t.reactance_pu = 0.05;
  n.transformers = {t};
  n.lines = {{"a", "b", 0.01, 0.02, 0.0}};
  n.loads = {{"a", 300.0, 100.0}, {"b", 400.0, 150.0}};
  return make_network(n);
}

using OracleMatrix = std::vector<std::vector<std::complex<double>>>;

/// Admittance matrix assembled independently of the library.
inline OracleMatrix oracle_admittance(const FeederNetwork& net, const NetworkState& st) {
  using C = std::complex<double>;
  const std::size_t n = net.num_buses();
  OracleMatrix y(n, std::vector<C>(n, 0.0));
  auto stamp = [&](std::size_t f, std::size_t t, C yff, C ytt, C yft) {
    y[f][f] += yff;
    y[t][t] += ytt;
    y[f][t] += yft;
    y[t][f] += yft;
  };
  for (const auto& l : net.lines) {
    const C z(l.resistance_pu, l.reactance_pu);
    const C sh(0.0, l.shunt_susceptance_pu / 2.0);
    stamp(net.bus_index(l.from_bus), net.bus_index(l.to_bus), 1.0 / z + sh, 1.0 / z + sh, -1.0 / z);
  }
  for (std::size_t k = 0; k < net.transformers.size(); ++k) {
    const auto& t = net.transformers[k];
    const double a = t.tap_min_pu + (t.tap_max_pu - t.tap_min_pu) * st.tap_indices[k] / (t.num_positions - 1.0);
    const C ys = 1.0 / C(t.resistance_pu, t.reactance_pu);
    stamp(net.bus_index(t.from_bus), net.bus_index(t.to_bus), ys, ys / (a * a), -ys / a);
  }
  for (std::size_t k = 0; k < net.capacitors.size(); ++k)
    if (st.cap_status[k]) y[net.bus_index(net.capacitors[k].bus)][net.bus_index(net.capacitors[k].bus)] += C(0.0, net.capacitors[k].rated_kvar / (1000.0 * net.mva_base));
  return y;
}

/// Independent reference solver: Gauss-Seidel iterated to a tight fixed point.
inline std::vector<std::complex<double>> oracle_solution(const FeederNetwork& net, const NetworkState& st) {
  using C = std::complex<double>;
  const auto y = oracle_admittance(net, st);
  const std::size_t n = net.num_buses();
  const std::size_t slack = net.slack_index();
  std::vector<C> v(n, C(net.buses[slack].v_set_pu, 0.0));
  for (int sweep = 0; sweep < 200000; ++sweep) {
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == slack) continue;
      C acc = std::conj(C(st.p_inj(i), st.q_inj(i)) / v[i]);
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) acc -= y[i][j] * v[j];
      const C next = acc / y[i][i];
      change = std::max(change, std::abs(next - v[i]));
      v[i] = next;
    }
    if (change < 1e-14) break;
  }
  return v;
}

inline std::vector<double> oracle_voltages(const FeederNetwork& net, const NetworkState& st) {
  const auto v = oracle_solution(net, st);
  std::vector<double> vm(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) vm[i] = std::abs(v[i]);
  return vm;
}

/// Total active power absorbed by the branches, pu.
inline double oracle_losses(const FeederNetwork& net, const NetworkState& st) {
  const auto y = oracle_admittance(net, st);
  const auto v = oracle_solution(net, st);
  double p = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::complex<double> cur = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) cur += y[i][j] * v[j];
    p += (v[i] * std::conj(cur)).real();
  }
  return p;
}

}  // namespace vvo::testing
