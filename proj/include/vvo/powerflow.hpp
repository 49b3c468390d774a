#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vvo/grid_model.hpp"

namespace vvo {

/// Control and injection state applied to a FeederNetwork for one solve.
/// Injections are per-unit on the system base, positive into the bus.
struct NetworkState {
  std::vector<int> tap_indices;  // one per transformer
  std::vector<int> cap_status;   // one per capacitor, 0/1
  Eigen::VectorXd p_inj;         // one per bus
  Eigen::VectorXd q_inj;

  /// Taps at mid position, capacitors at their scenario status, no injections.
  static NetworkState nominal(const FeederNetwork& net);
};

/// Thrown when Newton iterations fail to reach tolerance.
class PowerFlowDiverged : public std::runtime_error {
 public:
  PowerFlowDiverged(double last_mismatch, int iterations)
      : std::runtime_error("power flow diverged after " + std::to_string(iterations) +
                           " iterations, mismatch " + std::to_string(last_mismatch)),
        last_mismatch(last_mismatch),
        iterations(iterations) {}
  double last_mismatch;
  int iterations;
};

template <typename Scalar>
using ComplexMatrix = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using ComplexVector = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;
template <typename Scalar>
using RealVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct BasicPowerFlowSolution {
  RealVector<Scalar> vm;  // |V| per bus, pu
  RealVector<Scalar> va;  // angle per bus, rad; slack is 0
  std::complex<Scalar> slack_power;
  Scalar losses_pu = 0;
  int iterations = 0;
  Scalar max_mismatch = 0;

  ComplexVector<Scalar> voltage() const {
    ComplexVector<Scalar> v(vm.size());
    for (Eigen::Index i = 0; i < vm.size(); ++i) v(i) = std::polar(vm(i), va(i));
    return v;
  }
};

using PowerFlowSolution = BasicPowerFlowSolution<double>;

struct PowerFlowOptions {
  double tolerance = 1e-8;
  int max_iterations = 50;
};

struct ViolationCount {
  int count = 0;
  double fraction = 0.0;
};

inline constexpr double kVoltageLow = 0.95;
inline constexpr double kVoltageHigh = 1.05;

namespace detail {

template <typename Scalar>
std::complex<Scalar> series_admittance(double r, double x) {
  return Scalar(1) / std::complex<Scalar>(Scalar(r), Scalar(x));
}

template <typename Scalar>
Scalar tap_of(const FeederNetwork& net, const NetworkState& state, std::size_t k) {
  return Scalar(tap_ratio(net.transformers[k], state.tap_indices.at(k)));
}

}  // namespace detail

/// Bus admittance matrix including line charging, off-nominal taps and
/// switched capacitor susceptance.
template <typename Scalar = double>
ComplexMatrix<Scalar> build_admittance(const FeederNetwork& net, const NetworkState& state) {
  using C = std::complex<Scalar>;
  const auto n = static_cast<Eigen::Index>(net.num_buses());
  ComplexMatrix<Scalar> y = ComplexMatrix<Scalar>::Zero(n, n);

  for (const auto& l : net.lines) {
    const auto f = static_cast<Eigen::Index>(net.bus_index(l.from_bus));
    const auto t = static_cast<Eigen::Index>(net.bus_index(l.to_bus));
    const C ys = detail::series_admittance<Scalar>(l.resistance_pu, l.reactance_pu);
    const C half_shunt(0, Scalar(l.shunt_susceptance_pu) / 2);
    y(f, f) += ys + half_shunt;
    y(t, t) += ys + half_shunt;
    y(f, t) -= ys;
    y(t, f) -= ys;
  }
  for (std::size_t k = 0; k < net.transformers.size(); ++k) {
    const auto& tr = net.transformers[k];
    const auto f = static_cast<Eigen::Index>(net.bus_index(tr.from_bus));
    const auto t = static_cast<Eigen::Index>(net.bus_index(tr.to_bus));
    const C ys = detail::series_admittance<Scalar>(tr.resistance_pu, tr.reactance_pu);
    const Scalar a = detail::tap_of<Scalar>(net, state, k);
    // Ideal 1:a stage on the to side, so the no-load ratio is |V_to| = a |V_from|.
    y(f, f) += ys;
    y(t, t) += ys / (a * a);
    y(f, t) -= ys / a;
    y(t, f) -= ys / a;
  }
  for (std::size_t k = 0; k < net.capacitors.size(); ++k) {
    const auto& cap = net.capacitors[k];
    if (state.cap_status.at(k) == 0) continue;
    const auto b = static_cast<Eigen::Index>(net.bus_index(cap.bus));
    y(b, b) += C(0, Scalar(net.to_pu(cap.rated_kvar)));
  }
  return y;
}

/// Total active series loss sum |I|^2 R over lines and transformers.
template <typename Scalar>
Scalar series_losses(const BasicPowerFlowSolution<Scalar>& sol, const FeederNetwork& net,
                    const NetworkState& state) {
  using C = std::complex<Scalar>;
  const auto v = sol.voltage();
  Scalar loss = 0;
  for (const auto& l : net.lines) {
    const C i = (v(net.bus_index(l.from_bus)) - v(net.bus_index(l.to_bus))) *
                detail::series_admittance<Scalar>(l.resistance_pu, l.reactance_pu);
    loss += std::norm(i) * Scalar(l.resistance_pu);
  }
  for (std::size_t k = 0; k < net.transformers.size(); ++k) {
    const auto& tr = net.transformers[k];
    const Scalar a = detail::tap_of<Scalar>(net, state, k);
    const C i = (v(net.bus_index(tr.from_bus)) - v(net.bus_index(tr.to_bus)) / a) *
                detail::series_admittance<Scalar>(tr.resistance_pu, tr.reactance_pu);
    loss += std::norm(i) * Scalar(tr.resistance_pu);
  }
  return loss;
}

/// Newton-Raphson in polar coordinates from a flat start at the slack magnitude. Owns its Jacobian
/// scratch space, so one instance per thread.
template <typename Scalar = double>
class BasicPowerFlowSolver {
 public:
  using Solution = BasicPowerFlowSolution<Scalar>;

  explicit BasicPowerFlowSolver(PowerFlowOptions options = {}) : options_(options) {}

  const PowerFlowOptions& options() const { return options_; }

  Solution solve(const FeederNetwork& net, const NetworkState& state) {
    using C = std::complex<Scalar>;
    const auto n = static_cast<Eigen::Index>(net.num_buses());
    const auto slack = static_cast<Eigen::Index>(net.slack_index());
    if (state.p_inj.size() != n || state.q_inj.size() != n)
      throw std::invalid_argument("injection vectors must have one entry per bus");

    ybus_ = build_admittance<Scalar>(net, state);

    // Unknown ordering: angles then magnitudes of every non-slack bus.
    pq_.clear();
    for (Eigen::Index i = 0; i < n; ++i)
      if (i != slack) pq_.push_back(i);
    const auto m = static_cast<Eigen::Index>(pq_.size());

    Solution sol;
    // Flat start: every magnitude at the slack setpoint, every angle zero.
    sol.vm = RealVector<Scalar>::Constant(n, Scalar(net.buses[slack].v_set_pu));
    sol.va = RealVector<Scalar>::Zero(n);

    ComplexVector<Scalar> s_spec(n);
    for (Eigen::Index i = 0; i < n; ++i) s_spec(i) = C(Scalar(state.p_inj(i)), Scalar(state.q_inj(i)));

    RealVector<Scalar> mismatch(2 * m);
    auto evaluate = [&](const ComplexVector<Scalar>& v) {
      ibus_ = ybus_ * v;
      for (Eigen::Index k = 0; k < m; ++k) {
        const auto i = pq_[k];
        const C s = v(i) * std::conj(ibus_(i));
        mismatch(k) = s.real() - s_spec(i).real();
        mismatch(m + k) = s.imag() - s_spec(i).imag();
      }
      return m == 0 ? Scalar(0) : mismatch.cwiseAbs().maxCoeff();
    };

    ComplexVector<Scalar> v = sol.voltage();
    Scalar norm = evaluate(v);
    int iter = 0;
    jac_.resize(2 * m, 2 * m);
    while (!(norm <= Scalar(options_.tolerance))) {
      if (iter >= options_.max_iterations || !std::isfinite(static_cast<double>(norm)))
        throw PowerFlowDiverged(static_cast<double>(norm), iter);
      fill_jacobian(v);
      lu_.compute(jac_);
      const RealVector<Scalar> dx = lu_.solve(-mismatch);
      for (Eigen::Index k = 0; k < m; ++k) {
        sol.va(pq_[k]) += dx(k);
        sol.vm(pq_[k]) += dx(m + k);
      }
      v = sol.voltage();
      norm = evaluate(v);
      ++iter;
    }

    ibus_ = ybus_ * v;
    sol.slack_power = v(slack) * std::conj(ibus_(slack));
    sol.iterations = iter;
    sol.max_mismatch = norm;
    sol.losses_pu = series_losses(sol, net, state);
    return sol;
  }

 private:
  // dS/dθ = j diag(V) conj(diag(I) - Y diag(V)),  dS/d|V| = diag(V) conj(Y diag(V/|V|)) + conj(diag(I)) diag(V/|V|)
  void fill_jacobian(const ComplexVector<Scalar>& v) {
    using C = std::complex<Scalar>;
    const auto m = static_cast<Eigen::Index>(pq_.size());
    for (Eigen::Index r = 0; r < m; ++r) {
      const auto i = pq_[r];
      for (Eigen::Index c = 0; c < m; ++c) {
        const auto k = pq_[c];
        const C yik = ybus_(i, k);
        const C vk_unit = v(k) / std::abs(v(k));
        C ds_dva = C(0, 1) * v(i) * std::conj(-yik * v(k));
        C ds_dvm = v(i) * std::conj(yik * vk_unit);
        if (i == k) {
          ds_dva += C(0, 1) * v(i) * std::conj(ibus_(i));
          ds_dvm += std::conj(ibus_(i)) * vk_unit;
        }
        jac_(r, c) = ds_dva.real();
        jac_(r, m + c) = ds_dvm.real();
        jac_(m + r, c) = ds_dva.imag();
        jac_(m + r, m + c) = ds_dvm.imag();
      }
    }
  }

  PowerFlowOptions options_;
  ComplexMatrix<Scalar> ybus_;
  ComplexVector<Scalar> ibus_;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> jac_;
  Eigen::PartialPivLU<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> lu_;
  std::vector<Eigen::Index> pq_;
};

using PowerFlowSolver = BasicPowerFlowSolver<double>;

/// One-shot convenience wrapper around a temporary solver.
PowerFlowSolution solve(const FeederNetwork& net, const NetworkState& state, PowerFlowOptions options = {});

/// Non-slack buses outside the closed band [0.95, 1.05] pu.
ViolationCount count_violations(const PowerFlowSolution& sol, const FeederNetwork& net);

double total_losses(const PowerFlowSolution& sol, const FeederNetwork& net, const NetworkState& state);

/// Sum of injections (generation minus load, slack included) minus series losses.
double power_balance_residual(const PowerFlowSolution& sol, const FeederNetwork& net, const NetworkState& state);

}  // namespace vvo
