#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace vvo::vtrace {

template <typename Scalar>
using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Array2 = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Config {
  double gamma = 0.99;
  double rho_bar = 1.0;
  double c_bar = 1.0;
  double entropy_coef = 0.01;
  double value_coef = 0.5;

  void validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0, 1]");
    if (!(c_bar > 0.0)) throw std::invalid_argument("c_bar must be positive");
    if (!(rho_bar >= c_bar)) throw std::invalid_argument("rho_bar must be >= c_bar");
  }
};

template <typename Scalar>
struct Ratios {
  Array<Scalar> rho;
  Array<Scalar> c;
};

/// Clipped importance weights min(clip, pi/mu), formed in log space so large
/// log-ratio gaps never overflow.
template <typename DerivedA, typename DerivedB>
auto importance_ratios(const Eigen::ArrayBase<DerivedA>& log_pi, const Eigen::ArrayBase<DerivedB>& log_mu,
                       double rho_bar, double c_bar) {
  using Scalar = typename DerivedA::Scalar;
  const Array<Scalar> log_ratio = log_pi - log_mu;
  Ratios<Scalar> out;
  out.rho = log_ratio.min(Scalar(std::log(rho_bar))).exp();
  out.c = log_ratio.min(Scalar(std::log(c_bar))).exp();
  return out;
}

/// Per-timestep outputs of the correction for one trajectory row.
template <typename Scalar>
struct Targets {
  Array<Scalar> vs;             // v_s, length T
  Array<Scalar> pg_advantages;  // rho_t (r_t + gamma_t v_{t+1} - V(s_t))
  Array<Scalar> rho;
  Array<Scalar> c;
};

/// V-trace targets for one row by backward recursion
///   v_t = V(s_t) + delta_t + gamma_t c_t (v_{t+1} - V(s_{t+1})),   v_T = V(s_T)
/// with delta_t = rho_t (r_t + gamma_t V(s_{t+1}) - V(s_t)). `values` holds
/// T+1 entries (bootstrap last); `discounts` is gamma with 0 at episode ends.
template <typename Scalar>
Targets<Scalar> compute_vtrace(const Array<Scalar>& rewards, const Array<Scalar>& values,
                               const Array<Scalar>& discounts, const Ratios<Scalar>& ratios) {
  const auto t_len = rewards.size();
  if (values.size() != t_len + 1) throw std::invalid_argument("values must have T+1 entries");
  if (discounts.size() != t_len || ratios.rho.size() != t_len || ratios.c.size() != t_len)
    throw std::invalid_argument("rewards, discounts and ratios must have T entries");
  if (!rewards.allFinite() || !values.allFinite() || !discounts.allFinite() || !ratios.rho.allFinite() ||
      !ratios.c.allFinite())
    throw std::domain_error("non-finite input to v-trace");

  Targets<Scalar> out;
  out.rho = ratios.rho;
  out.c = ratios.c;
  out.vs.resize(t_len);
  out.pg_advantages.resize(t_len);

  Scalar acc = 0;  // v_{t+1} - V(s_{t+1})
  for (Eigen::Index t = t_len - 1; t >= 0; --t) {
    const Scalar delta = ratios.rho(t) * (rewards(t) + discounts(t) * values(t + 1) - values(t));
    acc = delta + discounts(t) * ratios.c(t) * acc;
    out.vs(t) = values(t) + acc;
  }
  for (Eigen::Index t = 0; t < t_len; ++t) {
    const Scalar next = t + 1 < t_len ? out.vs(t + 1) : values(t_len);
    out.pg_advantages(t) = ratios.rho(t) * (rewards(t) + discounts(t) * next - values(t));
  }
  return out;
}

template <typename Scalar>
Targets<Scalar> compute_vtrace(const Array<Scalar>& rewards, const Array<Scalar>& values,
                               const Array<Scalar>& discounts, const Array<Scalar>& log_pi,
                               const Array<Scalar>& log_mu, const Config& cfg) {
  return compute_vtrace<Scalar>(rewards, values, discounts, importance_ratios(log_pi, log_mu, cfg.rho_bar, cfg.c_bar));
}

/// Row-wise batch form: B x T rewards, B x (T+1) values.
template <typename Scalar>
struct BatchTargets {
  Array2<Scalar> vs;
  Array2<Scalar> pg_advantages;
  Array2<Scalar> rho;
};

template <typename Scalar>
BatchTargets<Scalar> compute_vtrace_batch(const Array2<Scalar>& rewards, const Array2<Scalar>& values,
                                          const Array2<Scalar>& discounts, const Array2<Scalar>& log_pi,
                                          const Array2<Scalar>& log_mu, const Config& cfg) {
  const auto b = rewards.rows();
  const auto t = rewards.cols();
  BatchTargets<Scalar> out{Array2<Scalar>(b, t), Array2<Scalar>(b, t), Array2<Scalar>(b, t)};
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto row = compute_vtrace<Scalar>(rewards.row(i).transpose(), values.row(i).transpose(),
                                            discounts.row(i).transpose(), log_pi.row(i).transpose(),
                                            log_mu.row(i).transpose(), cfg);
    out.vs.row(i) = row.vs.transpose();
    out.pg_advantages.row(i) = row.pg_advantages.transpose();
    out.rho.row(i) = row.rho.transpose();
  }
  return out;
}

template <typename Scalar>
struct LossTerms {
  Scalar policy = 0;
  Scalar value = 0;
  Scalar entropy = 0;  // mean entropy, enters the total with a minus sign
  Scalar total = 0;
};

/// Composite learner objective, mean-reduced over samples:
///   policy = -mean(pg_adv * log pi),  value = mean((v_s - V)^2),
///   total  = policy + value_coef * value - entropy_coef * entropy.
/// Targets are constants with respect to the parameters.
template <typename Scalar>
LossTerms<Scalar> losses(const Array<Scalar>& log_pi, const Array<Scalar>& values, const Array<Scalar>& entropy,
                         const Array<Scalar>& pg_advantages, const Array<Scalar>& vs, const Config& cfg) {
  const auto n = log_pi.size();
  if (n == 0 || values.size() != n || entropy.size() != n || pg_advantages.size() != n || vs.size() != n)
    throw std::invalid_argument("loss inputs must be non-empty and equally sized");
  LossTerms<Scalar> out;
  out.policy = -(pg_advantages * log_pi).mean();
  out.value = (vs - values).square().mean();
  out.entropy = entropy.mean();
  auto check = [](Scalar v, const char* name) {
    if (!std::isfinite(static_cast<double>(v))) throw std::domain_error(std::string("non-finite ") + name + " loss");
  };
  check(out.policy, "policy");
  check(out.value, "value");
  check(out.entropy, "entropy");
  out.total = out.policy + Scalar(cfg.value_coef) * out.value - Scalar(cfg.entropy_coef) * out.entropy;
  return out;
}

}  // namespace vvo::vtrace
