#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "vvo/env.hpp"
#include "vvo/vtrace.hpp"

namespace vvo {

/// Shape of the policy/value network: a tanh trunk of `hidden_layers` layers
/// of width `hidden`, linear Gaussian-mean, logit and value heads, and one
/// state-independent log-std per continuous action.
struct PolicyLayout {
  int obs_dim = 0;
  int hidden = 256;
  int n_continuous = 0;
  std::vector<int> cardinalities;

  static PolicyLayout for_space(const ActionSpace& s, int hidden = 256) {
    return {s.obs_dim, hidden, s.n_continuous, s.discrete_cardinalities};
  }

  int n_logits() const {
    int k = 0;
    for (int c : cardinalities) k += c;
    return k;
  }

  // Flat parameter offsets, in storage order.
  Eigen::Index w1() const { return 0; }
  Eigen::Index b1() const { return w1() + Eigen::Index(hidden) * obs_dim; }
  Eigen::Index w2() const { return b1() + hidden; }
  Eigen::Index b2() const { return w2() + Eigen::Index(hidden) * hidden; }
  Eigen::Index w_mu() const { return b2() + hidden; }
  Eigen::Index b_mu() const { return w_mu() + Eigen::Index(n_continuous) * hidden; }
  Eigen::Index w_logit() const { return b_mu() + n_continuous; }
  Eigen::Index b_logit() const { return w_logit() + Eigen::Index(n_logits()) * hidden; }
  Eigen::Index w_v() const { return b_logit() + n_logits(); }
  Eigen::Index b_v() const { return w_v() + hidden; }
  Eigen::Index log_std() const { return b_v() + 1; }
  Eigen::Index size() const { return log_std() + n_continuous; }

  bool operator==(const PolicyLayout&) const = default;
};

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kSquashEps = 1e-6;
// Squashed actions are pulled this far inside (-1, 1) before inversion.
inline constexpr double kActionBoundGuard = 1e-9;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Versioned flat weights. Only the learner mutates these; actors hold
/// read-only copies.
template <typename Scalar>
struct BasicPolicyParameters {
  PolicyLayout layout;
  Vector<Scalar> flat;
  std::uint64_t version = 0;

  static BasicPolicyParameters zeros(const PolicyLayout& layout) {
    return {layout, Vector<Scalar>::Zero(layout.size()), 0};
  }

  /// Scaled-uniform trunk init, small policy heads, zero biases and log-std.
  static BasicPolicyParameters initialize(const PolicyLayout& layout, std::uint64_t seed) {
    auto p = zeros(layout);
    std::mt19937_64 rng(seed);
    auto fill = [&](Eigen::Index offset, Eigen::Index count, int fan_in, int fan_out, double gain) {
      const double bound = gain * std::sqrt(6.0 / (fan_in + fan_out));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (Eigen::Index i = 0; i < count; ++i) p.flat(offset + i) = Scalar(u(rng));
    };
    const int h = layout.hidden;
    fill(layout.w1(), Eigen::Index(h) * layout.obs_dim, layout.obs_dim, h, 1.0);
    fill(layout.w2(), Eigen::Index(h) * h, h, h, 1.0);
    fill(layout.w_mu(), Eigen::Index(layout.n_continuous) * h, h, layout.n_continuous, 0.01);
    fill(layout.w_logit(), Eigen::Index(layout.n_logits()) * h, h, layout.n_logits(), 0.01);
    fill(layout.w_v(), h, h, 1, 1.0);
    return p;
  }

  bool all_finite() const { return flat.allFinite(); }

  using ConstMap = Eigen::Map<const Matrix<Scalar>>;
  using ConstVecMap = Eigen::Map<const Vector<Scalar>>;
  ConstMap w1() const { return {flat.data() + layout.w1(), layout.hidden, layout.obs_dim}; }
  ConstVecMap b1() const { return {flat.data() + layout.b1(), layout.hidden}; }
  ConstMap w2() const { return {flat.data() + layout.w2(), layout.hidden, layout.hidden}; }
  ConstVecMap b2() const { return {flat.data() + layout.b2(), layout.hidden}; }
  ConstMap w_mu() const { return {flat.data() + layout.w_mu(), layout.n_continuous, layout.hidden}; }
  ConstVecMap b_mu() const { return {flat.data() + layout.b_mu(), layout.n_continuous}; }
  ConstMap w_logit() const { return {flat.data() + layout.w_logit(), layout.n_logits(), layout.hidden}; }
  ConstVecMap b_logit() const { return {flat.data() + layout.b_logit(), layout.n_logits()}; }
  ConstMap w_v() const { return {flat.data() + layout.w_v(), 1, layout.hidden}; }
  Scalar b_v() const { return flat(layout.b_v()); }
  ConstVecMap raw_log_std() const { return {flat.data() + layout.log_std(), layout.n_continuous}; }

  Vector<Scalar> log_std() const {
    return raw_log_std().cwiseMax(Scalar(kLogStdMin)).cwiseMin(Scalar(kLogStdMax));
  }
};

using PolicyParameters = BasicPolicyParameters<double>;

/// Action distribution for a single observation.
template <typename Scalar>
struct BasicActionDistribution {
  Vector<Scalar> mean;     // pre-squash Gaussian means
  Vector<Scalar> log_std;  // clamped
  Vector<Scalar> logits;   // all discrete heads, concatenated
  std::vector<int> cardinalities;

  Eigen::Index head_offset(std::size_t k) const {
    Eigen::Index o = 0;
    for (std::size_t i = 0; i < k; ++i) o += cardinalities[i];
    return o;
  }
};

using ActionDistribution = BasicActionDistribution<double>;

namespace detail {

template <typename Scalar>
Scalar log_sum_exp(const Eigen::Ref<const Vector<Scalar>>& z) {
  const Scalar m = z.maxCoeff();
  return m + std::log((z.array() - m).exp().sum());
}

template <typename Scalar>
Scalar guarded_action(Scalar a) {
  const Scalar bound = Scalar(1) - Scalar(kActionBoundGuard);
  return std::clamp(a, -bound, bound);
}

template <typename Scalar>
Scalar squash_correction(Scalar a) {
  return std::log((Scalar(1) - a) * (Scalar(1) + a) + Scalar(kSquashEps));
}

template <typename Scalar>
Scalar half_log_two_pi() {
  return Scalar(0.5) * std::log(Scalar(2) * std::numbers::pi_v<Scalar>);
}

}  // namespace detail

/// Activations kept for the backward pass; columns are samples.
template <typename Scalar>
struct ForwardCache {
  Matrix<Scalar> obs;
  Matrix<Scalar> h1;
  Matrix<Scalar> h2;
  Matrix<Scalar> mean;
  Matrix<Scalar> logits;
  Vector<Scalar> value;
  Vector<Scalar> log_std;
};

/// Batched forward pass over observation columns.
template <typename Scalar>
ForwardCache<Scalar> forward_batch(const BasicPolicyParameters<Scalar>& p, const Matrix<Scalar>& obs) {
  if (obs.rows() != p.layout.obs_dim)
    throw std::invalid_argument("observation length " + std::to_string(obs.rows()) + " does not match policy input " +
                                std::to_string(p.layout.obs_dim));
  ForwardCache<Scalar> c;
  c.obs = obs;
  c.h1 = ((p.w1() * obs).colwise() + p.b1()).array().tanh().matrix();
  c.h2 = ((p.w2() * c.h1).colwise() + p.b2()).array().tanh().matrix();
  c.mean = (p.w_mu() * c.h2).colwise() + p.b_mu();
  c.logits = (p.w_logit() * c.h2).colwise() + p.b_logit();
  c.value = ((p.w_v() * c.h2).array() + p.b_v()).matrix().transpose();
  c.log_std = p.log_std();
  return c;
}

template <typename Scalar>
BasicActionDistribution<Scalar> distribution_at(const ForwardCache<Scalar>& c, const PolicyLayout& layout,
                                                Eigen::Index col) {
  return {c.mean.col(col), c.log_std, c.logits.col(col), layout.cardinalities};
}

template <typename Scalar>
struct ForwardResult {
  BasicActionDistribution<Scalar> dist;
  Scalar value;
};

template <typename Scalar>
ForwardResult<Scalar> forward(const BasicPolicyParameters<Scalar>& p, const Vector<Scalar>& obs) {
  const auto c = forward_batch<Scalar>(p, obs);
  return {distribution_at(c, p.layout, 0), c.value(0)};
}

/// Joint log-density of a (squashed continuous, discrete) action, including
/// the tanh change-of-variables term.
template <typename Scalar>
Scalar log_prob(const BasicActionDistribution<Scalar>& d, const ActionVector& a) {
  if (a.continuous.size() != d.mean.size() || a.discrete.size() != d.cardinalities.size())
    throw std::invalid_argument("action shape does not match distribution");
  Scalar lp = 0;
  for (Eigen::Index j = 0; j < d.mean.size(); ++j) {
    const Scalar x = detail::guarded_action(Scalar(a.continuous(j)));
    const Scalar z = (std::atanh(x) - d.mean(j)) * std::exp(-d.log_std(j));
    lp += Scalar(-0.5) * z * z - d.log_std(j) - detail::half_log_two_pi<Scalar>() - detail::squash_correction(x);
  }
  for (std::size_t k = 0; k < d.cardinalities.size(); ++k) {
    const int idx = a.discrete[k];
    if (idx < 0 || idx >= d.cardinalities[k]) throw std::out_of_range("discrete action index out of range");
    const auto z = d.logits.segment(d.head_offset(k), d.cardinalities[k]);
    lp += z(idx) - detail::log_sum_exp<Scalar>(z);
  }
  return lp;
}

/// Sum of categorical entropies and pre-squash Gaussian entropies.
template <typename Scalar>
Scalar entropy(const BasicActionDistribution<Scalar>& d) {
  Scalar h = 0;
  for (Eigen::Index j = 0; j < d.log_std.size(); ++j) h += Scalar(0.5) + detail::half_log_two_pi<Scalar>() + d.log_std(j);
  for (std::size_t k = 0; k < d.cardinalities.size(); ++k) {
    const Vector<Scalar> z = d.logits.segment(d.head_offset(k), d.cardinalities[k]);
    const Vector<Scalar> logp = z.array() - detail::log_sum_exp<Scalar>(z);
    h -= (logp.array().exp() * logp.array()).sum();
  }
  return h;
}

/// Per-head categorical probabilities.
template <typename Scalar>
Vector<Scalar> head_probabilities(const BasicActionDistribution<Scalar>& d, std::size_t k) {
  const Vector<Scalar> z = d.logits.segment(d.head_offset(k), d.cardinalities[k]);
  return (z.array() - detail::log_sum_exp<Scalar>(z)).exp().matrix();
}

struct SampledAction {
  ActionVector action;
  double log_prob = 0.0;
};

/// Stochastic action: tanh-squashed Gaussians and independent categoricals.
template <typename Scalar>
SampledAction sample(const BasicActionDistribution<Scalar>& d, std::mt19937_64& rng) {
  SampledAction s;
  std::normal_distribution<double> gauss(0.0, 1.0);
  s.action.continuous.resize(d.mean.size());
  for (Eigen::Index j = 0; j < d.mean.size(); ++j) {
    const double u = static_cast<double>(d.mean(j)) + std::exp(static_cast<double>(d.log_std(j))) * gauss(rng);
    s.action.continuous(j) = std::tanh(u);
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t k = 0; k < d.cardinalities.size(); ++k) {
    const Vector<Scalar> p = head_probabilities(d, k);
    const double r = unif(rng);
    double cum = 0.0;
    int choice = d.cardinalities[k] - 1;
    for (int i = 0; i < d.cardinalities[k]; ++i) {
      cum += static_cast<double>(p(i));
      if (r < cum) {
        choice = i;
        break;
      }
    }
    s.action.discrete.push_back(choice);
  }
  s.log_prob = static_cast<double>(log_prob(d, s.action));
  return s;
}

/// Deterministic action: squashed means and per-head argmax.
template <typename Scalar>
ActionVector mode(const BasicActionDistribution<Scalar>& d) {
  ActionVector a;
  a.continuous.resize(d.mean.size());
  for (Eigen::Index j = 0; j < d.mean.size(); ++j) a.continuous(j) = std::tanh(static_cast<double>(d.mean(j)));
  for (std::size_t k = 0; k < d.cardinalities.size(); ++k) {
    Eigen::Index best = 0;
    d.logits.segment(d.head_offset(k), d.cardinalities[k]).maxCoeff(&best);
    a.discrete.push_back(static_cast<int>(best));
  }
  return a;
}

/// Learner inputs for one gradient step; the advantage and value targets are
/// treated as constants.
template <typename Scalar>
struct LossBatch {
  Matrix<Scalar> obs;  // obs_dim x N
  std::vector<ActionVector> actions;
  vtrace::Array<Scalar> pg_advantages;
  vtrace::Array<Scalar> vs;
};

template <typename Scalar>
struct LossEvaluation {
  vtrace::LossTerms<Scalar> terms;
  vtrace::Array<Scalar> log_pi;
  vtrace::Array<Scalar> values;
};

/// Forward pass plus the composite loss.
template <typename Scalar>
LossEvaluation<Scalar> evaluate_loss(const BasicPolicyParameters<Scalar>& p, const LossBatch<Scalar>& batch,
                                     const vtrace::Config& cfg) {
  const auto c = forward_batch(p, batch.obs);
  const auto n = batch.obs.cols();
  LossEvaluation<Scalar> out;
  out.log_pi.resize(n);
  vtrace::Array<Scalar> ent(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto d = distribution_at(c, p.layout, i);
    out.log_pi(i) = log_prob(d, batch.actions[i]);
    ent(i) = entropy(d);
  }
  out.values = c.value.array();
  out.terms = vtrace::losses<Scalar>(out.log_pi, out.values, ent, batch.pg_advantages, batch.vs, cfg);
  return out;
}

template <typename Scalar>
struct Gradient {
  Vector<Scalar> flat;
  vtrace::LossTerms<Scalar> terms;
};

/// Exact reverse-mode gradient of `evaluate_loss` with respect to every
/// parameter. Throws std::domain_error naming a non-finite loss term.
template <typename Scalar>
Gradient<Scalar> backward(const BasicPolicyParameters<Scalar>& p, const LossBatch<Scalar>& batch,
                          const vtrace::Config& cfg) {
  const auto& L = p.layout;
  const auto c = forward_batch(p, batch.obs);
  const auto n = batch.obs.cols();
  const Scalar inv_n = Scalar(1) / Scalar(n);
  const Scalar ent_coef = Scalar(cfg.entropy_coef);

  Matrix<Scalar> d_mean(L.n_continuous, n);
  Matrix<Scalar> d_logits(L.n_logits(), n);
  Vector<Scalar> d_value(n);
  Vector<Scalar> d_log_std = Vector<Scalar>::Zero(L.n_continuous);

  vtrace::Array<Scalar> log_pi(n), ent(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto d = distribution_at(c, L, i);
    const auto& a = batch.actions[i];
    log_pi(i) = log_prob(d, a);
    ent(i) = entropy(d);

    const Scalar g_lp = -batch.pg_advantages(i) * inv_n;  // dL/dlog pi
    const Scalar g_ent = -ent_coef * inv_n;                // dL/dH
    for (Eigen::Index j = 0; j < L.n_continuous; ++j) {
      const Scalar x = detail::guarded_action(Scalar(a.continuous(j)));
      const Scalar inv_sigma = std::exp(-d.log_std(j));
      const Scalar z = (std::atanh(x) - d.mean(j)) * inv_sigma;
      d_mean(j, i) = g_lp * z * inv_sigma;
      d_log_std(j) += g_lp * (z * z - Scalar(1)) + g_ent;
    }
    for (std::size_t k = 0; k < L.cardinalities.size(); ++k) {
      const auto off = d.head_offset(k);
      const int card = L.cardinalities[k];
      const Vector<Scalar> z = d.logits.segment(off, card);
      const Vector<Scalar> logp = z.array() - detail::log_sum_exp<Scalar>(z);
      const Vector<Scalar> prob = logp.array().exp();
      const Scalar h = -(prob.array() * logp.array()).sum();
      Vector<Scalar> g = -g_lp * prob;
      g(a.discrete[k]) += g_lp;
      g.array() += g_ent * (-prob.array() * (logp.array() + h));
      d_logits.col(i).segment(off, card) = g;
    }
    d_value(i) = Scalar(-2) * Scalar(cfg.value_coef) * (batch.vs(i) - c.value(i)) * inv_n;
  }

  Gradient<Scalar> out;
  out.terms = vtrace::losses<Scalar>(log_pi, c.value.array(), ent, batch.pg_advantages, batch.vs, cfg);
  out.flat = Vector<Scalar>::Zero(L.size());
  auto& g = out.flat;
  const int h = L.hidden;
  auto mat = [&](Eigen::Index off, Eigen::Index rows, Eigen::Index cols) {
    return Eigen::Map<Matrix<Scalar>>(g.data() + off, rows, cols);
  };
  auto vec = [&](Eigen::Index off, Eigen::Index rows) { return Eigen::Map<Vector<Scalar>>(g.data() + off, rows); };

  mat(L.w_mu(), L.n_continuous, h).noalias() = d_mean * c.h2.transpose();
  vec(L.b_mu(), L.n_continuous) = d_mean.rowwise().sum();
  mat(L.w_logit(), L.n_logits(), h).noalias() = d_logits * c.h2.transpose();
  vec(L.b_logit(), L.n_logits()) = d_logits.rowwise().sum();
  mat(L.w_v(), 1, h).noalias() = d_value.transpose() * c.h2.transpose();
  g(L.b_v()) = d_value.sum();

  Matrix<Scalar> d_h2 = p.w_mu().transpose() * d_mean;
  d_h2.noalias() += p.w_logit().transpose() * d_logits;
  d_h2.noalias() += p.w_v().transpose() * d_value.transpose();
  const Matrix<Scalar> d_pre2 = d_h2.array() * (Scalar(1) - c.h2.array().square());
  mat(L.w2(), h, h).noalias() = d_pre2 * c.h1.transpose();
  vec(L.b2(), h) = d_pre2.rowwise().sum();

  const Matrix<Scalar> d_h1 = p.w2().transpose() * d_pre2;
  const Matrix<Scalar> d_pre1 = d_h1.array() * (Scalar(1) - c.h1.array().square());
  mat(L.w1(), h, L.obs_dim).noalias() = d_pre1 * c.obs.transpose();
  vec(L.b1(), h) = d_pre1.rowwise().sum();

  // The clamp passes gradient only strictly inside its range.
  const auto raw = p.raw_log_std();
  for (Eigen::Index j = 0; j < L.n_continuous; ++j) {
    const bool inside = raw(j) > Scalar(kLogStdMin) && raw(j) < Scalar(kLogStdMax);
    g(L.log_std() + j) = inside ? d_log_std(j) : Scalar(0);
  }
  if (!g.allFinite()) throw std::domain_error("non-finite gradient");
  return out;
}

}  // namespace vvo
