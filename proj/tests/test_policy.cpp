#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "vvo/checkpoint.hpp"
#include "vvo/optimizer.hpp"
#include "vvo/policy.hpp"

using namespace vvo;

namespace {

ActionDistribution single(double mean, double log_std, std::vector<double> logits = {}, std::vector<int> cards = {}) {
  ActionDistribution d;
  d.mean = Eigen::VectorXd::Constant(1, mean);
  d.log_std = Eigen::VectorXd::Constant(1, log_std);
  d.logits = Eigen::Map<Eigen::VectorXd>(logits.data(), static_cast<Eigen::Index>(logits.size()));
  d.cardinalities = std::move(cards);
  return d;
}

ActionVector continuous_only(double x) {
  ActionVector a;
  a.continuous = Eigen::VectorXd::Constant(1, x);
  return a;
}

template <typename Scalar>
LossBatch<Scalar> random_batch(const PolicyLayout& layout, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(-0.95, 0.95);
  LossBatch<Scalar> b;
  b.obs = Matrix<Scalar>(layout.obs_dim, n);
  for (Eigen::Index i = 0; i < b.obs.size(); ++i) b.obs(i) = Scalar(g(rng));
  b.pg_advantages.resize(n);
  b.vs.resize(n);
  for (int i = 0; i < n; ++i) {
    ActionVector a;
    a.continuous.resize(layout.n_continuous);
    for (int j = 0; j < layout.n_continuous; ++j) a.continuous(j) = u(rng);
    for (int c : layout.cardinalities) a.discrete.push_back(std::uniform_int_distribution<int>(0, c - 1)(rng));
    b.actions.push_back(a);
    b.pg_advantages(i) = Scalar(g(rng));
    b.vs(i) = Scalar(g(rng));
  }
  return b;
}

template <typename Scalar>
BasicPolicyParameters<Scalar> random_params(const PolicyLayout& layout, std::uint64_t seed, double scale) {
  auto p = BasicPolicyParameters<Scalar>::zeros(layout);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  for (Eigen::Index i = 0; i < p.flat.size(); ++i) p.flat(i) = Scalar(g(rng));
  for (int j = 0; j < layout.n_continuous; ++j) p.flat(layout.log_std() + j) = Scalar(0.3 * g(rng) / scale);
  return p;
}

/// Max relative error of the analytic gradient against central differences
/// of the loss, over `coords` (all when empty).
template <typename Scalar>
double max_fd_error(BasicPolicyParameters<Scalar> p, const LossBatch<Scalar>& batch, const vtrace::Config& cfg,
                    std::vector<Eigen::Index> coords, long& checked) {
  const auto grad = backward(p, batch, cfg);
  if (coords.empty())
    for (Eigen::Index i = 0; i < p.flat.size(); ++i) coords.push_back(i);
  const Scalar h = Scalar(1e-5);
  double worst = 0.0;
  for (auto i : coords) {
    const Scalar keep = p.flat(i);
    p.flat(i) = keep + h;
    const Scalar up = evaluate_loss(p, batch, cfg).terms.total;
    p.flat(i) = keep - h;
    const Scalar down = evaluate_loss(p, batch, cfg).terms.total;
    p.flat(i) = keep;
    const double fd = static_cast<double>((up - down) / (Scalar(2) * h));
    const double an = static_cast<double>(grad.flat(i));
    const double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
    worst = std::max(worst, std::abs(fd - an) / denom);
    ++checked;
  }
  return worst;
}

}  // namespace

TEST_CASE("layout sizes") {
  const PolicyLayout l{24, 256, 9, {2, 2, 33}};
  CHECK(l.n_logits() == 37);
  CHECK(l.size() == 256 * 24 + 256 + 256 * 256 + 256 + 9 * 256 + 9 + 37 * 256 + 37 + 256 + 1 + 9);
}

TEST_CASE("zero weights give centered means, uniform logits and zero value") {
  const PolicyLayout l{5, 8, 3, {2, 33}};
  const auto p = PolicyParameters::zeros(l);
  Eigen::VectorXd obs(5);
  obs << 1, -2, 3, 0.5, 9;
  const auto f = forward(p, obs);
  CHECK(f.value == 0.0);
  CHECK(f.dist.mean.isZero());
  CHECK(f.dist.logits.isZero());
  CHECK(f.dist.log_std.isZero());
  CHECK(head_probabilities(f.dist, 1).isApproxToConstant(1.0 / 33.0));
}

TEST_CASE("forward is deterministic and checks shapes") {
  const PolicyLayout l{6, 16, 2, {2, 5}};
  const auto p = PolicyParameters::initialize(l, 3);
  const Eigen::VectorXd obs = Eigen::VectorXd::LinSpaced(6, -1.0, 1.0);
  const auto a = forward(p, obs);
  const auto b = forward(p, obs);
  CHECK(a.value == b.value);
  CHECK(a.dist.mean == b.dist.mean);
  CHECK(a.dist.logits == b.dist.logits);
  CHECK_THROWS_AS(forward(p, Eigen::VectorXd(5)), std::invalid_argument);
}

TEST_CASE("initialization starts with unit standard deviation") {
  const PolicyLayout l{6, 16, 2, {2, 5}};
  const auto p = PolicyParameters::initialize(l, 3);
  CHECK(p.log_std().isZero());
  CHECK(p.all_finite());
  CHECK(PolicyParameters::initialize(l, 3).flat == p.flat);
  CHECK(PolicyParameters::initialize(l, 4).flat != p.flat);
}

TEST_CASE("uniform two-way head has log-probability ln(1/2)") {
  const auto d = single(0.0, 0.0, {0.7, 0.7}, {2});
  ActionVector a = continuous_only(0.0);
  a.discrete = {1};
  const double gauss_at_mean = -0.5 * std::log(2.0 * std::numbers::pi);
  const double correction = -std::log(1.0 + kSquashEps);
  CHECK(log_prob(d, a) == doctest::Approx(std::log(0.5) + gauss_at_mean + correction).epsilon(1e-14));
}

TEST_CASE("softmax favoring one tap by ln 2 gives 2/34") {
  std::vector<double> logits(33, 0.0);
  logits[5] = std::log(2.0);
  ActionDistribution d;
  d.mean.resize(0);
  d.log_std.resize(0);
  d.logits = Eigen::Map<Eigen::VectorXd>(logits.data(), 33);
  d.cardinalities = {33};
  const auto p = head_probabilities(d, 0);
  CHECK(p(5) == doctest::Approx(2.0 / 34.0).epsilon(1e-14));
  CHECK(p(0) == doctest::Approx(1.0 / 34.0).epsilon(1e-14));
  CHECK(std::abs(p.sum() - 1.0) < 1e-12);
  ActionVector a;
  a.continuous.resize(0);
  a.discrete = {5};
  CHECK(std::exp(log_prob(d, a)) == doctest::Approx(2.0 / 34.0).epsilon(1e-14));
}

namespace {

/// Simpson quadrature of exp(log_prob) over (-1, 1) after substituting x = tanh(u).
double squashed_mass(const ActionDistribution& d) {
  const int n = 200000;
  const double lo = -14.0, hi = 14.0, step = (hi - lo) / n;
  double sum = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = std::tanh(lo + i * step);
    if (std::abs(x) >= 1.0 - kActionBoundGuard) continue;
    const double f = std::exp(log_prob(d, continuous_only(x))) * (1.0 - x * x);
    sum += f * (i == 0 || i == n ? 1.0 : (i % 2 ? 4.0 : 2.0));
  }
  return sum * step / 3.0;
}

}  // namespace

TEST_CASE("squashed density integrates to one") {
  for (auto [mean, log_std] : {std::pair{0.0, 0.0}, {0.8, -0.5}, {-0.5, 0.2}, {0.2, -2.0}})
    CHECK(squashed_mass(single(mean, log_std)) == doctest::Approx(1.0).epsilon(1e-4));
  // The correction's epsilon only ever removes mass, visibly so for heavy tails near the bounds.
  const double heavy = squashed_mass(single(-1.5, 0.4));
  CHECK(heavy < 1.0);
  CHECK(heavy > 0.999);
}

TEST_CASE("log-probability is finite at the action bounds") {
  const auto d = single(0.3, 0.0);
  CHECK(std::isfinite(log_prob(d, continuous_only(1.0))));
  CHECK(std::isfinite(log_prob(d, continuous_only(-1.0))));
}

TEST_CASE("entropy closed forms") {
  const auto two = single(0.0, 0.0, {1.0, 1.0}, {2});
  const double gauss = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
  CHECK(entropy(two) == doctest::Approx(gauss + std::log(2.0)).epsilon(1e-14));

  const auto wide = single(0.0, 0.7);
  CHECK(entropy(wide) == doctest::Approx(0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * std::exp(1.4))));

  // d entropy / d log_std = 1 per Gaussian head.
  const double h = 1e-6;
  CHECK((entropy(single(0.0, 0.2 + h)) - entropy(single(0.0, 0.2 - h))) / (2 * h) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("sampling is bounded and self-consistent") {
  const PolicyLayout l{4, 8, 3, {2, 33}};
  const auto p = PolicyParameters::initialize(l, 9);
  std::mt19937_64 rng(1);
  const Eigen::VectorXd obs = Eigen::VectorXd::Ones(4);
  const auto f = forward(p, obs);
  for (int i = 0; i < 2000; ++i) {
    const auto s = sample(f.dist, rng);
    CHECK(s.action.continuous.cwiseAbs().maxCoeff() <= 1.0);
    CHECK(s.log_prob == log_prob(f.dist, s.action));
    CHECK(std::isfinite(std::exp(s.log_prob)));
    CHECK(std::exp(s.log_prob) > 0.0);
    CHECK(std::exp(log_prob(f.dist, s.action) - s.log_prob) == 1.0);
  }
  for (std::size_t k = 0; k < l.cardinalities.size(); ++k) CHECK(std::abs(head_probabilities(f.dist, k).sum() - 1.0) < 1e-12);
}

TEST_CASE("wide log-std still samples inside the bounds") {
  const auto d = single(3.0, 2.0, {}, {});
  std::mt19937_64 rng(2);
  for (int i = 0; i < 5000; ++i) {
    const auto s = sample(d, rng);
    CHECK(std::abs(s.action.continuous(0)) <= 1.0);
    CHECK(std::isfinite(s.log_prob));
  }
}

TEST_CASE("empirical categorical frequencies follow the probabilities") {
  std::vector<double> logits = {0.0, std::log(3.0)};
  ActionDistribution d;
  d.mean.resize(0);
  d.log_std.resize(0);
  d.logits = Eigen::Map<Eigen::VectorXd>(logits.data(), 2);
  d.cardinalities = {2};
  std::mt19937_64 rng(8);
  int ones = 0;
  const int n = 40000;
  for (int i = 0; i < n; ++i) ones += sample(d, rng).action.discrete[0];
  CHECK(static_cast<double>(ones) / n == doctest::Approx(0.75).epsilon(0.02));
}

TEST_CASE("log-std is clamped") {
  const PolicyLayout l{2, 4, 2, {}};
  auto p = PolicyParameters::zeros(l);
  p.flat(l.log_std()) = -9.0;
  p.flat(l.log_std() + 1) = 7.0;
  CHECK(p.log_std()(0) == kLogStdMin);
  CHECK(p.log_std()(1) == kLogStdMax);
}

TEST_CASE("mode takes squashed means and argmax heads") {
  std::vector<double> logits = {0.1, 0.9, -1.0, 2.0, 0.0};
  auto d = single(0.4, 0.0, logits, {2, 3});
  const auto a = mode(d);
  CHECK(a.continuous(0) == doctest::Approx(std::tanh(0.4)));
  CHECK(a.discrete == std::vector<int>{1, 1});
}

TEST_CASE("out-of-range discrete index is rejected") {
  auto d = single(0.0, 0.0, {0.0, 0.0}, {2});
  ActionVector a = continuous_only(0.0);
  a.discrete = {2};
  CHECK_THROWS_AS(log_prob(d, a), std::out_of_range);
}

TEST_CASE("zero advantages leave no policy-gradient contribution") {
  const PolicyLayout l{5, 6, 2, {2, 4}};
  const auto p = random_params<double>(l, 1, 0.5);
  auto b = random_batch<double>(l, 8, 2);
  b.pg_advantages.setZero();
  vtrace::Config cfg;
  cfg.entropy_coef = 0.0;
  cfg.value_coef = 0.0;
  CHECK(backward(p, b, cfg).flat.isZero());
}

TEST_CASE("value targets equal to the prediction give a zero value gradient") {
  const PolicyLayout l{5, 6, 2, {2, 4}};
  const auto p = random_params<double>(l, 1, 0.5);
  auto b = random_batch<double>(l, 8, 2);
  b.pg_advantages.setZero();
  b.vs = forward_batch(p, b.obs).value.array();
  vtrace::Config cfg;
  cfg.entropy_coef = 0.0;
  const auto g = backward(p, b, cfg);
  CHECK(g.terms.value == doctest::Approx(0.0));
  CHECK(g.flat.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("analytic gradient matches central differences on a width-4 network") {
  const PolicyLayout l{5, 4, 3, {2, 3}};
  const auto p = random_params<long double>(l, 11, 0.7);
  const auto b = random_batch<long double>(l, 6, 12);
  long checked = 0;
  const double err = max_fd_error(p, b, vtrace::Config{}, {}, checked);
  CHECK(checked == l.size());
  CHECK(err < 1e-4);
}

TEST_CASE("analytic gradient matches central differences over 1000+ coordinates") {
  const PolicyLayout l{24, 16, 9, {2, 2, 33}};
  const auto p = random_params<long double>(l, 21, 0.4);
  const auto b = random_batch<long double>(l, 10, 22);
  vtrace::Config cfg;
  cfg.entropy_coef = 0.05;
  long checked = 0;
  const double err = max_fd_error(p, b, cfg, {}, checked);
  CHECK(checked >= 1000);
  CHECK(err < 1e-4);
}

TEST_CASE("double-precision gradient agrees with extended precision") {
  const PolicyLayout l{24, 16, 9, {2, 2, 33}};
  const auto pl = random_params<long double>(l, 21, 0.4);
  const auto bl = random_batch<long double>(l, 10, 22);
  const auto pd = random_params<double>(l, 21, 0.4);
  const auto bd = random_batch<double>(l, 10, 22);
  const auto gl = backward(pl, bl, vtrace::Config{});
  const auto gd = backward(pd, bd, vtrace::Config{});
  CHECK((gl.flat.template cast<double>() - gd.flat).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("clamped log-std receives no gradient") {
  const PolicyLayout l{3, 4, 2, {2}};
  auto p = random_params<double>(l, 5, 0.5);
  p.flat(l.log_std()) = -8.0;
  p.flat(l.log_std() + 1) = 0.1;
  const auto b = random_batch<double>(l, 5, 6);
  const auto g = backward(p, b, vtrace::Config{});
  CHECK(g.flat(l.log_std()) == 0.0);
  CHECK(g.flat(l.log_std() + 1) != 0.0);
}

TEST_CASE("non-finite loss names the offending term") {
  const PolicyLayout l{3, 4, 1, {2}};
  const auto p = random_params<double>(l, 5, 0.5);
  auto b = random_batch<double>(l, 4, 6);
  b.vs(0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_WITH_AS(backward(p, b, vtrace::Config{}), doctest::Contains("value"), std::domain_error);
  b = random_batch<double>(l, 4, 6);
  b.pg_advantages(1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(backward(p, b, vtrace::Config{}), doctest::Contains("policy"), std::domain_error);
}

TEST_CASE("adam step moves against the gradient and clipping bounds the norm") {
  const PolicyLayout l{3, 4, 1, {2}};
  auto p = PolicyParameters::initialize(l, 1);
  const auto before = p.flat;
  Eigen::VectorXd g = Eigen::VectorXd::Constant(l.size(), 100.0);
  const double norm = clip_by_global_norm(g, 40.0);
  CHECK(norm == doctest::Approx(100.0 * std::sqrt(static_cast<double>(l.size()))));
  CHECK(g.norm() == doctest::Approx(40.0));
  Eigen::VectorXd small = Eigen::VectorXd::Constant(l.size(), 1e-3);
  const Eigen::VectorXd kept = small;
  clip_by_global_norm(small, 40.0);
  CHECK(small == kept);

  Adam adam(AdamConfig{});
  adam.step(p.flat, g);
  // First Adam step has magnitude lr on every coordinate.
  CHECK(((before - p.flat).array() - 5e-4).abs().maxCoeff() < 1e-9);
  CHECK(adam.steps() == 1);
}

TEST_CASE("checkpoints round-trip and refuse mismatched scenarios") {
  ActionSpace space;
  space.n_pv = 1;
  space.n_batt = 1;
  space.n_continuous = 3;
  space.discrete_cardinalities = {2, 33};
  space.n_caps = 1;
  space.n_taps = 1;
  space.obs_dim = 7;
  auto p = PolicyParameters::initialize(PolicyLayout::for_space(space, 8), 4);
  p.version = 17;
  const auto path = std::filesystem::temp_directory_path() / "vvo_ckpt.json";
  save_checkpoint(path, p, space);
  const auto back = load_checkpoint(path, space);
  CHECK(back.flat == p.flat);
  CHECK(back.version == 17);
  CHECK(back.layout == p.layout);

  auto other = space;
  other.discrete_cardinalities = {2, 2, 33};
  other.n_caps = 2;
  CHECK_THROWS_AS(load_checkpoint(path, other), CheckpointMismatch);
  std::filesystem::remove(path);
}
