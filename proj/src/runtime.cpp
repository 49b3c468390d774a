#include "vvo/runtime.hpp"

#include <chrono>
#include <deque>
#include <exception>
#include <iostream>
#include <numeric>
#include <thread>

namespace vvo {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined words
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void RuntimeConfig::validate() const {
  if (num_actors < 1) throw std::invalid_argument("num_actors must be at least 1");
  if (learner_queue_capacity < 1) throw std::invalid_argument("learner queue capacity must be at least 1");
  if (rollout_fragment_length < 1) throw std::invalid_argument("rollout fragment length must be positive");
  if (train_batch_size < rollout_fragment_length || train_batch_size % rollout_fragment_length != 0)
    throw std::invalid_argument("train batch size must be a multiple of the rollout fragment length");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(grad_clip_norm > 0.0)) throw std::invalid_argument("grad clip must be positive");
  if (num_sgd_iter < 1) throw std::invalid_argument("num_sgd_iter must be at least 1");
  if (total_env_steps < 0) throw std::invalid_argument("step budget must be non-negative");
  if (hidden < 1) throw std::invalid_argument("hidden width must be positive");
  if (stop_window < 1) throw std::invalid_argument("stop window must be positive");
  if (max_policy_lag < 0) throw std::invalid_argument("max policy lag must be non-negative");
  vtrace.validate();
}

ParameterStore::ParameterStore(PolicyParameters initial)
    : current_(std::make_shared<const PolicyParameters>(std::move(initial))), version_(current_->version) {}

void ParameterStore::publish(PolicyParameters params) {
  auto next = std::make_shared<const PolicyParameters>(std::move(params));
  std::lock_guard lock(mu_);
  current_ = std::move(next);
  version_.store(current_->version, std::memory_order_release);
}

std::shared_ptr<const PolicyParameters> ParameterStore::latest() const {
  std::lock_guard lock(mu_);
  return current_;
}

void ParameterStore::refresh(std::shared_ptr<const PolicyParameters>& cached) const {
  if (cached && cached->version == version_.load(std::memory_order_acquire)) return;
  cached = latest();
}

Fragment roll_fragment(VvoEnv& env, const PolicyParameters& params, int steps, std::mt19937_64& rng,
                       double& episode_return) {
  Fragment f;
  f.policy_version = params.version;
  f.observations.resize(env.space().obs_dim, steps);
  f.rewards.resize(steps);
  f.behavior_log_prob.resize(steps);
  f.terminal.resize(steps);
  f.actions.reserve(steps);
  for (int t = 0; t < steps; ++t) {
    const Observation obs = env.observation();
    const auto fwd = forward<double>(params, obs);
    auto s = sample(fwd.dist, rng);
    const auto out = env.step(s.action);
    f.observations.col(t) = obs;
    f.actions.push_back(std::move(s.action));
    f.behavior_log_prob(t) = s.log_prob;
    f.rewards(t) = out.reward;
    f.terminal[t] = out.done;
    episode_return += out.reward;
    if (out.done) {
      f.episode_returns.push_back(episode_return);
      episode_return = 0.0;
      env.reset();
    }
  }
  f.bootstrap_observation = env.observation();
  return f;
}

namespace {

/// Claims up to `want` steps of the budget; returns the amount granted.
long reserve_steps(std::atomic<long>& reserved, long budget, long want) {
  long cur = reserved.load();
  while (true) {
    const long grant = std::min(want, budget - cur);
    if (grant <= 0) return 0;
    if (reserved.compare_exchange_weak(cur, cur + grant)) return grant;
  }
}

}  // namespace

void run_actor(int worker_id, VvoEnv& env, ActorContext& ctx) {
  std::mt19937_64 rng(mix_seed(ctx.cfg.seed, 1000 + static_cast<std::uint64_t>(worker_id)));
  double episode_return = 0.0;
  std::shared_ptr<const PolicyParameters> snapshot;
  while (!ctx.stop.load()) {
    const long steps = reserve_steps(ctx.reserved_steps, ctx.cfg.total_env_steps, ctx.cfg.rollout_fragment_length);
    if (steps == 0) return;
    ctx.store.refresh(snapshot);
    Fragment f = roll_fragment(env, *snapshot, static_cast<int>(steps), rng, episode_return);
    f.worker = worker_id;
    const auto behavior = f.policy_version;
    const auto lag_ok = [&] {
      return ctx.store.version() - behavior <= static_cast<std::uint64_t>(ctx.cfg.max_policy_lag);
    };
    switch (ctx.queue.push_if(std::move(f), lag_ok)) {
      case BoundedQueue<Fragment>::PushResult::Accepted:
        ctx.produced_steps += steps;
        break;
      case BoundedQueue<Fragment>::PushResult::Rejected:
        ctx.reserved_steps -= steps;
        ++ctx.discarded_fragments;
        break;
      case BoundedQueue<Fragment>::PushResult::Closed:
        return;
    }
  }
}

Learner::Learner(PolicyParameters initial, const RuntimeConfig& cfg)
    : params_(std::move(initial)), cfg_(cfg), adam_(AdamConfig{cfg.learning_rate}) {}

bool Learner::update(const std::vector<Fragment>& batch) {
  if (batch.empty()) return false;
  long n = 0;
  for (const auto& f : batch) n += f.steps();
  const auto rows = static_cast<Eigen::Index>(batch.size());
  const int obs_dim = params_.layout.obs_dim;

  LossBatch<double> lb;
  lb.obs.resize(obs_dim, n);
  lb.actions.reserve(n);
  Eigen::MatrixXd all_obs(obs_dim, n + rows);
  {
    Eigen::Index col = 0;
    for (const auto& f : batch) {
      all_obs.middleCols(col, f.steps()) = f.observations;
      col += f.steps();
      for (const auto& a : f.actions) lb.actions.push_back(a);
    }
    for (Eigen::Index r = 0; r < rows; ++r) all_obs.col(n + r) = batch[r].bootstrap_observation;
    lb.obs = all_obs.leftCols(n);
  }

  for (int iter = 0; iter < cfg_.num_sgd_iter; ++iter) {
    const auto cache = forward_batch<double>(params_, all_obs);
    lb.pg_advantages.resize(n);
    lb.vs.resize(n);
    Eigen::Index col = 0;
    for (Eigen::Index r = 0; r < rows; ++r) {
      const auto& f = batch[r];
      const auto t_len = f.steps();
      vtrace::Array<double> values(t_len + 1), discounts(t_len), log_pi(t_len);
      for (Eigen::Index t = 0; t < t_len; ++t) {
        values(t) = cache.value(col + t);
        discounts(t) = f.terminal[t] ? 0.0 : cfg_.vtrace.gamma;
        log_pi(t) = log_prob(distribution_at(cache, params_.layout, col + t), f.actions[t]);
      }
      values(t_len) = cache.value(n + r);
      const auto targets =
          vtrace::compute_vtrace<double>(f.rewards.array(), values, discounts, log_pi, f.behavior_log_prob.array(), cfg_.vtrace);
      lb.pg_advantages.segment(col, t_len) = targets.pg_advantages;
      lb.vs.segment(col, t_len) = targets.vs;
      col += t_len;
    }

    Gradient<double> grad;
    try {
      grad = backward(params_, lb, cfg_.vtrace);
    } catch (const std::domain_error& e) {
      std::cerr << "learner: skipping update at version " << params_.version << ": " << e.what() << '\n';
      return false;
    }
    clip_by_global_norm(grad.flat, cfg_.grad_clip_norm);
    Eigen::VectorXd next = params_.flat;
    adam_.step(next, grad.flat);
    if (!next.allFinite()) {
      std::cerr << "learner: skipping update at version " << params_.version << ": non-finite parameters\n";
      return false;
    }
    params_.flat = std::move(next);
  }
  ++params_.version;
  return true;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

class EpisodeWindow {
 public:
  explicit EpisodeWindow(std::size_t size) : size_(size) {}
  void add(double r) {
    window_.push_back(r);
    if (window_.size() > size_) window_.pop_front();
  }
  bool full() const { return window_.size() == size_; }
  double mean() const {
    double s = 0.0;
    for (double r : window_) s += r;
    return window_.empty() ? 0.0 : s / static_cast<double>(window_.size());
  }

 private:
  std::size_t size_;
  std::deque<double> window_;
};

struct LearnerLoop {
  const RuntimeConfig& cfg;
  const TrainHooks& hooks;
  ParameterStore& store;
  Learner learner;
  TrainResult& result;
  Clock::time_point start;
  EpisodeWindow window;
  std::vector<Fragment> pending;
  long pending_steps = 0;

  LearnerLoop(const RuntimeConfig& c, const TrainHooks& h, ParameterStore& s, PolicyParameters init, TrainResult& r)
      : cfg(c), hooks(h), store(s), learner(std::move(init), c), result(r), start(Clock::now()),
        window(static_cast<std::size_t>(c.stop_window)) {}

  /// Accepts one fragment; returns true when the stopping rule fired.
  bool consume(Fragment f, std::size_t occupancy) {
    result.consumed_sequences.push_back(f.sequence);
    result.consumed_steps += f.steps();
    pending_steps += f.steps();
    pending.push_back(std::move(f));
    if (pending_steps >= cfg.train_batch_size) return flush(occupancy);
    return false;
  }

  bool flush(std::size_t occupancy) {
    if (pending.empty()) return false;
    std::uint64_t lag = 0;
    double returns = 0.0;
    std::size_t episodes = 0;
    for (const auto& f : pending) {
      lag = std::max(lag, learner.params().version - f.policy_version);
      for (double r : f.episode_returns) {
        returns += r;
        ++episodes;
        window.add(r);
      }
    }
    if (learner.update(pending))
      store.publish(learner.params());
    else
      ++result.skipped_updates;

    MetricsRow row;
    row.iteration = static_cast<long>(result.metrics.size()) + 1;
    row.env_steps = result.consumed_steps;
    row.mean_episode_reward = episodes ? returns / static_cast<double>(episodes) : std::nan("");
    row.wall_clock_s = seconds_since(start);
    row.steps_per_sec = row.wall_clock_s > 0.0 ? static_cast<double>(row.env_steps) / row.wall_clock_s : 0.0;
    row.queue_occupancy = occupancy;
    row.version_lag = lag;
    result.metrics.push_back(row);
    if (hooks.on_metrics) hooks.on_metrics(row);

    pending.clear();
    pending_steps = 0;
    if (cfg.stop_on_reward && window.full() && window.mean() >= cfg.stop_reward) {
      result.stopped_on_reward = true;
      return true;
    }
    return false;
  }

  bool out_of_time() const { return hooks.max_seconds > 0.0 && seconds_since(start) >= hooks.max_seconds; }
};

std::vector<std::unique_ptr<VvoEnv>> make_envs(const FeederNetwork& net, const ExogenousProfile& profile,
                                               const RuntimeConfig& cfg) {
  std::vector<std::unique_ptr<VvoEnv>> envs;
  for (int w = 0; w < cfg.num_actors; ++w) {
    envs.push_back(std::make_unique<VvoEnv>(net, profile));
    envs.back()->reset(mix_seed(cfg.seed, 100 + static_cast<std::uint64_t>(w)), std::nullopt);
  }
  return envs;
}

}  // namespace

TrainResult train(const FeederNetwork& net, const ExogenousProfile& profile, const RuntimeConfig& cfg,
                  const TrainHooks& hooks) {
  cfg.validate();
  const auto space = action_space_descriptor(net);
  auto init = PolicyParameters::initialize(PolicyLayout::for_space(space, cfg.hidden), mix_seed(cfg.seed, 0));

  TrainResult result;
  ParameterStore store(init);
  const std::size_t capacity = cfg.sync ? 1 : cfg.learner_queue_capacity;
  BoundedQueue<Fragment> queue(capacity);
  std::atomic<long> reserved{0}, produced{0}, discarded{0};
  std::atomic<bool> stop{false};
  ActorContext ctx{cfg, store, queue, reserved, produced, discarded, stop};
  auto envs = make_envs(net, profile, cfg);
  LearnerLoop loop(cfg, hooks, store, std::move(init), result);
  const auto start = Clock::now();

  if (cfg.sync) {
    // Lock-step: every fragment is generated from the newest parameters.
    std::vector<std::mt19937_64> rngs;
    std::vector<double> episode_returns(cfg.num_actors, 0.0);
    for (int w = 0; w < cfg.num_actors; ++w) rngs.emplace_back(mix_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(w)));
    bool done = false;
    int w = 0;
    while (!done) {
      const long steps = reserve_steps(reserved, cfg.total_env_steps, cfg.rollout_fragment_length);
      if (steps == 0 || loop.out_of_time()) break;
      Fragment f = roll_fragment(*envs[w], *store.latest(), static_cast<int>(steps), rngs[w], episode_returns[w]);
      f.worker = w;
      queue.push(std::move(f));
      produced += steps;
      auto got = queue.pop();
      done = loop.consume(std::move(*got), queue.size());
      w = (w + 1) % cfg.num_actors;
    }
    if (!done) loop.flush(queue.size());
  } else {
    std::mutex err_mu;
    std::exception_ptr worker_error;
    std::atomic<int> active{cfg.num_actors};
    std::vector<std::jthread> workers;
    for (int w = 0; w < cfg.num_actors; ++w) {
      workers.emplace_back([&, w] {
        try {
          run_actor(w, *envs[w], ctx);
        } catch (...) {
          std::lock_guard lock(err_mu);
          if (!worker_error) worker_error = std::current_exception();
          stop = true;
        }
        if (--active == 0 || stop.load()) queue.close();
      });
    }

    bool stopped = false;
    while (auto f = queue.pop()) {
      if (loop.consume(std::move(*f), queue.size()) || loop.out_of_time()) {
        stopped = true;
        break;
      }
    }
    stop = true;
    queue.close();
    if (!stopped) loop.flush(queue.size());
    for (auto& t : workers) t.join();
    for (const auto& f : queue.drain()) result.queued_steps_at_shutdown += f.steps();
    result.blocked_pushes = queue.blocked_pushes();
    result.max_queue_occupancy = queue.high_water();
    if (worker_error) {
      result.produced_steps = produced.load();
      std::rethrow_exception(worker_error);
    }
  }

  result.elapsed_s = seconds_since(start);
  result.produced_steps = produced.load();
  result.discarded_fragments = discarded.load();
  result.produced_steps_per_sec =
      result.elapsed_s > 0.0 ? static_cast<double>(result.produced_steps) / result.elapsed_s : 0.0;
  result.params = loop.learner.params();
  return result;
}

}  // namespace vvo
