#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "vvo/env.hpp"
#include "vvo/grid_model.hpp"
#include "vvo/optimizer.hpp"
#include "vvo/policy.hpp"
#include "vvo/profile.hpp"
#include "vvo/vtrace.hpp"

namespace vvo {

/// Blocking bounded FIFO. Items with a `sequence` member are stamped with
/// their arrival number under the queue lock.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("queue capacity must be at least 1");
  }

  /// Blocks while full. Returns false, dropping `item`, once the queue is closed.
  bool push(T item) {
    return push_if(std::move(item), [] { return true; }) == PushResult::Accepted;
  }

  enum class PushResult { Accepted, Rejected, Closed };

  /// Producers are served in arrival order. When this producer's turn comes
  /// and space is free, `admit()` is evaluated under the queue lock; a false
  /// result drops the item without enqueuing it.
  template <typename Admit>
  PushResult push_if(T item, Admit admit) {
    std::unique_lock lock(mu_);
    const std::uint64_t ticket = next_ticket_++;
    if ((items_.size() >= capacity_ || ticket != serving_) && !closed_) ++blocked_pushes_;
    not_full_.wait(lock, [&] { return (ticket == serving_ && items_.size() < capacity_) || closed_; });
    if (closed_) return PushResult::Closed;
    ++serving_;
    not_full_.notify_all();
    if (!admit()) return PushResult::Rejected;
    if constexpr (requires { item.sequence = std::uint64_t{}; }) item.sequence = next_sequence_;
    ++next_sequence_;
    items_.push_back(std::move(item));
    high_water_ = std::max(high_water_, items_.size());
    not_empty_.notify_one();
    return PushResult::Accepted;
  }

  /// Blocks while empty and open; nullopt once closed and drained.
  std::optional<T> pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_all();
    return item;
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_full_.notify_all();
    not_empty_.notify_all();
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return items_.size();
  }
  std::size_t capacity() const { return capacity_; }
  bool closed() const {
    std::lock_guard lock(mu_);
    return closed_;
  }
  std::uint64_t blocked_pushes() const {
    std::lock_guard lock(mu_);
    return blocked_pushes_;
  }
  /// Largest number of items ever held at once.
  std::size_t high_water() const {
    std::lock_guard lock(mu_);
    return high_water_;
  }

  /// Removes and returns whatever is still queued.
  std::vector<T> drain() {
    std::lock_guard lock(mu_);
    std::vector<T> out(std::make_move_iterator(items_.begin()), std::make_move_iterator(items_.end()));
    items_.clear();
    not_full_.notify_all();
    return out;
  }

 private:
  const std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable not_full_;
  std::condition_variable not_empty_;
  std::deque<T> items_;
  bool closed_ = false;
  std::uint64_t next_sequence_ = 0;
  std::uint64_t next_ticket_ = 0;
  std::uint64_t serving_ = 0;
  std::uint64_t blocked_pushes_ = 0;
  std::size_t high_water_ = 0;
};

/// Latest published parameters. Readers get an immutable shared snapshot.
class ParameterStore {
 public:
  explicit ParameterStore(PolicyParameters initial);

  void publish(PolicyParameters params);
  std::shared_ptr<const PolicyParameters> latest() const;
  /// Swaps `cached` for the newest snapshot if a newer version exists. The
  /// common no-change path is a single atomic load.
  void refresh(std::shared_ptr<const PolicyParameters>& cached) const;
  std::uint64_t version() const { return version_.load(std::memory_order_acquire); }

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const PolicyParameters> current_;
  std::atomic<std::uint64_t> version_;
};

/// Fixed-length slice of experience from one actor.
struct Fragment {
  std::uint64_t sequence = 0;
  int worker = 0;
  std::uint64_t policy_version = 0;
  Eigen::MatrixXd observations;  // obs_dim x T
  std::vector<ActionVector> actions;
  Eigen::VectorXd rewards;
  Eigen::VectorXd behavior_log_prob;
  std::vector<bool> terminal;
  Eigen::VectorXd bootstrap_observation;
  std::vector<double> episode_returns;  // episodes that ended inside this fragment

  long steps() const { return static_cast<long>(rewards.size()); }
};

struct RuntimeConfig {
  int num_actors = 1;
  std::size_t learner_queue_capacity = 16;
  int rollout_fragment_length = 50;
  int train_batch_size = 2500;
  double learning_rate = 5e-4;
  double grad_clip_norm = 40.0;
  int num_sgd_iter = 1;
  long total_env_steps = 200000;
  std::uint64_t seed = 0;
  bool sync = false;
  int hidden = 256;
  // Actors drop a finished fragment whose behavior version trails the learner
  // by more than this when its turn to enqueue comes, then roll a fresh one.
  int max_policy_lag = 4;
  vtrace::Config vtrace;  // entropy_coef defaults to 0.01
  // Stop once the mean return of the last `stop_window` episodes reaches this.
  bool stop_on_reward = true;
  double stop_reward = -1e-6;
  int stop_window = 1000;

  void validate() const;
  int fragments_per_batch() const { return train_batch_size / rollout_fragment_length; }
};

struct MetricsRow {
  long iteration = 0;
  long env_steps = 0;  // consumed by the learner so far
  double mean_episode_reward = 0.0;
  double steps_per_sec = 0.0;
  std::size_t queue_occupancy = 0;
  std::uint64_t version_lag = 0;  // max learner-minus-behavior version in the batch
  double wall_clock_s = 0.0;
};

struct TrainResult {
  PolicyParameters params;
  std::vector<MetricsRow> metrics;
  long produced_steps = 0;
  long consumed_steps = 0;
  long queued_steps_at_shutdown = 0;
  std::vector<std::uint64_t> consumed_sequences;
  std::uint64_t blocked_pushes = 0;
  std::size_t max_queue_occupancy = 0;
  long discarded_fragments = 0;
  long skipped_updates = 0;
  bool stopped_on_reward = false;
  double produced_steps_per_sec = 0.0;
  double elapsed_s = 0.0;
};

struct TrainHooks {
  std::function<void(const MetricsRow&)> on_metrics;
  // Wall-clock cap in seconds; 0 disables.
  double max_seconds = 0.0;
};

/// Per-batch learner state: Adam moments, version counter and the V-trace step.
class Learner {
 public:
  Learner(PolicyParameters initial, const RuntimeConfig& cfg);

  /// One update from a batch of fragments. Returns false and leaves the
  /// parameters untouched when the loss or gradient is non-finite.
  bool update(const std::vector<Fragment>& batch);

  const PolicyParameters& params() const { return params_; }

 private:
  PolicyParameters params_;
  RuntimeConfig cfg_;
  Adam adam_;
};

/// Rolls one fragment of up to `steps` transitions with the given snapshot.
Fragment roll_fragment(VvoEnv& env, const PolicyParameters& params, int steps, std::mt19937_64& rng,
                       double& episode_return);

/// Shared state between actor workers and the learner.
struct ActorContext {
  const RuntimeConfig& cfg;
  const ParameterStore& store;
  BoundedQueue<Fragment>& queue;
  std::atomic<long>& reserved_steps;  // budget claimed by actors
  std::atomic<long>& produced_steps;  // steps in fragments accepted by the queue
  std::atomic<long>& discarded_fragments;
  std::atomic<bool>& stop;
};

/// Actor loop: fetch the latest snapshot, roll a fragment, push it (blocking
/// while the queue is full). Returns when the budget is spent, `stop` is set,
/// or the queue closes.
void run_actor(int worker_id, VvoEnv& env, ActorContext& ctx);

/// Runs actors and the learner until the step budget, the reward stopping
/// rule, or the wall-clock cap is reached.
TrainResult train(const FeederNetwork& net, const ExogenousProfile& profile, const RuntimeConfig& cfg,
                  const TrainHooks& hooks = {});

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace vvo
