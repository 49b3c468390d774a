// vvo: command-line driver for placement, training, evaluation, baselines and
// one-shot power-flow dumps.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "vvo/baselines.hpp"
#include "vvo/checkpoint.hpp"
#include "vvo/csv.hpp"
#include "vvo/env.hpp"
#include "vvo/placement.hpp"
#include "vvo/policy.hpp"
#include "vvo/powerflow.hpp"
#include "vvo/runtime.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vvo;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;

/// Usage or validation failure detected by the CLI itself.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

int thread_cap() {
  if (const char* env = std::getenv("VVO_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Written before work starts and finalized once when it ends.
class RunManifest {
 public:
  RunManifest(fs::path dir, std::string subcommand, json config, const FeederNetwork& net,
              const std::string& scenario_path, std::uint64_t seed)
      : path_(std::move(dir) / "manifest.json") {
    doc_ = {{"subcommand", std::move(subcommand)},
            {"config", std::move(config)},
            {"scenario", scenario_path},
            {"scenario_hash", hex(scenario_hash(net))},
            {"seed", seed},
            {"start_time", timestamp()},
            {"end_time", nullptr},
            {"outputs", json::array()},
            {"status", "running"}};
    write();
  }

  void add_output(const fs::path& p) { doc_["outputs"].push_back(p.string()); }

  void finish(const std::string& status) {
    doc_["end_time"] = timestamp();
    doc_["status"] = status;
    write();
  }

 private:
  void write() const {
    std::ofstream out(path_);
    out << doc_.dump(2) << '\n';
  }
  fs::path path_;
  json doc_;
};

FeederNetwork load_scenario(const std::string& path) {
  if (!fs::exists(path)) throw ParseError("scenario file not found: '" + path + "'");
  return load_network(path);
}

ExogenousProfile load_profile(const FeederNetwork& net, const std::string& irradiance_csv,
                              const std::string& load_seed_csv) {
  auto p = ExogenousProfile::synthetic(net.options.profile_seed);
  if (!irradiance_csv.empty()) p.override_irradiance(irradiance_csv);
  if (!load_seed_csv.empty()) p.override_load_seeds(load_seed_csv);
  return p;
}

fs::path prepare_dir(const std::string& dir) {
  fs::create_directories(dir);
  return fs::path(dir);
}

// ---------------------------------------------------------------------------
// pf

struct PfArgs {
  std::string scenario;
  std::string out_dir = "vvo_out";
  int hour = 12;
  std::uint64_t seed = 0;
  std::string irradiance_csv, load_seed_csv;
};

int cmd_pf(const PfArgs& a) {
  const auto net = load_scenario(a.scenario);
  if (a.hour < 0 || a.hour >= kHoursPerYear) throw UsageError("--hour must lie in [0, 8760)");
  const auto profile = load_profile(net, a.irradiance_csv, a.load_seed_csv);
  const auto dir = prepare_dir(a.out_dir);
  RunManifest manifest(dir, "pf", {{"hour", a.hour}, {"seed", a.seed}}, net, a.scenario, a.seed);

  VvoEnv env(net, profile);
  env.reset(a.seed, a.hour);
  const auto state = make_state(net, neutral_setpoints(net, env.irradiance()), env.load_factors());
  const auto sol = solve(net, state);
  const auto v = count_violations(sol, net);

  const auto out = dir / "voltages.csv";
  CsvWriter csv(out, {"bus", "V_pu", "theta_rad"});
  for (std::size_t i = 0; i < net.num_buses(); ++i) csv.row(net.buses[i].id, sol.vm(i), sol.va(i));
  manifest.add_output(out);
  std::cout << "iterations " << sol.iterations << ", losses_pu " << sol.losses_pu << ", violations " << v.count
            << " (" << v.fraction << ")\n";
  manifest.finish("ok");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// place

struct PlaceArgs {
  std::string scenario;
  std::string out_dir = "vvo_out";
  int hours = 8760;
  int stride = 1;
  std::size_t top_k = 30;
  double rating_kw = 100.0;
  std::uint64_t seed = 0;
  bool sequential = false;
  std::string irradiance_csv, load_seed_csv;
};

int cmd_place(const PlaceArgs& a) {
  const auto net = load_scenario(a.scenario);
  if (a.hours <= 0) throw UsageError("empty horizon: --hours must be positive");
  std::vector<int> hours;
  try {
    hours = horizon_hours(a.hours, a.stride);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto profile = load_profile(net, a.irradiance_csv, a.load_seed_csv);
  const auto dir = prepare_dir(a.out_dir);
  const json cfg = {{"hours", a.hours},         {"stride", a.stride},     {"top_k", a.top_k},
                    {"rating_kw", a.rating_kw}, {"sequential", a.sequential}, {"seed", a.seed}};
  RunManifest manifest(dir, "place", cfg, net, a.scenario, a.seed);

  PlacementOptions opt;
  opt.pv_rating_kw = a.rating_kw;
  opt.load_seed = a.seed;
  opt.threads = thread_cap();
  const auto candidates = all_candidate_buses(net);
  const auto ranking = a.sequential ? rank_placements_sequential(net, candidates, profile, hours, a.top_k, opt)
                                    : rank_placements(net, candidates, profile, hours, a.top_k, opt);

  const auto out = dir / "ranking.csv";
  CsvWriter csv(out, {"rank", "bus", "v_total", "l_total", "fitness"});
  for (std::size_t i = 0; i < ranking.candidates.size(); ++i) {
    const auto& c = ranking.candidates[i];
    csv.row(i + 1, c.pv_bus, c.v_total, c.l_total, c.fitness);
  }
  manifest.add_output(out);
  manifest.finish("ok");
  std::cout << "ranked " << ranking.candidates.size() << " buses over " << hours.size() << " hours -> " << out
            << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

json config_to_json(const RuntimeConfig& c) {
  return {{"num_actors", c.num_actors},
          {"learner_queue_capacity", c.learner_queue_capacity},
          {"rollout_fragment_length", c.rollout_fragment_length},
          {"train_batch_size", c.train_batch_size},
          {"learning_rate", c.learning_rate},
          {"grad_clip_norm", c.grad_clip_norm},
          {"entropy_coef", c.vtrace.entropy_coef},
          {"value_coef", c.vtrace.value_coef},
          {"gamma", c.vtrace.gamma},
          {"rho_bar", c.vtrace.rho_bar},
          {"c_bar", c.vtrace.c_bar},
          {"num_sgd_iter", c.num_sgd_iter},
          {"total_env_steps", c.total_env_steps},
          {"seed", c.seed},
          {"sync", c.sync},
          {"hidden", c.hidden},
          {"max_policy_lag", c.max_policy_lag},
          {"stop_on_reward", c.stop_on_reward},
          {"stop_reward", c.stop_reward},
          {"stop_window", c.stop_window}};
}

void apply_config_json(RuntimeConfig& c, json j) {
  if (j.contains("config") && j["config"].is_object()) j = j["config"];  // accept a RunManifest
  auto set = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
  };
  set("num_actors", c.num_actors);
  set("learner_queue_capacity", c.learner_queue_capacity);
  set("rollout_fragment_length", c.rollout_fragment_length);
  set("train_batch_size", c.train_batch_size);
  set("learning_rate", c.learning_rate);
  set("grad_clip_norm", c.grad_clip_norm);
  set("entropy_coef", c.vtrace.entropy_coef);
  set("value_coef", c.vtrace.value_coef);
  set("gamma", c.vtrace.gamma);
  set("rho_bar", c.vtrace.rho_bar);
  set("c_bar", c.vtrace.c_bar);
  set("num_sgd_iter", c.num_sgd_iter);
  set("total_env_steps", c.total_env_steps);
  set("seed", c.seed);
  set("sync", c.sync);
  set("hidden", c.hidden);
  set("max_policy_lag", c.max_policy_lag);
  set("stop_on_reward", c.stop_on_reward);
  set("stop_reward", c.stop_reward);
  set("stop_window", c.stop_window);
}

struct TrainArgs {
  std::string scenario;
  std::string out_dir = "vvo_out";
  std::string config_path;
  std::string irradiance_csv, load_seed_csv;
  RuntimeConfig cfg;
  double max_seconds = 0.0;
  // Which fields were given on the command line and override the config file.
  std::vector<std::function<void(RuntimeConfig&)>> overrides;
};


int cmd_train(TrainArgs& a) {
  const auto net = load_scenario(a.scenario);
  RuntimeConfig cfg;
  if (!a.config_path.empty()) {
    std::ifstream in(a.config_path);
    if (!in) throw UsageError("config file not found: '" + a.config_path + "'");
    json j;
    try {
      in >> j;
      apply_config_json(cfg, j);
    } catch (const json::exception& e) {
      throw UsageError(std::string("malformed config: ") + e.what());
    }
  }
  for (auto& o : a.overrides) o(cfg);
  cfg.num_actors = std::min(cfg.num_actors, thread_cap());
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const auto profile = load_profile(net, a.irradiance_csv, a.load_seed_csv);
  const auto dir = prepare_dir(a.out_dir);
  RunManifest manifest(dir, "train", config_to_json(cfg), net, a.scenario, cfg.seed);

  // Timing columns are wall-clock dependent; sync runs zero them here and
  // keep the real values in timing.csv so metrics.csv stays reproducible.
  const auto metrics_path = dir / "metrics.csv";
  const std::vector<std::string> header = {"iteration",         "env_steps",      "mean_episode_reward",
                                           "steps_per_sec",     "queue_occupancy", "version_lag",
                                           "wall_clock_s"};
  CsvWriter metrics(metrics_path, header);
  std::unique_ptr<CsvWriter> timing;
  if (cfg.sync) timing = std::make_unique<CsvWriter>(dir / "timing.csv", std::vector<std::string>{"iteration", "steps_per_sec", "wall_clock_s"});
  TrainHooks hooks;
  hooks.max_seconds = a.max_seconds;
  hooks.on_metrics = [&](const MetricsRow& r) {
    const double sps = cfg.sync ? 0.0 : r.steps_per_sec;
    const double wall = cfg.sync ? 0.0 : r.wall_clock_s;
    metrics.row(r.iteration, r.env_steps, r.mean_episode_reward, sps, r.queue_occupancy, r.version_lag, wall);
    if (timing) timing->row(r.iteration, r.steps_per_sec, r.wall_clock_s);
    std::cerr << "iter " << r.iteration << " steps " << r.env_steps << " reward " << r.mean_episode_reward
              << " lag " << r.version_lag << '\n';
  };
  manifest.add_output(metrics_path);
  if (timing) manifest.add_output(dir / "timing.csv");

  TrainResult result;
  try {
    result = train(net, profile, cfg, hooks);
  } catch (...) {
    manifest.finish("failed");
    throw;
  }
  const auto ckpt = dir / "checkpoint.json";
  save_checkpoint(ckpt, result.params, action_space_descriptor(net));
  manifest.add_output(ckpt);
  manifest.finish("ok");

  const double final_reward = result.metrics.empty() ? std::nan("") : result.metrics.back().mean_episode_reward;
  std::cout << "iterations " << result.metrics.size() << ", env steps " << result.consumed_steps
            << ", final mean reward " << final_reward << (result.stopped_on_reward ? " (stopping rule met)" : "")
            << ", policy version " << result.params.version << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string scenario;
  std::string checkpoint;
  std::string out_dir = "vvo_out";
  int day = 0;
  std::uint64_t seed = 0;
  std::string irradiance_csv, load_seed_csv;
};

int cmd_eval(const EvalArgs& a) {
  const auto net = load_scenario(a.scenario);
  if (a.day < 0 || a.day >= kHoursPerYear / 24) throw UsageError("--day must lie in [0, 364]");
  const auto space = action_space_descriptor(net);
  PolicyParameters params;
  try {
    params = load_checkpoint(a.checkpoint, space);
  } catch (const CheckpointMismatch& e) {
    throw UsageError(e.what());
  }
  const auto profile = load_profile(net, a.irradiance_csv, a.load_seed_csv);
  const auto dir = prepare_dir(a.out_dir);
  RunManifest manifest(dir, "eval", {{"checkpoint", a.checkpoint}, {"day", a.day}, {"seed", a.seed}}, net,
                       a.scenario, a.seed);

  auto numbered = [](const std::string& prefix, std::size_t n) {
    std::vector<std::string> h{"hour"};
    for (std::size_t i = 0; i < n; ++i) h.push_back(prefix + std::to_string(i));
    return h;
  };
  CsvWriter long_form(dir / "setpoints.csv", {"hour", "device", "setpoint"});
  CsvWriter pv_kw(dir / "pv_kw.csv", numbered("pv", net.pvs.size()));
  CsvWriter pv_kvar(dir / "pv_kvar.csv", numbered("pv", net.pvs.size()));
  CsvWriter batt(dir / "battery_kw.csv", numbered("battery", net.batteries.size()));
  CsvWriter caps(dir / "capacitor_status.csv", numbered("cap", net.capacitors.size()));
  CsvWriter taps(dir / "tap_index.csv", numbered("xfmr", net.transformers.size()));
  CsvWriter viol(dir / "violations.csv", {"hour", "irradiance", "violation_count", "reward", "losses_pu", "converged"});

  VvoEnv env(net, profile);
  int total_violations = 0;
  for (int h = 0; h < 24; ++h) {
    const int hour = a.day * 24 + h;
    const auto obs = env.reset(mix_seed(a.seed, static_cast<std::uint64_t>(hour)), hour);
    const auto fwd = forward<double>(params, obs);
    const auto action = mode(fwd.dist);
    const auto sp = env.decode(action);
    const auto out = env.step(action);
    total_violations += out.info.violation_count;

    auto row = [&](CsvWriter& w, const auto& values) {
      std::vector<std::string> cells{std::to_string(hour)};
      for (const auto& v : values) {
        std::ostringstream os;
        os.precision(10);
        os << v;
        cells.push_back(os.str());
      }
      w.row(cells);
    };
    row(pv_kw, sp.pv_p_kw);
    row(pv_kvar, sp.pv_q_kvar);
    row(batt, sp.batt_p_kw);
    row(caps, sp.cap_status);
    row(taps, sp.tap_index);
    for (std::size_t i = 0; i < sp.pv_p_kw.size(); ++i) {
      long_form.row(hour, "pv" + std::to_string(i) + "_kw", sp.pv_p_kw[i]);
      long_form.row(hour, "pv" + std::to_string(i) + "_kvar", sp.pv_q_kvar[i]);
    }
    for (std::size_t i = 0; i < sp.batt_p_kw.size(); ++i)
      long_form.row(hour, "battery" + std::to_string(i) + "_kw", sp.batt_p_kw[i]);
    for (std::size_t i = 0; i < sp.cap_status.size(); ++i)
      long_form.row(hour, "cap" + std::to_string(i) + "_status", sp.cap_status[i]);
    for (std::size_t i = 0; i < sp.tap_index.size(); ++i)
      long_form.row(hour, "xfmr" + std::to_string(i) + "_tap", sp.tap_index[i]);
    viol.row(hour, env.irradiance(), out.info.violation_count, out.reward, out.info.losses_pu,
             out.info.converged ? 1 : 0);
  }
  for (const char* f : {"setpoints.csv", "pv_kw.csv", "pv_kvar.csv", "battery_kw.csv", "capacitor_status.csv",
                        "tap_index.csv", "violations.csv"})
    manifest.add_output(dir / f);
  manifest.finish("ok");
  std::cout << "evaluated 24 hours of day " << a.day << ", total violations " << total_violations << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// baseline

struct BaselineArgs {
  std::string scenario;
  std::string out_dir = "vvo_out";
  std::string method = "pso";
  int hour = 12;
  std::uint64_t seed = 0;
  int particles = 100;
  int iters = 50;
  long budget = 5000;
  std::string mode = "auto";
  std::string irradiance_csv, load_seed_csv;
};

int cmd_baseline(const BaselineArgs& a) {
  const auto net = load_scenario(a.scenario);
  if (a.hour < 0 || a.hour >= kHoursPerYear) throw UsageError("--hour must lie in [0, 8760)");
  if (a.particles < 1) throw UsageError("--particles must be at least 1");
  if (a.iters < 0) throw UsageError("--iters must be non-negative");
  if (a.budget < 1) throw UsageError("--budget must be at least 1");
  const auto profile = load_profile(net, a.irradiance_csv, a.load_seed_csv);
  const auto dir = prepare_dir(a.out_dir);
  const json cfg = {{"method", a.method}, {"hour", a.hour},     {"seed", a.seed}, {"particles", a.particles},
                    {"iters", a.iters},   {"budget", a.budget}, {"mode", a.mode}};
  RunManifest manifest(dir, "baseline", cfg, net, a.scenario, a.seed);

  VvoEnv env(net, profile);
  env.reset(a.seed, a.hour);
  SearchResult r;
  if (a.method == "pso") {
    r = pso_solve(env, {a.particles, a.iters, 0.729, 1.49445, 1.49445, a.seed});
  } else {
    const auto mode = a.mode == "exhaustive" ? SamplingMode::Exhaustive
                      : a.mode == "random"   ? SamplingMode::Random
                                             : SamplingMode::Auto;
    r = brute_force_solve(env, a.budget, a.seed, mode);
  }

  const auto trace_path = dir / "trace.csv";
  CsvWriter trace(trace_path, {"step", "best_reward"});
  for (std::size_t i = 0; i < r.trace.size(); ++i) trace.row(i, r.trace[i]);
  const auto best_path = dir / "best_action.json";
  {
    std::ofstream out(best_path);
    out << json{{"best_reward", r.best_reward},
                {"evaluations", r.evaluations},
                {"continuous", std::vector<double>(r.best_action.continuous.data(),
                                                   r.best_action.continuous.data() + r.best_action.continuous.size())},
                {"discrete", r.best_action.discrete}}
               .dump(2)
        << '\n';
  }
  manifest.add_output(trace_path);
  manifest.add_output(best_path);
  manifest.finish("ok");
  std::cout << a.method << ": best reward " << r.best_reward << " after " << r.evaluations << " evaluations\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Volt-VAR optimization: power flow, DER placement, actor-learner training, baselines"};
  app.require_subcommand(1);

  auto add_common = [](CLI::App* sub, std::string& scenario, std::string& out_dir, std::string& irr,
                       std::string& seeds) {
    sub->add_option("--scenario", scenario, "Scenario JSON file")->required();
    sub->add_option("--out-dir", out_dir, "Directory for outputs and manifest")->capture_default_str();
    sub->add_option("--irradiance-csv", irr, "CSV (hour, irradiance) overriding the synthetic profile");
    sub->add_option("--load-seed-csv", seeds, "CSV (hour, load_factor_seed) pinning load draws");
  };

  PfArgs pf;
  auto* pf_cmd = app.add_subcommand("pf", "Solve one neutral-control power flow and dump bus voltages");
  add_common(pf_cmd, pf.scenario, pf.out_dir, pf.irradiance_csv, pf.load_seed_csv);
  pf_cmd->add_option("--hour", pf.hour, "Hour of year")->capture_default_str();
  pf_cmd->add_option("--seed", pf.seed, "Load-factor seed")->capture_default_str();

  PlaceArgs place;
  auto* place_cmd = app.add_subcommand("place", "Rank buses for colocated PV + battery placement");
  add_common(place_cmd, place.scenario, place.out_dir, place.irradiance_csv, place.load_seed_csv);
  place_cmd->add_option("--hours", place.hours, "Number of hours in the horizon")->capture_default_str();
  place_cmd->add_option("--stride", place.stride, "Hour subsampling stride")->capture_default_str();
  place_cmd->add_option("--top-k", place.top_k, "Rows to keep")->capture_default_str();
  place_cmd->add_option("--rating-kw", place.rating_kw, "PV rating placed at each candidate")->capture_default_str();
  place_cmd->add_option("--seed", place.seed, "Load-factor seed")->capture_default_str();
  place_cmd->add_flag("--sequential", place.sequential, "Greedy placement keeping earlier picks in the network");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train the actor-learner policy");
  add_common(train_cmd, tr.scenario, tr.out_dir, tr.irradiance_csv, tr.load_seed_csv);
  train_cmd->add_option("--config", tr.config_path, "JSON config (or a previous manifest.json)");
  train_cmd->add_option("--max-seconds", tr.max_seconds, "Wall-clock cap, 0 for none");
  int actors = 0, hidden = 0, batch = 0, fragment = 0, queue = 0;
  long steps = -1;
  std::uint64_t seed = 0;
  double lr = 0.0, entropy = -1.0;
  bool sync = false;
  auto* o_actors = train_cmd->add_option("--actors", actors, "Actor workers");
  auto* o_steps = train_cmd->add_option("--steps", steps, "Environment step budget");
  auto* o_seed = train_cmd->add_option("--seed", seed, "Run seed");
  auto* o_hidden = train_cmd->add_option("--hidden", hidden, "Trunk width");
  auto* o_batch = train_cmd->add_option("--train-batch-size", batch, "Steps per learner update");
  auto* o_fragment = train_cmd->add_option("--fragment-length", fragment, "Rollout fragment length");
  auto* o_queue = train_cmd->add_option("--queue-capacity", queue, "Learner queue capacity (fragments)");
  auto* o_lr = train_cmd->add_option("--lr", lr, "Adam learning rate");
  auto* o_entropy = train_cmd->add_option("--entropy-coef", entropy, "Entropy bonus coefficient");
  auto* o_sync = train_cmd->add_flag("--sync", sync, "Lock-step single-thread mode (deterministic)");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Roll the deterministic policy over one day");
  add_common(eval_cmd, ev.scenario, ev.out_dir, ev.irradiance_csv, ev.load_seed_csv);
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint from train")->required();
  eval_cmd->add_option("--day", ev.day, "Day of year")->capture_default_str();
  eval_cmd->add_option("--seed", ev.seed, "Load-factor seed")->capture_default_str();

  BaselineArgs bl;
  auto* base_cmd = app.add_subcommand("baseline", "PSO or sampling search at a fixed hour");
  add_common(base_cmd, bl.scenario, bl.out_dir, bl.irradiance_csv, bl.load_seed_csv);
  base_cmd->add_option("--method", bl.method, "pso | brute")->check(CLI::IsMember({"pso", "brute"}))->capture_default_str();
  base_cmd->add_option("--hour", bl.hour, "Hour of year")->capture_default_str();
  base_cmd->add_option("--seed", bl.seed, "Seed for the hour's loads and the search")->capture_default_str();
  base_cmd->add_option("--particles", bl.particles, "PSO particles")->capture_default_str();
  base_cmd->add_option("--iters", bl.iters, "PSO iterations")->capture_default_str();
  base_cmd->add_option("--budget", bl.budget, "Sampling budget")->capture_default_str();
  base_cmd->add_option("--mode", bl.mode, "auto | random | exhaustive")
      ->check(CLI::IsMember({"auto", "random", "exhaustive"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*pf_cmd) return cmd_pf(pf);
    if (*place_cmd) return cmd_place(place);
    if (*train_cmd) {
      if (*o_actors) tr.overrides.push_back([=](RuntimeConfig& c) { c.num_actors = actors; });
      if (*o_steps) tr.overrides.push_back([=](RuntimeConfig& c) { c.total_env_steps = steps; });
      if (*o_seed) tr.overrides.push_back([=](RuntimeConfig& c) { c.seed = seed; });
      if (*o_hidden) tr.overrides.push_back([=](RuntimeConfig& c) { c.hidden = hidden; });
      if (*o_batch) tr.overrides.push_back([=](RuntimeConfig& c) { c.train_batch_size = batch; });
      if (*o_fragment) tr.overrides.push_back([=](RuntimeConfig& c) { c.rollout_fragment_length = fragment; });
      if (*o_queue) tr.overrides.push_back([=](RuntimeConfig& c) { c.learner_queue_capacity = queue; });
      if (*o_lr) tr.overrides.push_back([=](RuntimeConfig& c) { c.learning_rate = lr; });
      if (*o_entropy) tr.overrides.push_back([=](RuntimeConfig& c) { c.vtrace.entropy_coef = entropy; });
      if (*o_sync) tr.overrides.push_back([=](RuntimeConfig& c) { c.sync = sync; });
      return cmd_train(tr);
    }
    if (*eval_cmd) return cmd_eval(ev);
    if (*base_cmd) return cmd_baseline(bl);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitUsage;
}
