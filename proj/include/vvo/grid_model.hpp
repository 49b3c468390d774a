#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace vvo {

/// Raised when a scenario file cannot be parsed.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a parsed scenario violates a network invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class BusType { Slack, Load };

struct Bus {
  std::string id;
  double base_kv = 4.16;
  BusType type = BusType::Load;
  int phases = 3;
  // Voltage magnitude held at the slack bus; ignored for load buses.
  double v_set_pu = 1.0;
};

struct Line {
  std::string from_bus;
  std::string to_bus;
  double resistance_pu = 0.0;
  double reactance_pu = 0.0;
  double shunt_susceptance_pu = 0.0;
};

/// Series impedance with an ideal off-nominal tap on the regulated (to) side.
/// Position `index` in [0, num_positions) maps affinely onto [tap_min_pu, tap_max_pu].
struct Transformer {
  std::string from_bus;
  std::string to_bus;
  double tap_min_pu = 0.9;
  double tap_max_pu = 1.1;
  int num_positions = 33;
  double resistance_pu = 0.0;
  double reactance_pu = 0.01;

  int neutral_index() const { return (num_positions - 1) / 2; }
};

struct Capacitor {
  std::string bus;
  double rated_kvar = 0.0;
  int status = 0;
};

struct PvSystem {
  std::string bus;
  double pmpp_kw = 100.0;
  double p_min_kw = 0.0;
  double p_max_kw = 100.0;
  double q_min_kvar = -44.0;
  double q_max_kvar = 44.0;
};

struct Battery {
  std::string bus;
  double p_min_kw = -50.0;
  double p_max_kw = 50.0;
};

struct Load {
  std::string bus;
  double base_p_kw = 0.0;
  double base_q_kvar = 0.0;
};

/// Scenario-level knobs that are not part of the electrical model.
struct ScenarioOptions {
  // Weights of the planning objective alpha * N_con + beta * V_vio.
  double objective_alpha = 0.0;
  double objective_beta = 1.0;
  // Standard deviation of the per-load Gaussian demand factor.
  double load_sigma = 0.1;
  // Seed of the synthetic irradiance generator (per-day cloud factors).
  std::uint64_t profile_seed = 2024;
};

/// Immutable per-unit model of a radial feeder. Construct through `make_network`
/// or `load_network`, both of which validate every invariant.
class FeederNetwork {
 public:
  std::vector<Bus> buses;
  std::vector<Line> lines;
  std::vector<Transformer> transformers;
  std::vector<Capacitor> capacitors;
  std::vector<PvSystem> pvs;
  std::vector<Battery> batteries;
  std::vector<Load> loads;
  double mva_base = 1.0;
  ScenarioOptions options;

  std::size_t num_buses() const { return buses.size(); }
  std::size_t slack_index() const { return slack_; }
  /// Index of a bus id; throws ValidationError for an unknown id.
  std::size_t bus_index(const std::string& id) const;
  bool has_bus(const std::string& id) const { return index_.count(id) != 0; }

  /// kW or kvar on the system base.
  double to_pu(double kilo) const { return kilo / (mva_base * 1000.0); }
  double from_pu(double pu) const { return pu * mva_base * 1000.0; }

  bool operator==(const FeederNetwork& other) const;

 private:
  friend FeederNetwork make_network(FeederNetwork raw);
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t slack_ = 0;
};

/// Validates a network assembled in code and builds its bus index.
FeederNetwork make_network(FeederNetwork raw);

FeederNetwork network_from_json(const nlohmann::json& j);
nlohmann::json network_to_json(const FeederNetwork& net);

/// Reads and validates a JSON scenario file.
FeederNetwork load_network(const std::filesystem::path& path);
void save_network(const FeederNetwork& net, const std::filesystem::path& path);

/// Turns ratio of tap position `index`; throws std::out_of_range outside
/// [0, num_positions).
double tap_ratio(const Transformer& t, int index);

/// Stable 64-bit FNV-1a digest of the canonical JSON form.
std::uint64_t scenario_hash(const FeederNetwork& net);

}  // namespace vvo
