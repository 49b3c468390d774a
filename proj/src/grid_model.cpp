#include "vvo/grid_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

namespace vvo {

using nlohmann::json;

std::size_t FeederNetwork::bus_index(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw ValidationError("unknown bus id '" + id + "'");
  return it->second;
}

bool FeederNetwork::operator==(const FeederNetwork& other) const {
  return network_to_json(*this) == network_to_json(other);
}

namespace {

void require(bool cond, const std::string& what) {
  if (!cond) throw ValidationError(what);
}

void require_bus(const FeederNetwork& net, const std::string& id, const std::string& who) {
  require(net.has_bus(id), who + " references unknown bus '" + id + "'");
}

}  // namespace

FeederNetwork make_network(FeederNetwork net) {
  require(!net.buses.empty(), "network has no buses");
  require(net.mva_base > 0.0, "mva_base must be positive");

  net.index_.clear();
  std::size_t slack_count = 0;
  for (std::size_t i = 0; i < net.buses.size(); ++i) {
    const auto& b = net.buses[i];
    require(!b.id.empty(), "bus id must be non-empty");
    require(net.index_.emplace(b.id, i).second, "ids unique: duplicate bus id '" + b.id + "'");
    if (b.type == BusType::Slack) {
      ++slack_count;
      net.slack_ = i;
    }
    require(b.base_kv > 0.0, "bus '" + b.id + "' base_kv must be positive");
    require(b.v_set_pu > 0.0, "bus '" + b.id + "' v_set_pu must be positive");
  }
  require(slack_count == 1, "exactly one slack bus required, found " + std::to_string(slack_count));

  const std::size_t n = net.buses.size();
  std::vector<std::vector<std::size_t>> adj(n);
  auto add_edge = [&](const std::string& f, const std::string& t, const std::string& who) {
    require_bus(net, f, who);
    require_bus(net, t, who);
    require(f != t, who + " connects bus '" + f + "' to itself");
    adj[net.index_.at(f)].push_back(net.index_.at(t));
    adj[net.index_.at(t)].push_back(net.index_.at(f));
  };

  for (const auto& l : net.lines) {
    const std::string who = "line " + l.from_bus + "-" + l.to_bus;
    require(l.resistance_pu >= 0.0, who + " has negative resistance");
    require(l.resistance_pu != 0.0 || l.reactance_pu != 0.0, who + " has zero impedance");
    add_edge(l.from_bus, l.to_bus, who);
  }
  for (const auto& t : net.transformers) {
    const std::string who = "transformer " + t.from_bus + "-" + t.to_bus;
    require(t.resistance_pu >= 0.0, who + " has negative resistance");
    require(t.resistance_pu != 0.0 || t.reactance_pu != 0.0, who + " has zero impedance");
    require(t.tap_min_pu > 0.0 && t.tap_min_pu < t.tap_max_pu, who + " has invalid tap range");
    require(t.num_positions >= 2, who + " needs at least two tap positions");
    add_edge(t.from_bus, t.to_bus, who);
  }

  require(net.lines.size() + net.transformers.size() == n - 1,
          "network not radial: " + std::to_string(net.lines.size() + net.transformers.size()) +
              " branches for " + std::to_string(n) + " buses");

  std::vector<bool> seen(n, false);
  std::queue<std::size_t> frontier;
  frontier.push(net.slack_);
  seen[net.slack_] = true;
  std::size_t reached = 1;
  while (!frontier.empty()) {
    auto u = frontier.front();
    frontier.pop();
    for (auto v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        ++reached;
        frontier.push(v);
      }
    }
  }
  require(reached == n, "network not radial: not every bus is reachable from the slack");

  for (const auto& c : net.capacitors) {
    require_bus(net, c.bus, "capacitor");
    require(c.status == 0 || c.status == 1, "capacitor status must be 0 or 1");
    require(c.rated_kvar >= 0.0, "capacitor rating must be non-negative");
  }
  for (const auto& p : net.pvs) {
    require_bus(net, p.bus, "pv");
    require(p.p_min_kw <= p.p_max_kw, "pv at '" + p.bus + "' has p_min > p_max");
    require(p.q_min_kvar <= p.q_max_kvar, "pv at '" + p.bus + "' has q_min > q_max");
    require(p.pmpp_kw >= 0.0, "pv at '" + p.bus + "' has negative pmpp");
  }
  for (const auto& b : net.batteries) {
    require_bus(net, b.bus, "battery");
    require(b.p_min_kw <= 0.0 && 0.0 <= b.p_max_kw,
            "battery at '" + b.bus + "' must satisfy p_min <= 0 <= p_max");
  }
  for (const auto& l : net.loads) {
    require_bus(net, l.bus, "load");
    require(l.base_p_kw >= 0.0, "load at '" + l.bus + "' has negative base_p_kw");
  }
  require(net.options.load_sigma >= 0.0, "load_sigma must be non-negative");
  return net;
}

double tap_ratio(const Transformer& t, int index) {
  if (index < 0 || index >= t.num_positions)
    throw std::out_of_range("tap index " + std::to_string(index) + " outside [0, " +
                            std::to_string(t.num_positions - 1) + "]");
  // lerp is exact at both endpoints and monotone in between.
  const double frac = static_cast<double>(index) / static_cast<double>(t.num_positions - 1);
  return std::lerp(t.tap_min_pu, t.tap_max_pu, frac);
}

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  return it == j.end() ? fallback : it->get<T>();
}

BusType parse_bus_type(const std::string& s) {
  if (s == "slack") return BusType::Slack;
  if (s == "load") return BusType::Load;
  throw ParseError("unknown bus type '" + s + "'");
}

}  // namespace

FeederNetwork network_from_json(const json& j) {
  FeederNetwork net;
  try {
    net.mva_base = j.at("mva_base").get<double>();
    for (const auto& b : j.at("buses")) {
      Bus bus;
      bus.id = b.at("id").get<std::string>();
      bus.base_kv = get_or(b, "base_kv", bus.base_kv);
      bus.type = parse_bus_type(get_or<std::string>(b, "bus_type", "load"));
      bus.phases = get_or(b, "phases", bus.phases);
      bus.v_set_pu = get_or(b, "v_set_pu", bus.v_set_pu);
      net.buses.push_back(std::move(bus));
    }
    for (const auto& l : j.value("lines", json::array())) {
      net.lines.push_back({l.at("from_bus").get<std::string>(), l.at("to_bus").get<std::string>(),
                           l.at("resistance_pu").get<double>(), l.at("reactance_pu").get<double>(),
                           get_or(l, "shunt_susceptance_pu", 0.0)});
    }
    for (const auto& t : j.value("transformers", json::array())) {
      Transformer tr;
      tr.from_bus = t.at("from_bus").get<std::string>();
      tr.to_bus = t.at("to_bus").get<std::string>();
      tr.tap_min_pu = get_or(t, "tap_min_pu", tr.tap_min_pu);
      tr.tap_max_pu = get_or(t, "tap_max_pu", tr.tap_max_pu);
      tr.num_positions = get_or(t, "num_positions", tr.num_positions);
      tr.resistance_pu = t.at("resistance_pu").get<double>();
      tr.reactance_pu = t.at("reactance_pu").get<double>();
      net.transformers.push_back(tr);
    }
    for (const auto& c : j.value("capacitors", json::array()))
      net.capacitors.push_back({c.at("bus").get<std::string>(), c.at("rated_kvar").get<double>(),
                                get_or(c, "status", 0)});
    for (const auto& p : j.value("pvs", json::array())) {
      PvSystem pv;
      pv.bus = p.at("bus").get<std::string>();
      pv.pmpp_kw = p.at("pmpp_kw").get<double>();
      pv.p_min_kw = get_or(p, "p_min_kw", 0.0);
      pv.p_max_kw = get_or(p, "p_max_kw", pv.pmpp_kw);
      pv.q_min_kvar = p.at("q_min_kvar").get<double>();
      pv.q_max_kvar = p.at("q_max_kvar").get<double>();
      net.pvs.push_back(pv);
    }
    for (const auto& b : j.value("batteries", json::array()))
      net.batteries.push_back(
          {b.at("bus").get<std::string>(), b.at("p_min_kw").get<double>(), b.at("p_max_kw").get<double>()});
    for (const auto& l : j.value("loads", json::array()))
      net.loads.push_back({l.at("bus").get<std::string>(), l.at("base_p_kw").get<double>(),
                           get_or(l, "base_q_kvar", 0.0)});
    if (auto it = j.find("options"); it != j.end()) {
      net.options.objective_alpha = get_or(*it, "objective_alpha", net.options.objective_alpha);
      net.options.objective_beta = get_or(*it, "objective_beta", net.options.objective_beta);
      net.options.load_sigma = get_or(*it, "load_sigma", net.options.load_sigma);
      net.options.profile_seed = get_or(*it, "profile_seed", net.options.profile_seed);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed scenario: ") + e.what());
  }
  return make_network(std::move(net));
}

json network_to_json(const FeederNetwork& net) {
  json j;
  j["mva_base"] = net.mva_base;
  j["buses"] = json::array();
  for (const auto& b : net.buses)
    j["buses"].push_back({{"id", b.id},
                          {"base_kv", b.base_kv},
                          {"bus_type", b.type == BusType::Slack ? "slack" : "load"},
                          {"phases", b.phases},
                          {"v_set_pu", b.v_set_pu}});
  j["lines"] = json::array();
  for (const auto& l : net.lines)
    j["lines"].push_back({{"from_bus", l.from_bus},
                          {"to_bus", l.to_bus},
                          {"resistance_pu", l.resistance_pu},
                          {"reactance_pu", l.reactance_pu},
                          {"shunt_susceptance_pu", l.shunt_susceptance_pu}});
  j["transformers"] = json::array();
  for (const auto& t : net.transformers)
    j["transformers"].push_back({{"from_bus", t.from_bus},
                                 {"to_bus", t.to_bus},
                                 {"tap_min_pu", t.tap_min_pu},
                                 {"tap_max_pu", t.tap_max_pu},
                                 {"num_positions", t.num_positions},
                                 {"resistance_pu", t.resistance_pu},
                                 {"reactance_pu", t.reactance_pu}});
  j["capacitors"] = json::array();
  for (const auto& c : net.capacitors)
    j["capacitors"].push_back({{"bus", c.bus}, {"rated_kvar", c.rated_kvar}, {"status", c.status}});
  j["pvs"] = json::array();
  for (const auto& p : net.pvs)
    j["pvs"].push_back({{"bus", p.bus},
                        {"pmpp_kw", p.pmpp_kw},
                        {"p_min_kw", p.p_min_kw},
                        {"p_max_kw", p.p_max_kw},
                        {"q_min_kvar", p.q_min_kvar},
                        {"q_max_kvar", p.q_max_kvar}});
  j["batteries"] = json::array();
  for (const auto& b : net.batteries)
    j["batteries"].push_back({{"bus", b.bus}, {"p_min_kw", b.p_min_kw}, {"p_max_kw", b.p_max_kw}});
  j["loads"] = json::array();
  for (const auto& l : net.loads)
    j["loads"].push_back({{"bus", l.bus}, {"base_p_kw", l.base_p_kw}, {"base_q_kvar", l.base_q_kvar}});
  j["options"] = {{"objective_alpha", net.options.objective_alpha},
                  {"objective_beta", net.options.objective_beta},
                  {"load_sigma", net.options.load_sigma},
                  {"profile_seed", net.options.profile_seed}};
  return j;
}

FeederNetwork load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ParseError("malformed scenario '" + path.string() + "': " + e.what());
  }
  return network_from_json(j);
}

void save_network(const FeederNetwork& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << network_to_json(net).dump(2) << '\n';
}

std::uint64_t scenario_hash(const FeederNetwork& net) {
  const std::string text = network_to_json(net).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace vvo
