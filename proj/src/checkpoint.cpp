#include "vvo/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

namespace vvo {

using nlohmann::json;

void save_checkpoint(const std::filesystem::path& path, const PolicyParameters& params, const ActionSpace& space) {
  json j;
  j["format"] = "vvo-policy-v1";
  j["version"] = params.version;
  j["descriptor_hash"] = descriptor_hash(space);
  j["layout"] = {{"obs_dim", params.layout.obs_dim},
                 {"hidden", params.layout.hidden},
                 {"n_continuous", params.layout.n_continuous},
                 {"cardinalities", params.layout.cardinalities}};
  j["weights"] = std::vector<double>(params.flat.data(), params.flat.data() + params.flat.size());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path.string() + "'");
  out << j.dump() << '\n';
}

PolicyParameters load_checkpoint(const std::filesystem::path& path, const ActionSpace& space) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed checkpoint '" + path.string() + "': " + e.what());
  }
  if (j.value("format", "") != "vvo-policy-v1") throw std::runtime_error("unknown checkpoint format");
  if (j.at("descriptor_hash").get<std::uint64_t>() != descriptor_hash(space))
    throw CheckpointMismatch("checkpoint descriptor hash does not match the scenario");

  PolicyParameters p;
  const auto& l = j.at("layout");
  p.layout.obs_dim = l.at("obs_dim").get<int>();
  p.layout.hidden = l.at("hidden").get<int>();
  p.layout.n_continuous = l.at("n_continuous").get<int>();
  p.layout.cardinalities = l.at("cardinalities").get<std::vector<int>>();
  if (p.layout.obs_dim != space.obs_dim || p.layout.n_continuous != space.n_continuous ||
      p.layout.cardinalities != space.discrete_cardinalities)
    throw CheckpointMismatch("checkpoint layout does not match the scenario");
  const auto w = j.at("weights").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(w.size()) != p.layout.size())
    throw std::runtime_error("checkpoint weight count does not match its layout");
  p.flat = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  p.version = j.at("version").get<std::uint64_t>();
  return p;
}

}  // namespace vvo
