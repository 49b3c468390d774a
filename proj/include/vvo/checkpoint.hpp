#pragma once

#include <filesystem>
#include <stdexcept>

#include "vvo/env.hpp"
#include "vvo/policy.hpp"

namespace vvo {

class CheckpointMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// JSON dump of the layout, version, descriptor hash and every weight.
void save_checkpoint(const std::filesystem::path& path, const PolicyParameters& params, const ActionSpace& space);

/// Loads a checkpoint, refusing one whose descriptor hash differs from `space`.
PolicyParameters load_checkpoint(const std::filesystem::path& path, const ActionSpace& space);

}  // namespace vvo
