#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <vector>

namespace vvo {

inline constexpr int kHoursPerYear = 8760;

/// Hourly exogenous drivers for one year: solar irradiance in [0, 1] and an
/// optional per-hour seed that pins the load-factor draw for that hour.
class ExogenousProfile {
 public:
  /// Seeded clear-sky generator: max(0, sin(pi (h mod 24 - 6) / 12)) times a
  /// per-day cloud factor drawn uniformly from [0.6, 1.0].
  static ExogenousProfile synthetic(std::uint64_t seed);

  /// Noon-peaked sinusoid without clouds; exactly 0 from 18:00 to 06:00.
  static double clear_sky(int hour);

  double irradiance(int hour) const;
  std::optional<std::uint64_t> load_seed(int hour) const;

  /// Replaces irradiance for the hours listed in a (hour, irradiance) CSV.
  void override_irradiance(const std::filesystem::path& csv);
  /// Pins load-factor draws for the hours listed in a (hour, load_factor_seed) CSV.
  void override_load_seeds(const std::filesystem::path& csv);

  void set_irradiance(int hour, double value);

 private:
  std::vector<double> irradiance_;
  std::vector<std::optional<std::uint64_t>> load_seed_;
};

/// Multiplicative demand factors, Gaussian(1, sigma) truncated below at 0.
std::vector<double> sample_load_factors(std::size_t n_loads, double sigma, std::mt19937_64& rng);

/// Load factors for `hour`: drawn from the profile's pinned seed when present,
/// otherwise from `rng`.
std::vector<double> hour_load_factors(const ExogenousProfile& profile, int hour, std::size_t n_loads,
                                      double sigma, std::mt19937_64& rng);

}  // namespace vvo
