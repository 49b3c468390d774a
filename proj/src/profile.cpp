#include "vvo/profile.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "vvo/csv.hpp"

namespace vvo {

namespace {

void check_hour(int hour) {
  if (hour < 0 || hour >= kHoursPerYear)
    throw std::out_of_range("hour " + std::to_string(hour) + " outside [0, 8760)");
}

}  // namespace

double ExogenousProfile::clear_sky(int hour) {
  const int h = ((hour % 24) + 24) % 24;
  if (h <= 6 || h >= 18) return 0.0;
  return std::max(0.0, std::sin(std::numbers::pi * (h - 6) / 12.0));
}

ExogenousProfile ExogenousProfile::synthetic(std::uint64_t seed) {
  ExogenousProfile p;
  p.irradiance_.resize(kHoursPerYear);
  p.load_seed_.assign(kHoursPerYear, std::nullopt);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> cloud(0.6, 1.0);
  for (int day = 0; day < kHoursPerYear / 24; ++day) {
    const double c = cloud(rng);
    for (int h = 0; h < 24; ++h) p.irradiance_[day * 24 + h] = clear_sky(h) * c;
  }
  return p;
}

double ExogenousProfile::irradiance(int hour) const {
  check_hour(hour);
  return irradiance_[hour];
}

std::optional<std::uint64_t> ExogenousProfile::load_seed(int hour) const {
  check_hour(hour);
  return load_seed_[hour];
}

void ExogenousProfile::set_irradiance(int hour, double value) {
  check_hour(hour);
  if (!(value >= 0.0 && value <= 1.0)) throw std::invalid_argument("irradiance must lie in [0, 1]");
  irradiance_[hour] = value;
}

void ExogenousProfile::override_irradiance(const std::filesystem::path& csv) {
  const auto t = read_csv(csv);
  const auto hc = t.column("hour");
  const auto ic = t.column("irradiance");
  for (const auto& r : t.rows) set_irradiance(std::stoi(r[hc]), std::stod(r[ic]));
}

void ExogenousProfile::override_load_seeds(const std::filesystem::path& csv) {
  const auto t = read_csv(csv);
  const auto hc = t.column("hour");
  const auto sc = t.column("load_factor_seed");
  for (const auto& r : t.rows) {
    const int h = std::stoi(r[hc]);
    check_hour(h);
    load_seed_[h] = std::stoull(r[sc]);
  }
}

std::vector<double> sample_load_factors(std::size_t n_loads, double sigma, std::mt19937_64& rng) {
  std::vector<double> f(n_loads, 1.0);
  if (sigma <= 0.0) return f;
  std::normal_distribution<double> g(1.0, sigma);
  for (auto& x : f) x = std::max(0.0, g(rng));
  return f;
}

std::vector<double> hour_load_factors(const ExogenousProfile& profile, int hour, std::size_t n_loads,
                                      double sigma, std::mt19937_64& rng) {
  if (auto pinned = profile.load_seed(hour)) {
    std::mt19937_64 local(*pinned);
    return sample_load_factors(n_loads, sigma, local);
  }
  return sample_load_factors(n_loads, sigma, rng);
}

}  // namespace vvo
