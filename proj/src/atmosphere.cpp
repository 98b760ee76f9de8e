#include "lwir/atmosphere.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "lwir/errors.hpp"

namespace lwir {
namespace {

constexpr double kDiffusivityAngleDeg = 53.0;

double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

void check_path(double range_m, double angle_deg) {
  if (!(range_m >= 0.0) || !(angle_deg > 0.0 && angle_deg <= 90.0)) {
    throw DomainError("slant path needs range >= 0 and elevation in (0, 90] deg");
  }
}

}  // namespace

void Geometry::validate() const {
  if (!in_domain()) {
    throw DomainError("geometry outside the simulation domain: range " + std::to_string(range_m) +
                      " m, angle " + std::to_string(angle_deg) + " deg");
  }
}

AtmosphereModel AtmosphereModel::default_model() {
  AtmosphereModel atm;
  atm.band_absorbers = {
      // water-vapour-like complex
      {7.50, 0.30, 1.40},
      {7.95, 0.15, 0.45},
      {8.30, 0.12, 0.20},
      // CO2-like complex
      {13.60, 0.45, 1.60},
      {12.95, 0.20, 0.40},
      {12.50, 0.12, 0.15},
  };
  return atm;
}

void AtmosphereModel::validate() const {
  if (n_layers <= 0) throw DomainError("atmosphere needs at least one layer");
  if (!(absorber_scale_height > 0.0)) throw DomainError("absorber scale height must be positive");
  if (!(continuum_extinction >= 0.0)) throw DomainError("continuum extinction must be >= 0");
  for (const auto& b : band_absorbers) {
    if (!(b.peak_per_km >= 0.0)) throw DomainError("absorber peak extinction must be >= 0");
    if (!(b.width_um > 0.0)) throw DomainError("absorber width must be positive");
  }
  if (!(temperature_at(0.0) > 0.0) || !(temperature_at(kColumnTopKm) > 0.0)) {
    throw DomainError("layer temperatures must stay positive over the column");
  }
}

KeyValueConfig AtmosphereModel::to_config() const {
  KeyValueConfig cfg;
  cfg.add("n_layers", std::to_string(n_layers));
  cfg.add("surface_air_temp", format_double(surface_air_temp));
  cfg.add("lapse_rate", format_double(lapse_rate));
  cfg.add("absorber_scale_height", format_double(absorber_scale_height));
  cfg.add("continuum_extinction", format_double(continuum_extinction));
  cfg.add("rng_seed", std::to_string(rng_seed));
  for (const auto& b : band_absorbers) {
    cfg.add("band_absorber", format_double(b.center_um) + ", " + format_double(b.width_um) + ", " +
                                 format_double(b.peak_per_km));
  }
  return cfg;
}

AtmosphereModel AtmosphereModel::from_config(const KeyValueConfig& cfg) {
  cfg.require_known({"n_layers", "surface_air_temp", "lapse_rate", "absorber_scale_height",
                     "continuum_extinction", "rng_seed", "band_absorber", "band_absorbers"});
  AtmosphereModel atm = default_model();
  atm.n_layers = static_cast<int>(cfg.get_int_or("n_layers", atm.n_layers));
  atm.surface_air_temp = cfg.get_double_or("surface_air_temp", atm.surface_air_temp);
  atm.lapse_rate = cfg.get_double_or("lapse_rate", atm.lapse_rate);
  atm.absorber_scale_height = cfg.get_double_or("absorber_scale_height", atm.absorber_scale_height);
  atm.continuum_extinction = cfg.get_double_or("continuum_extinction", atm.continuum_extinction);
  atm.rng_seed = static_cast<std::uint64_t>(cfg.get_int_or("rng_seed", 0));
  // "band_absorbers = none" clears the default list.
  if (cfg.has("band_absorbers")) {
    if (cfg.get("band_absorbers") != "none") {
      throw ConfigError("band_absorbers only accepts 'none'; list features with band_absorber");
    }
    atm.band_absorbers.clear();
  }
  const auto bands = cfg.get_all("band_absorber");
  if (!bands.empty()) {
    atm.band_absorbers.clear();
    for (const auto& text : bands) {
      const auto v = parse_double_list(text, "band_absorber");
      if (v.size() != 3) throw ConfigError("band_absorber expects 'center, width, peak'");
      atm.band_absorbers.push_back({v[0], v[1], v[2]});
    }
  }
  atm.validate();
  return atm;
}

std::vector<double> extinction_profile(const AtmosphereModel& atm, const SpectralGrid& grid) {
  std::vector<double> k(grid.size(), atm.continuum_extinction);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (const auto& b : atm.band_absorbers) {
      const double x = (grid[i] - b.center_um) / b.width_um;
      k[i] += b.peak_per_km * std::exp(-0.5 * x * x);
    }
  }
  return k;
}

Spectrum slant_transmission(const AtmosphereModel& atm, double range_m, double angle_deg,
                            const SpectralGrid& grid) {
  check_path(range_m, angle_deg);
  const double sin_el = std::sin(deg_to_rad(angle_deg));
  const double h = atm.absorber_scale_height;
  const double top_km = range_m * 1e-3 * sin_el;
  // Absorber amount along the path: integral of exp(-s sin / H) ds.
  const double path_column = -h / sin_el * std::expm1(-top_km / h);
  const auto k = extinction_profile(atm, grid);
  std::vector<double> tau(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) tau[i] = std::exp(-k[i] * path_column);
  return Spectrum(std::move(tau), SpectrumUnit::dimensionless);
}

Spectrum transmission(const AtmosphereModel& atm, const Geometry& geom, const SpectralGrid& grid) {
  geom.validate();
  return slant_transmission(atm, geom.range_m, geom.angle_deg, grid);
}

Spectrum slant_upwelling(const AtmosphereModel& atm, double range_m, double angle_deg, int n_layers,
                         const SpectralGrid& grid) {
  check_path(range_m, angle_deg);
  if (n_layers <= 0) throw DomainError("upwelling needs at least one layer");
  const double sin_el = std::sin(deg_to_rad(angle_deg));
  const double h = atm.absorber_scale_height;
  const double range_km = range_m * 1e-3;
  const double top_km = range_km * sin_el;
  const double ds = range_km / n_layers;
  const double top_density = std::exp(-top_km / h);
  const auto k = extinction_profile(atm, grid);

  std::vector<double> up(grid.size(), 0.0);
  for (int l = 0; l < n_layers; ++l) {
    const double z = (l + 0.5) * top_km / n_layers;
    const double density = std::exp(-z / h);
    // Absorber between this slab and the sensor.
    const double above = h / sin_el * (density - top_density);
    const double temp = atm.temperature_at(z);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      up[i] += k[i] * density * planck_radiance(grid[i], temp) * std::exp(-k[i] * above) * ds;
    }
  }
  return Spectrum(std::move(up), SpectrumUnit::radiance);
}

Spectrum upwelling(const AtmosphereModel& atm, const Geometry& geom, const SpectralGrid& grid) {
  geom.validate();
  return slant_upwelling(atm, geom.range_m, geom.angle_deg, atm.n_layers, grid);
}

double effective_column_temperature(const AtmosphereModel& atm) {
  const double dz = AtmosphereModel::kColumnTopKm / atm.n_layers;
  double weighted = 0.0;
  double total = 0.0;
  for (int l = 0; l < atm.n_layers; ++l) {
    const double z = (l + 0.5) * dz;
    const double density = std::exp(-z / atm.absorber_scale_height);
    weighted += density * atm.temperature_at(z);
    total += density;
  }
  return weighted / total;
}

Spectrum downwelling(const AtmosphereModel& atm, const SpectralGrid& grid) {
  const double t_eff = effective_column_temperature(atm);
  const double sec = 1.0 / std::cos(deg_to_rad(kDiffusivityAngleDeg));
  const auto k = extinction_profile(atm, grid);
  std::vector<double> down(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double emissivity = -std::expm1(-sec * k[i] * atm.absorber_scale_height);
    down[i] = emissivity * planck_radiance(grid[i], t_eff);
  }
  return Spectrum(std::move(down), SpectrumUnit::radiance);
}

}  // namespace lwir
