#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lwir/config.hpp"
#include "lwir/spectral.hpp"

namespace lwir {

/// Sensor-target geometry: slant range and elevation angle of the line of
/// sight. The simulation domain is range 3000-6500 m, angle 30-60 deg.
struct Geometry {
  double range_m = 5000.0;
  double angle_deg = 45.0;

  static constexpr double kMinRange = 3000.0;
  static constexpr double kMaxRange = 6500.0;
  static constexpr double kMinAngle = 30.0;
  static constexpr double kMaxAngle = 60.0;

  bool in_domain() const noexcept {
    return range_m >= kMinRange && range_m <= kMaxRange && angle_deg >= kMinAngle &&
           angle_deg <= kMaxAngle;
  }
  /// Throws DomainError when outside the simulation domain.
  void validate() const;

  bool operator==(const Geometry&) const = default;
};

/// Gaussian absorption feature of the extinction spectrum.
struct AbsorberBand {
  double center_um;
  double width_um;     // standard deviation
  double peak_per_km;  // sea-level extinction at the centre
  bool operator==(const AbsorberBand&) const = default;
};

/// Plane-parallel atmosphere: absorber density decays exponentially with
/// height, temperature falls linearly with the lapse rate. Extinction at
/// height z is k(lambda) * exp(-z / absorber_scale_height).
struct AtmosphereModel {
  int n_layers = 40;
  double surface_air_temp = 308.0;    // K
  double lapse_rate = 0.25;           // K per km
  double absorber_scale_height = 2.0; // km
  std::vector<AbsorberBand> band_absorbers;
  double continuum_extinction = 0.05; // per km
  std::uint64_t rng_seed = 0;

  /// Water-vapour-like complex below 8.5 um, CO2-like complex above 12.2 um,
  /// flat continuum in the window.
  static AtmosphereModel default_model();

  /// Throws DomainError for negative extinctions, non-positive layer counts,
  /// scale heights, or layer temperatures.
  void validate() const;

  /// Highest altitude (km) any computation may evaluate a layer temperature at.
  static constexpr double kColumnTopKm = 16.0;

  double temperature_at(double altitude_km) const {
    return surface_air_temp - lapse_rate * altitude_km;
  }

  KeyValueConfig to_config() const;
  static AtmosphereModel from_config(const KeyValueConfig& cfg);

  bool operator==(const AtmosphereModel&) const = default;
};

/// Sea-level extinction coefficient per band (per km).
std::vector<double> extinction_profile(const AtmosphereModel& atm, const SpectralGrid& grid);

/// Target-to-sensor transmission along the slant line of sight.
Spectrum transmission(const AtmosphereModel& atm, const Geometry& geom, const SpectralGrid& grid);

/// As transmission() but accepts any range >= 0 and elevation in (0, 90].
Spectrum slant_transmission(const AtmosphereModel& atm, double range_m, double angle_deg,
                            const SpectralGrid& grid);

/// Path emission reaching the sensor (midpoint rule over n_layers slabs).
Spectrum upwelling(const AtmosphereModel& atm, const Geometry& geom, const SpectralGrid& grid);

/// As upwelling() without the domain check, with an explicit slab count.
Spectrum slant_upwelling(const AtmosphereModel& atm, double range_m, double angle_deg, int n_layers,
                         const SpectralGrid& grid);

/// Hemispheric sky radiance at the surface via the diffusivity approximation
/// (single effective zenith angle of 53 deg). Takes no geometry.
Spectrum downwelling(const AtmosphereModel& atm, const SpectralGrid& grid);

/// Absorber-weighted mean temperature of the column used by downwelling().
double effective_column_temperature(const AtmosphereModel& atm);

}  // namespace lwir
