#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace lwir {

// Fixed constants of the radiometric model. These are deliberately not the
// CODATA values; every reference number in the tests is computed with them.
namespace constants {
inline constexpr double planck = 6.6256e-34;         // J s
inline constexpr double speed_of_light = 2.998e8;    // m s^-1
inline constexpr double boltzmann = 1.381e-23;       // J K^-1
}  // namespace constants

/// Band centres of the sensor in micrometres.
class SpectralGrid {
 public:
  static constexpr std::size_t kBands = 256;
  static constexpr double kFirstUm = 7.5;
  static constexpr double kStepUm = 0.0234;

  /// The 256-band 7.5 - 13.47 um grid every spectrum in the toolkit uses.
  static const SpectralGrid& standard();

  /// Uniform grid; used for small test miniatures.
  SpectralGrid(double first_um, double step_um, std::size_t count);

  std::size_t size() const noexcept { return wavelengths_.size(); }
  double operator[](std::size_t i) const { return wavelengths_[i]; }
  std::span<const double> wavelengths() const noexcept { return wavelengths_; }
  double first() const noexcept { return first_; }
  double step() const noexcept { return step_; }

  /// Index of the band whose centre is closest to `um`.
  std::size_t nearest_band(double um) const;

  bool operator==(const SpectralGrid& other) const noexcept {
    return first_ == other.first_ && step_ == other.step_ && size() == other.size();
  }

 private:
  double first_;
  double step_;
  std::vector<double> wavelengths_;
};

enum class SpectrumUnit { radiance, dimensionless };

/// Values on a spectral grid. Radiances are W cm^-2 sr^-1 um^-1.
class Spectrum {
 public:
  Spectrum() = default;
  Spectrum(std::vector<double> values, SpectrumUnit unit) : values_(std::move(values)), unit_(unit) {}
  static Spectrum constant(std::size_t n, double value, SpectrumUnit unit) {
    return Spectrum(std::vector<double>(n, value), unit);
  }

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  const std::vector<double>& vec() const noexcept { return values_; }
  SpectrumUnit unit() const noexcept { return unit_; }

  bool operator==(const Spectrum&) const = default;

 private:
  std::vector<double> values_;
  SpectrumUnit unit_ = SpectrumUnit::radiance;
};

/// Blackbody spectral radiance in W cm^-2 sr^-1 um^-1. Throws DomainError
/// unless both arguments are positive.
double planck_radiance(double lambda_um, double temperature_k);

/// planck_radiance applied to every band of `grid`.
Spectrum planck_spectrum(const SpectralGrid& grid, double temperature_k);

/// As planck_spectrum but extended continuously to T = 0 (the zero spectrum),
/// which is how a masked "false target" is evaluated.
Spectrum planck_spectrum_extended(const SpectralGrid& grid, double temperature_k);

/// Brightness temperature: the T for which planck_radiance(lambda_um, T) == L.
double inverse_planck(double lambda_um, double radiance);

/// L = (1 - eps) L_down tau + eps B(T) tau + L_up, bandwise.
Spectrum at_sensor_radiance(const Spectrum& eps, double temperature_k, const Spectrum& tau,
                            const Spectrum& l_down, const Spectrum& l_up,
                            const SpectralGrid& grid = SpectralGrid::standard());

/// eps B(T) tau, bandwise.
Spectrum surface_emitted_at_sensor(const Spectrum& eps, double temperature_k, const Spectrum& tau,
                                   const SpectralGrid& grid = SpectralGrid::standard());

/// Throws DataError unless every value lies in [0, 1].
void require_unit_interval(const Spectrum& s, const char* what);

}  // namespace lwir
