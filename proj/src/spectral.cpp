#include "lwir/spectral.hpp"

#include <cmath>
#include <string>

#include "lwir/errors.hpp"

namespace lwir {
namespace {

// Output unit conversion: W m^-2 sr^-1 m^-1 -> W cm^-2 sr^-1 um^-1.
constexpr double kSiToOutput = 1e-10;

constexpr double kC1 = 2.0 * constants::planck * constants::speed_of_light * constants::speed_of_light;
constexpr double kC2 = constants::planck * constants::speed_of_light / constants::boltzmann;

void require_same_size(const Spectrum& a, const Spectrum& b, const char* what) {
  if (a.size() != b.size()) {
    throw DataError(std::string("spectrum length mismatch: ") + what);
  }
}

}  // namespace

SpectralGrid::SpectralGrid(double first_um, double step_um, std::size_t count)
    : first_(first_um), step_(step_um), wavelengths_(count) {
  if (!(step_um > 0.0) || !(first_um > 0.0) || count == 0) {
    throw DomainError("spectral grid needs a positive start, step and count");
  }
  for (std::size_t i = 0; i < count; ++i) {
    wavelengths_[i] = first_um + static_cast<double>(i) * step_um;
  }
}

const SpectralGrid& SpectralGrid::standard() {
  static const SpectralGrid grid(kFirstUm, kStepUm, kBands);
  return grid;
}

std::size_t SpectralGrid::nearest_band(double um) const {
  double pos = std::round((um - first_) / step_);
  if (pos < 0.0) return 0;
  if (pos >= static_cast<double>(size())) return size() - 1;
  return static_cast<std::size_t>(pos);
}

double planck_radiance(double lambda_um, double temperature_k) {
  if (!(lambda_um > 0.0) || !(temperature_k > 0.0)) {
    throw DomainError("planck_radiance requires positive wavelength and temperature");
  }
  const double lambda_m = lambda_um * 1e-6;
  const double l5 = lambda_m * lambda_m * lambda_m * lambda_m * lambda_m;
  return kC1 / (l5 * std::expm1(kC2 / (lambda_m * temperature_k))) * kSiToOutput;
}

Spectrum planck_spectrum(const SpectralGrid& grid, double temperature_k) {
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) v[i] = planck_radiance(grid[i], temperature_k);
  return Spectrum(std::move(v), SpectrumUnit::radiance);
}

Spectrum planck_spectrum_extended(const SpectralGrid& grid, double temperature_k) {
  if (temperature_k == 0.0) return Spectrum::constant(grid.size(), 0.0, SpectrumUnit::radiance);
  return planck_spectrum(grid, temperature_k);
}

double inverse_planck(double lambda_um, double radiance) {
  if (!(radiance > 0.0) || !(lambda_um > 0.0)) {
    throw DomainError("inverse_planck requires positive wavelength and radiance");
  }
  const double lambda_m = lambda_um * 1e-6;
  const double l5 = lambda_m * lambda_m * lambda_m * lambda_m * lambda_m;
  const double si = radiance / kSiToOutput;
  return kC2 / (lambda_m * std::log1p(kC1 / (l5 * si)));
}

void require_unit_interval(const Spectrum& s, const char* what) {
  for (double v : s.values()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw DataError(std::string(what) + " must lie in [0, 1]");
    }
  }
}

Spectrum surface_emitted_at_sensor(const Spectrum& eps, double temperature_k, const Spectrum& tau,
                                   const SpectralGrid& grid) {
  if (eps.size() != grid.size()) throw DataError("emissivity does not match the spectral grid");
  require_same_size(eps, tau, "tau");
  require_unit_interval(eps, "emissivity");
  require_unit_interval(tau, "transmission");
  const Spectrum bb = planck_spectrum_extended(grid, temperature_k);
  std::vector<double> out(grid.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = eps[i] * bb[i] * tau[i];
  return Spectrum(std::move(out), SpectrumUnit::radiance);
}

Spectrum at_sensor_radiance(const Spectrum& eps, double temperature_k, const Spectrum& tau,
                            const Spectrum& l_down, const Spectrum& l_up, const SpectralGrid& grid) {
  require_same_size(eps, l_down, "downwelling");
  require_same_size(eps, l_up, "upwelling");
  const Spectrum emitted = surface_emitted_at_sensor(eps, temperature_k, tau, grid);
  std::vector<double> out(grid.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (1.0 - eps[i]) * l_down[i] * tau[i] + emitted[i] + l_up[i];
  }
  return Spectrum(std::move(out), SpectrumUnit::radiance);
}

}  // namespace lwir
