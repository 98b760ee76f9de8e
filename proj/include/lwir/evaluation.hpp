#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lwir/atmosphere.hpp"
#include "lwir/dataset.hpp"
#include "lwir/network.hpp"
#include "lwir/rng.hpp"

namespace lwir {

/// Atmospheric terms predicted for one geometry, in physical units.
struct ComponentPrediction {
  Eigen::VectorXd down;
  Eigen::VectorXd up;
  Eigen::VectorXd tau;
};

using Predictor = std::function<std::vector<ComponentPrediction>(std::span<const Geometry>)>;

/// Inference-mode network predictions, de-normalised. Geometries are cut into
/// fixed 64-sample batches that `workers` threads pick up by index, so the
/// output does not depend on the worker count.
std::vector<ComponentPrediction> predict_components(const HybridNetwork& net, const NormalizationStats& stats,
                                                    std::span<const Geometry> geoms, int workers = 1);
Predictor network_predictor(const HybridNetwork& net, const NormalizationStats& stats, int workers = 1);
/// The simulator itself (a perfect predictor).
Predictor simulator_predictor(const AtmosphereModel& atm, const SpectralGrid& grid = SpectralGrid::standard());

std::vector<Geometry> geometries_of(const RecordRefs& records);

enum class TargetMode { true_target, false_target };
std::string to_string(TargetMode m);

struct ErrorCell {
  double truth_mean = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
};

/// Per-component error statistics in physical units, indexed by Component.
struct ComponentErrorTable {
  TargetMode mode = TargetMode::true_target;
  std::size_t records = 0;
  std::array<ErrorCell, 5> cells{};

  const ErrorCell& operator[](Component c) const { return cells[static_cast<std::size_t>(c)]; }
};

/// Predicted terms for simulated records. L_emit and L_total are recomposed
/// from the prediction with the record's emissivity and temperature (true
/// mode) or with eps = 0, T = 0 (false mode). Throws DataError for records
/// without components or a prediction count mismatch.
ComponentErrorTable component_errors(std::span<const ComponentPrediction> predictions, const RecordRefs& records,
                                     std::span<const MaterialSpec> materials, TargetMode mode,
                                     const SpectralGrid& grid = SpectralGrid::standard());

/// Both target modes side by side, as CSV:
/// component,truth_mean_true,mae_true,rmse_true,truth_mean_false,mae_false,rmse_false
std::string error_tables_csv(const ComponentErrorTable& true_mode, const ComponentErrorTable& false_mode);

enum class FixedAxis { range, angle };

/// Wavelength x geometry grids for one component; rows follow `axis`.
struct ResidualField {
  Component component = Component::tau;
  FixedAxis fixed = FixedAxis::range;
  double fixed_value = 0.0;
  std::vector<double> axis;  // angles (deg) when range is fixed, ranges (m) otherwise
  Eigen::MatrixXd truth;
  Eigen::MatrixXd predicted;
  Eigen::MatrixXd residual;  // truth - predicted
};

/// Every component over the sweep with one coordinate fixed (range 5000 m
/// or angle 30 deg by default); angles step 1 deg, ranges 100 m.
std::vector<ResidualField> residual_fields(const Predictor& predict, const AtmosphereModel& atm,
                                           const MaterialSpec& material, double temperature, FixedAxis fixed,
                                           double fixed_value, const SpectralGrid& grid = SpectralGrid::standard());
double default_fixed_value(FixedAxis fixed);

/// Long format: x (um), y (deg or m), series (truth/predicted/residual), value.
std::string residual_field_csv(const ResidualField& f, const SpectralGrid& grid = SpectralGrid::standard());

/// Fraction of per-pixel MAEs strictly below each threshold.
std::vector<double> purity_classification(std::span<const double> pixel_mae,
                                          std::span<const double> thresholds = std::array{0.02, 0.01});

/// Per-band T(lambda) = inverse_planck(lambda, L_emit / tau / eps); NaN where
/// eps <= 0, tau < 1e-6 or the radiance is not positive.
struct BlackbodyTemperature {
  Eigen::VectorXd kelvin;
  std::vector<bool> valid;
};
BlackbodyTemperature equivalent_blackbody_temperature(const Spectrum& emit, const Spectrum& tau, const Spectrum& eps,
                                                      const SpectralGrid& grid = SpectralGrid::standard());

struct BlackbodySummary {
  std::vector<double> per_record_mae;  // over valid bands, against the true T
  Eigen::VectorXd per_band_mae;        // over records; NaN where no record is valid
};
BlackbodySummary summarize_blackbody(std::span<const BlackbodyTemperature> temps, std::span<const double> true_t);

/// Copy of `s` with every band scaled by (1 + sigma z), z ~ N(0, 1).
Spectrum with_multiplicative_noise(const Spectrum& s, double sigma, Rng& rng);

/// Copy of `emit` plus sigma * L_total * z per band: relative noise on the
/// at-sensor radiance, attributed to the emitted term. Through the 1/tau in
/// the inversion this spreads T(lambda) most where the path is opaque.
Spectrum with_sensor_noise(const Spectrum& emit, const Spectrum& total, double sigma, Rng& rng);

/// Default relative radiance noise for the blackbody-temperature study.
inline constexpr double kDefaultEmitNoise = 0.003;

}  // namespace lwir
