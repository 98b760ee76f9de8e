#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lwir/dataset.hpp"
#include "lwir/spectral.hpp"

namespace lwir {

/// Inclusive, evenly spaced search temperatures.
struct TemperatureGrid {
  double t_min = 280.0;
  double t_max = 320.0;
  double step = 5.0;

  static TemperatureGrid fine() { return {270.0, 320.0, 1.0}; }
  /// "min:max:step", e.g. "280:320:5". Throws ConfigError.
  static TemperatureGrid parse(const std::string& text);
  /// Throws ConfigError unless 0 < t_min < t_max and step > 0.
  void validate() const;
  std::vector<double> values() const;
  std::string to_string() const;
};

/// At-sensor radiance and the three atmospheric terms for one observation.
struct TesInput {
  Eigen::VectorXd total;
  Eigen::VectorXd down;
  Eigen::VectorXd up;
  Eigen::VectorXd tau;

  /// Ground-truth components of a simulated record.
  static TesInput from_record(const SampleRecord& r);
};

/// Inverted emissivity. Flagged bands hold NaN and valid[i] == false.
struct EmissivityEstimate {
  Eigen::VectorXd values;
  std::vector<bool> valid;
  int valid_count = 0;
};

inline constexpr double kMinRetrievalTau = 1e-6;
inline constexpr double kMinRetrievalDenominator = 1e-12;

/// eps = ((L - L_up) / tau - L_down) / (B(T) - L_down), unclipped. Bands with
/// tau < 1e-6 or |B(T) - L_down| < 1e-12 are flagged. Throws DataError when
/// every band is flagged.
EmissivityEstimate invert_emissivity(const TesInput& in, double temperature,
                                     const SpectralGrid& grid = SpectralGrid::standard());

/// Band subset used by the error criteria, in micrometres (inclusive).
struct BandWindow {
  double lo_um = 0.0;
  double hi_um = 1e9;

  static BandWindow full() { return {}; }
  /// 8.5 - 12.5 um, clear of the strongest absorption.
  static BandWindow restricted() { return {8.5, 12.5}; }
  bool contains(double lambda_um) const { return lambda_um >= lo_um && lambda_um <= hi_um; }
};

/// Mean |e_hat - ref| over valid bands inside the window; NaN when none.
double emissivity_mae(const EmissivityEstimate& e, double ref, BandWindow w = {},
                      const SpectralGrid& grid = SpectralGrid::standard());
double emissivity_mae(const EmissivityEstimate& e, const Spectrum& ref, BandWindow w = {},
                      const SpectralGrid& grid = SpectralGrid::standard());

/// Mean |norm(e_hat) - norm(ref)| with both sides min-max normalised over the
/// valid bands. A scalar reference normalises to 0.5 everywhere. nullopt when
/// e_hat has fewer than two distinct valid values.
std::optional<double> norm_mae(const EmissivityEstimate& e, double ref, BandWindow w = {},
                               const SpectralGrid& grid = SpectralGrid::standard());
std::optional<double> norm_mae(const EmissivityEstimate& e, const Spectrum& ref, BandWindow w = {},
                               const SpectralGrid& grid = SpectralGrid::standard());

enum class TesCriterion { mae, mae_plus_norm_mae };
std::string to_string(TesCriterion c);
/// "mae", "mae_plus_norm_mae" (also "mae+norm").
TesCriterion parse_tes_criterion(const std::string& s);

struct TesRow {
  double temperature = 0.0;
  double mae = 0.0;
  double norm_mae = 0.0;  // NaN when flagged
  double score = 0.0;     // NaN when the inversion was degenerate
};

struct TesResult {
  double t_hat = 0.0;
  EmissivityEstimate emissivity;
  std::vector<TesRow> table;
};

/// Inverts at every grid temperature and keeps the argmin of the criterion
/// against the scalar eps_bar (ties go to the lower temperature). When
/// Norm_MAE is flagged the score falls back to MAE alone. Throws DataError if
/// every temperature is degenerate or eps_bar is outside (0, 1).
TesResult grid_search_temperature(const TesInput& in, double eps_bar, const TemperatureGrid& grid,
                                  TesCriterion criterion, BandWindow w = {},
                                  const SpectralGrid& sgrid = SpectralGrid::standard());

/// One temperature for a whole set of observations: MAE averaged over the
/// observations, Norm_MAE computed once over all their valid bands jointly.
struct JointTesResult {
  double t_hat = 0.0;
  std::vector<TesRow> table;
};
JointTesResult grid_search_temperature_joint(std::span<const TesInput> inputs, double eps_bar,
                                             const TemperatureGrid& grid, TesCriterion criterion,
                                             BandWindow w = {},
                                             const SpectralGrid& sgrid = SpectralGrid::standard());

struct DeviationPoint {
  double delta_t = 0.0;
  double mean_mae = 0.0;
};

/// Mean MAE of eps_hat(T_true + dT) against the true emissivity over the
/// inputs, which must share T_true. Degenerate inversions are skipped.
std::vector<DeviationPoint> deviation_curve(std::span<const TesInput> inputs, const Spectrum& truth,
                                            double t_true, const std::vector<double>& deltas,
                                            BandWindow w = {},
                                            const SpectralGrid& grid = SpectralGrid::standard());

}  // namespace lwir
