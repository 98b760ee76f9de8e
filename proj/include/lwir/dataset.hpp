#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lwir/atmosphere.hpp"
#include "lwir/config.hpp"
#include "lwir/spectral.hpp"

namespace lwir {

enum class MaterialClass : std::uint8_t { high_emissivity, metal, smooth, jagged };

const char* to_string(MaterialClass c);

struct MaterialSpec {
  int id = 0;
  std::string name;
  MaterialClass material_class = MaterialClass::smooth;
  Spectrum emissivity;
  double eps_bar = 0.0;  // mean of `emissivity` over all bands
};

/// Synthetic library of 29 materials: ids 0-2 near-blackbody (grass, water,
/// snow), 3-5 metal-like (aluminium-like with eps_bar 0.174, oxidised, polished),
/// 6-23 smooth multi-feature spectra, 24-28 jagged spectra.
std::vector<MaterialSpec> build_material_library(std::uint64_t seed,
                                                 const SpectralGrid& grid = SpectralGrid::standard());

/// Fingerprint of a material library (ids, names, classes and spectra).
std::uint64_t material_library_hash(std::span<const MaterialSpec> materials);

/// 18-material desk subset: two of each of the high-emissivity, metal and
/// jagged classes plus twelve smooth spectra.
std::vector<int> desk_material_ids();

inline constexpr int kGrassMaterialId = 0;
inline constexpr double kTauFloor = 1e-6;
inline constexpr double kFieldDefaultTemperature = 285.0;

enum class Source : std::uint8_t { simulated, field_like };

/// Radiative components a record may carry, in on-disk order.
enum class Component : std::uint8_t { tau, down, up, emit, total };
inline constexpr std::array<Component, 5> kAllComponents{Component::tau, Component::down, Component::up,
                                                         Component::emit, Component::total};
const char* to_string(Component c);

/// One observation. Simulated records carry every component; field-like
/// records carry only the at-sensor radiance and, when labelled, the target
/// temperature and material. Reading a withheld quantity throws
/// WithheldComponentError.
class SampleRecord {
 public:
  static SampleRecord simulated(Geometry geometry, int material_id, double temperature, Spectrum tau,
                                Spectrum down, Spectrum up, Spectrum emit, Spectrum total);
  /// Pass material_id < 0 / no temperature for an unlabelled pixel.
  static SampleRecord field_like(Geometry geometry, int material_id, std::optional<double> temperature,
                                 Spectrum total);

  const Geometry& geometry() const noexcept { return geometry_; }
  Source source() const noexcept { return source_; }
  bool labeled() const noexcept { return labeled_; }
  int material_id() const;
  double temperature() const;

  bool has(Component c) const noexcept { return components_[index(c)].has_value(); }
  const Spectrum& component(Component c) const;
  const Spectrum& tau() const { return component(Component::tau); }
  const Spectrum& down() const { return component(Component::down); }
  const Spectrum& up() const { return component(Component::up); }
  const Spectrum& emit() const { return component(Component::emit); }
  const Spectrum& total() const { return component(Component::total); }

  bool operator==(const SampleRecord&) const = default;

 private:
  friend class DatasetCodec;
  static constexpr std::size_t index(Component c) { return static_cast<std::size_t>(c); }

  Geometry geometry_;
  int material_id_ = -1;
  double temperature_ = 0.0;
  bool labeled_ = false;
  Source source_ = Source::simulated;
  std::array<std::optional<Spectrum>, 5> components_;
};

/// Max absolute deviation of a simulated record from the composition
/// L = (1 - eps) L_down tau + L_emit + L_up.
double composition_residual(const SampleRecord& r, const Spectrum& emissivity);

struct Dataset {
  std::uint64_t material_seed = 42;
  std::vector<MaterialSpec> materials;
  std::vector<SampleRecord> records;
  /// Free-form provenance (seeds, atmosphere, generator settings); written to
  /// the manifest under a "meta." prefix.
  KeyValueConfig metadata;

  const MaterialSpec& material(int id) const;
};

using RecordRefs = std::vector<const SampleRecord*>;
RecordRefs refs(const std::vector<SampleRecord>& records);
RecordRefs select(const std::vector<SampleRecord>& records, std::span<const std::size_t> indices);

// ---------------------------------------------------------------------------
// Generation

struct SweepSpec {
  int angle_stride = 1;  // degrees between 30 and 60
  int range_stride = 1;  // in units of 100 m between 3000 and 6500
  std::vector<double> temperatures{295, 300, 305, 310, 315, 320};

  /// Every fifth angle and range: 7 x 8 = 56 geometries.
  static SweepSpec desk(std::vector<double> temperatures);
  std::vector<Geometry> geometries() const;
};

/// One simulated record per (material, angle, range, temperature), in that
/// nesting order.
std::vector<SampleRecord> generate_sweep(const AtmosphereModel& atm,
                                         std::span<const MaterialSpec> materials, const SweepSpec& sweep,
                                         const SpectralGrid& grid = SpectralGrid::standard());

/// Simulated record for a single observation (components from the simulator,
/// composed radiance from the spectral core).
SampleRecord simulate_sample(const AtmosphereModel& atm, const Geometry& geom,
                             const MaterialSpec& material, double temperature,
                             const SpectralGrid& grid = SpectralGrid::standard());

struct FieldLikeSpec {
  double perturbation_scale = 0.1;
  double noise_sigma = 0.002;
  int n_pixels = 600;
  double labeled_fraction = 1.0;
  double min_angle = 30.0;
  double max_angle = 60.0;
  double min_range = 3600.0;
  double max_range = 6150.0;
};

/// Copy of `base` with absorber strengths scaled by (1 + scale z) and the
/// surface air temperature shifted by 10 K * scale * z, z ~ N(0, 1).
AtmosphereModel perturb_atmosphere(const AtmosphereModel& base, double scale, std::uint64_t seed);

/// Pixels observed under a perturbed atmosphere with multiplicative radiance
/// noise. Only the at-sensor radiance is retained.
std::vector<SampleRecord> generate_field_like(const AtmosphereModel& atm_base, const FieldLikeSpec& spec,
                                              const MaterialSpec& material, double temperature,
                                              std::uint64_t seed,
                                              const SpectralGrid& grid = SpectralGrid::standard());

// ---------------------------------------------------------------------------
// Normalisation

struct ValueRange {
  double min;
  double max;
  double span() const { return max - min; }
  bool operator==(const ValueRange&) const = default;
};

/// Global min/max per radiance component. Transmission (and emissivity) are
/// never rescaled.
struct NormalizationStats {
  std::optional<ValueRange> total;
  std::optional<ValueRange> down;
  std::optional<ValueRange> up;
  std::optional<ValueRange> emit;

  /// Reference values published with the original MODTRAN training set.
  static NormalizationStats reference_table();

  const ValueRange& range(Component c) const;
  void validate() const;
  KeyValueConfig to_config() const;
  static NormalizationStats from_config(const KeyValueConfig& cfg);
  bool operator==(const NormalizationStats&) const = default;
};

/// Min/max over all bands of all simulated records. Throws DataError when
/// there is no simulated record.
NormalizationStats compute_norm_stats(const RecordRefs& records);

/// (x - min) / (max - min); identity for Component::tau. Values outside the
/// training range map outside [0, 1] and are not clipped.
Spectrum normalize(const Spectrum& x, const NormalizationStats& stats, Component c);
Spectrum denormalize(const Spectrum& y, const NormalizationStats& stats, Component c);

// ---------------------------------------------------------------------------
// Splits

/// 80 / 20 train+validation / test, then 90 / 10 of the first part.
struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

/// Seeded shuffled partition of [0, n). Throws DataError for n < 10.
DatasetSplit split(std::size_t n, std::uint64_t seed);

// ---------------------------------------------------------------------------
// File I/O
//
// "LWIRDS1\n", u64 manifest length, manifest text (key = value lines),
// u64 record count, then per record (little endian):
//   f64 range_m, f64 angle_deg, i32 material_id, f64 temperature, u8 flags,
//   and for every component present (tau, down, up, emit, total order)
//   256 x f64.
// flags: bit 0 labelled, bit 1 field-like, bits 2-6 component presence.

void write_dataset(const Dataset& ds, const std::string& path);
Dataset read_dataset(const std::string& path);

/// FNV-1a of the file bytes, as recorded in run manifests.
std::uint64_t file_hash(const std::string& path);

}  // namespace lwir
