#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lwir/atmosphere.hpp"
#include "lwir/config.hpp"
#include "lwir/dataset.hpp"
#include "lwir/training.hpp"

namespace lwir {

/// What `simulate` generates. Config keys (all optional):
///   preset = desk | full, seed, material_seed, materials (comma list of ids),
///   angle_stride, range_stride, temperatures (comma list),
///   field = true|false, field.n_pixels, field.labeled_fraction,
///   field.noise_sigma, field.perturbation_scale, field.temperature,
///   field.material, atmosphere.* (AtmosphereModel keys)
struct SimulateConfig {
  std::uint64_t seed = 42;
  std::uint64_t material_seed = 42;
  std::vector<int> material_ids;
  SweepSpec sweep;
  bool field = true;
  FieldLikeSpec field_spec;
  int field_material = kGrassMaterialId;
  double field_temperature = kFieldDefaultTemperature;
  AtmosphereModel atmosphere = AtmosphereModel::default_model();

  /// 18 materials x 56 geometries x {300, 310} K and 600 grass pixels.
  static SimulateConfig desk();
  /// Every material over the full 31 x 36 geometry grid at 295..320 K.
  static SimulateConfig full();
  static SimulateConfig from_config(const KeyValueConfig& c);
  KeyValueConfig to_config() const;
};

struct SimulatedData {
  Dataset simulated;
  std::optional<Dataset> field;
};

SimulatedData simulate(const SimulateConfig& cfg);

/// Splits, statistics and loss samples for a training run. Statistics come
/// from the simulated training split; only labelled field records train.
struct PreparedData {
  DatasetSplit sim_split;
  std::optional<DatasetSplit> field_split;
  NormalizationStats stats;
  TrainingSet set;
};

PreparedData prepare_training(const Dataset& simulated, const Dataset* field, std::uint64_t split_seed);

}  // namespace lwir
