#include "lwir/pipeline.hpp"

#include <algorithm>
#include <sstream>

#include "lwir/errors.hpp"
#include "lwir/hash.hpp"

namespace lwir {
namespace {

template <typename T>
std::string join(const std::vector<T>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ',';
    if constexpr (std::is_floating_point_v<T>) {
      os << format_double(v[i]);
    } else {
      os << v[i];
    }
  }
  return os.str();
}

}  // namespace

SimulateConfig SimulateConfig::desk() {
  SimulateConfig c;
  c.material_ids = desk_material_ids();
  c.sweep = SweepSpec::desk({300.0, 310.0});
  return c;
}

SimulateConfig SimulateConfig::full() {
  SimulateConfig c;
  for (int i = 0; i < 29; ++i) c.material_ids.push_back(i);
  return c;
}

SimulateConfig SimulateConfig::from_config(const KeyValueConfig& c) {
  c.require_known({"preset", "seed", "material_seed", "materials", "angle_stride", "range_stride", "temperatures",
                   "field", "field.n_pixels", "field.labeled_fraction", "field.noise_sigma",
                   "field.perturbation_scale", "field.temperature", "field.material"},
                  {"atmosphere."});
  const std::string preset = c.get_or("preset", "desk");
  SimulateConfig s;
  if (preset == "desk") {
    s = desk();
  } else if (preset == "full") {
    s = full();
  } else {
    throw ConfigError("unknown preset '" + preset + "' (expected desk or full)");
  }
  s.seed = static_cast<std::uint64_t>(c.get_int_or("seed", static_cast<std::int64_t>(s.seed)));
  s.material_seed = static_cast<std::uint64_t>(c.get_int_or("material_seed", static_cast<std::int64_t>(s.material_seed)));
  if (c.has("materials")) {
    s.material_ids.clear();
    for (double d : c.get_doubles("materials")) {
      const int id = static_cast<int>(d);
      if (id != d || id < 0 || id >= 29) throw ConfigError("materials: invalid id '" + format_double(d) + "'");
      s.material_ids.push_back(id);
    }
  }
  s.sweep.angle_stride = static_cast<int>(c.get_int_or("angle_stride", s.sweep.angle_stride));
  s.sweep.range_stride = static_cast<int>(c.get_int_or("range_stride", s.sweep.range_stride));
  if (c.has("temperatures")) s.sweep.temperatures = c.get_doubles("temperatures");
  s.field = c.get_bool_or("field", s.field);
  s.field_spec.n_pixels = static_cast<int>(c.get_int_or("field.n_pixels", s.field_spec.n_pixels));
  s.field_spec.labeled_fraction = c.get_double_or("field.labeled_fraction", s.field_spec.labeled_fraction);
  s.field_spec.noise_sigma = c.get_double_or("field.noise_sigma", s.field_spec.noise_sigma);
  s.field_spec.perturbation_scale = c.get_double_or("field.perturbation_scale", s.field_spec.perturbation_scale);
  s.field_temperature = c.get_double_or("field.temperature", s.field_temperature);
  s.field_material = static_cast<int>(c.get_int_or("field.material", s.field_material));

  const auto atm = c.with_prefix("atmosphere.");
  if (!atm.entries().empty()) {
    // Start from the defaults and override what the file names.
    auto merged = s.atmosphere.to_config();
    for (const auto& [k, v] : atm.entries()) merged.set(k, v);
    s.atmosphere = AtmosphereModel::from_config(merged);
  }

  if (s.material_ids.empty()) throw ConfigError("materials: at least one material is required");
  if (s.sweep.angle_stride <= 0 || s.sweep.range_stride <= 0) throw ConfigError("sweep strides must be positive");
  if (s.sweep.temperatures.empty()) throw ConfigError("temperatures: at least one temperature is required");
  for (double t : s.sweep.temperatures) {
    if (!(t > 0.0)) throw ConfigError("temperatures must be positive");
  }
  if (s.field) {
    if (s.field_spec.n_pixels <= 0) throw ConfigError("field.n_pixels must be positive");
    if (!(s.field_spec.labeled_fraction >= 0.0 && s.field_spec.labeled_fraction <= 1.0)) {
      throw ConfigError("field.labeled_fraction must be in [0, 1]");
    }
    if (!(s.field_spec.noise_sigma >= 0.0)) throw ConfigError("field.noise_sigma must be non-negative");
    if (!(s.field_spec.perturbation_scale >= 0.0)) throw ConfigError("field.perturbation_scale must be non-negative");
    if (!(s.field_temperature > 0.0)) throw ConfigError("field.temperature must be positive");
    if (s.field_material < 0 || s.field_material >= 29) throw ConfigError("field.material: invalid id");
  }
  return s;
}

KeyValueConfig SimulateConfig::to_config() const {
  KeyValueConfig c;
  c.set("seed", std::to_string(seed));
  c.set("material_seed", std::to_string(material_seed));
  c.set("materials", join(material_ids));
  c.set("angle_stride", std::to_string(sweep.angle_stride));
  c.set("range_stride", std::to_string(sweep.range_stride));
  c.set("temperatures", join(sweep.temperatures));
  c.set("field", field ? "true" : "false");
  c.set("field.n_pixels", std::to_string(field_spec.n_pixels));
  c.set("field.labeled_fraction", format_double(field_spec.labeled_fraction));
  c.set("field.noise_sigma", format_double(field_spec.noise_sigma));
  c.set("field.perturbation_scale", format_double(field_spec.perturbation_scale));
  c.set("field.temperature", format_double(field_temperature));
  c.set("field.material", std::to_string(field_material));
  const auto atm = atmosphere.to_config();
  for (const auto& [k, v] : atm.entries()) c.add("atmosphere." + k, v);
  return c;
}

SimulatedData simulate(const SimulateConfig& cfg) {
  const auto& grid = SpectralGrid::standard();
  const auto library = build_material_library(cfg.material_seed, grid);
  std::vector<MaterialSpec> chosen;
  for (int id : cfg.material_ids) chosen.push_back(library.at(static_cast<std::size_t>(id)));

  const std::string cfg_hash = hex64(fnv1a(cfg.to_config().to_text()));
  SimulatedData out;
  out.simulated.material_seed = cfg.material_seed;
  out.simulated.materials = library;
  out.simulated.records = generate_sweep(cfg.atmosphere, chosen, cfg.sweep, grid);
  out.simulated.metadata.set("kind", "simulated");
  out.simulated.metadata.set("config_hash", cfg_hash);
  out.simulated.metadata.set("materials", join(cfg.material_ids));
  const auto atm_cfg = cfg.atmosphere.to_config();
  for (const auto& [k, v] : atm_cfg.entries()) out.simulated.metadata.set("atmosphere." + k, v);

  if (cfg.field) {
    Dataset f;
    f.material_seed = cfg.material_seed;
    f.materials = library;
    f.records = generate_field_like(cfg.atmosphere, cfg.field_spec, library.at(static_cast<std::size_t>(cfg.field_material)),
                                    cfg.field_temperature, cfg.seed, grid);
    f.metadata.set("kind", "field_like");
    f.metadata.set("config_hash", cfg_hash);
    f.metadata.set("seed", std::to_string(cfg.seed));
    f.metadata.set("noise_sigma", format_double(cfg.field_spec.noise_sigma));
    f.metadata.set("perturbation_scale", format_double(cfg.field_spec.perturbation_scale));
    out.field = std::move(f);
  }
  return out;
}

PreparedData prepare_training(const Dataset& simulated, const Dataset* field, std::uint64_t split_seed) {
  PreparedData p;
  p.sim_split = split(simulated.records.size(), split_seed);
  p.stats = compute_norm_stats(select(simulated.records, p.sim_split.train));
  p.set.sim_train = make_loss_samples(select(simulated.records, p.sim_split.train), simulated.materials, p.stats);
  p.set.sim_val = make_loss_samples(select(simulated.records, p.sim_split.validation), simulated.materials, p.stats);
  if (field != nullptr) {
    p.field_split = split(field->records.size(), split_seed + 1);
    p.set.field_train = make_loss_samples(select(field->records, p.field_split->train), field->materials, p.stats);
    p.set.field_val = make_loss_samples(select(field->records, p.field_split->validation), field->materials, p.stats);
  }
  return p;
}

}  // namespace lwir
