#include "lwir/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "lwir/errors.hpp"
#include "lwir/hash.hpp"
#include "lwir/rng.hpp"

namespace lwir {
namespace {

static_assert(std::endian::native == std::endian::little, "dataset I/O assumes a little-endian host");

constexpr char kMagic[8] = {'L', 'W', 'I', 'R', 'D', 'S', '1', '\n'};
constexpr int kFormatVersion = 1;
constexpr std::size_t kMaterialCount = 29;

double gauss(double x, double centre, double width) {
  const double u = (x - centre) / width;
  return std::exp(-0.5 * u * u);
}

Spectrum finish(std::vector<double> e) {
  for (double& v : e) v = std::clamp(v, 0.01, 0.995);
  return Spectrum(std::move(e), SpectrumUnit::dimensionless);
}

double mean_of(const Spectrum& s) {
  double acc = 0.0;
  for (double v : s.values()) acc += v;
  return acc / static_cast<double>(s.size());
}

// Near-blackbody: a small smooth wiggle around `level`.
Spectrum high_emissivity(Rng& rng, const SpectralGrid& grid, double level) {
  const double slope = rng.uniform(-0.004, 0.004);
  const double bump = rng.uniform(-0.008, 0.004);
  const double centre = rng.uniform(9.0, 12.0);
  std::vector<double> e(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    e[i] = level + slope * (grid[i] - 10.5) / 3.0 + bump * gauss(grid[i], centre, 0.6);
  }
  return finish(std::move(e));
}

// Low, gently sloped metal spectrum shifted so its mean is exactly `target`
// before clamping (the clamp never binds at these levels).
Spectrum metal(Rng& rng, const SpectralGrid& grid, double target, double feature) {
  const double slope = rng.uniform(0.005, 0.02);
  const double centre = rng.uniform(9.5, 11.5);
  std::vector<double> e(grid.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    e[i] = slope * (grid[i] - 10.5) / 3.0 + feature * gauss(grid[i], centre, 0.7);
    acc += e[i];
  }
  const double shift = target - acc / static_cast<double>(grid.size());
  for (double& v : e) v += shift;
  return finish(std::move(e));
}

void add_features(Rng& rng, const SpectralGrid& grid, std::vector<double>& e, int count) {
  for (int f = 0; f < count; ++f) {
    const double sign = rng.uniform() < 0.7 ? -1.0 : 1.0;
    const double amp = sign * rng.uniform(0.03, 0.15);
    const double centre = rng.uniform(7.8, 13.2);
    const double width = rng.uniform(0.15, 0.8);
    for (std::size_t i = 0; i < grid.size(); ++i) e[i] += amp * gauss(grid[i], centre, width);
  }
}

Spectrum smooth(Rng& rng, const SpectralGrid& grid) {
  std::vector<double> e(grid.size(), rng.uniform(0.82, 0.96));
  add_features(rng, grid, e, 2 + static_cast<int>(rng.below(4)));
  return finish(std::move(e));
}

// Smooth base plus AR(1) band-to-band roughness.
Spectrum jagged(Rng& rng, const SpectralGrid& grid) {
  std::vector<double> e(grid.size(), rng.uniform(0.80, 0.92));
  add_features(rng, grid, e, 2);
  const double sigma = rng.uniform(0.015, 0.03);
  double ar = 0.0;
  for (double& v : e) {
    ar = 0.3 * ar + sigma * rng.normal();
    v += ar;
  }
  return finish(std::move(e));
}

constexpr const char* kSmoothNames[18] = {
    "quartz-sand", "limestone", "granite",   "basalt",      "clay-soil", "loam",
    "concrete",    "asphalt",   "brick",     "roof-tile",   "painted-wood", "dry-bark",
    "gypsum",      "marble",    "sandy-loam", "shale",      "slate",     "fibreglass"};
constexpr const char* kJaggedNames[5] = {"quartzite", "feldspar", "calcite-crust", "silicate-crust",
                                         "synthetic-fabric"};

void write_bytes(std::ostream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void write_pod(std::ostream& out, T v) {
  write_bytes(out, &v, sizeof v);
}

template <typename T>
T read_pod(std::istream& in, const std::string& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw FormatError("truncated dataset file '" + path + "'");
  return v;
}

constexpr std::uint8_t kLabeledBit = 1;
constexpr std::uint8_t kFieldBit = 2;
constexpr std::uint8_t presence_bit(std::size_t c) { return static_cast<std::uint8_t>(4u << c); }

// Generated data never carries tau below the inversion floor.
Spectrum floored_transmission(const AtmosphereModel& atm, const Geometry& g, const SpectralGrid& grid) {
  Spectrum tau = transmission(atm, g, grid);
  for (double& v : tau.values()) v = std::max(v, kTauFloor);
  return tau;
}

}  // namespace

const char* to_string(MaterialClass c) {
  switch (c) {
    case MaterialClass::high_emissivity: return "high_emissivity";
    case MaterialClass::metal: return "metal";
    case MaterialClass::smooth: return "smooth";
    case MaterialClass::jagged: return "jagged";
  }
  return "?";
}

const char* to_string(Component c) {
  switch (c) {
    case Component::tau: return "tau";
    case Component::down: return "L_down";
    case Component::up: return "L_up";
    case Component::emit: return "L_emit";
    case Component::total: return "L_total";
  }
  return "?";
}

std::vector<MaterialSpec> build_material_library(std::uint64_t seed, const SpectralGrid& grid) {
  std::vector<MaterialSpec> lib;
  lib.reserve(kMaterialCount);
  auto push = [&](std::string name, MaterialClass cls, Spectrum e) {
    MaterialSpec m;
    m.id = static_cast<int>(lib.size());
    m.name = std::move(name);
    m.material_class = cls;
    m.eps_bar = mean_of(e);
    m.emissivity = std::move(e);
    lib.push_back(std::move(m));
  };
  auto rng_for = [&](std::size_t id) { return Rng::derived(seed, id); };

  {
    Rng r = rng_for(0);
    push("grass", MaterialClass::high_emissivity, high_emissivity(r, grid, 0.982));
  }
  {
    Rng r = rng_for(1);
    push("water", MaterialClass::high_emissivity, high_emissivity(r, grid, 0.986));
  }
  {
    Rng r = rng_for(2);
    push("snow", MaterialClass::high_emissivity, high_emissivity(r, grid, 0.975));
  }
  {
    Rng r = rng_for(3);
    push("aluminium", MaterialClass::metal, metal(r, grid, 0.174, 0.02));
  }
  {
    Rng r = rng_for(4);
    push("oxidised-steel", MaterialClass::metal, metal(r, grid, 0.11, 0.05));
  }
  {
    Rng r = rng_for(5);
    push("polished-metal", MaterialClass::metal, metal(r, grid, 0.04, 0.0));
  }
  for (const char* name : kSmoothNames) {
    Rng r = rng_for(lib.size());
    push(name, MaterialClass::smooth, smooth(r, grid));
  }
  for (const char* name : kJaggedNames) {
    Rng r = rng_for(lib.size());
    push(name, MaterialClass::jagged, jagged(r, grid));
  }
  return lib;
}

std::uint64_t material_library_hash(std::span<const MaterialSpec> materials) {
  Fnv1a h;
  for (const auto& m : materials) {
    h.update(std::to_string(m.id));
    h.update(m.name);
    h.update(to_string(m.material_class));
    for (double v : m.emissivity.values()) h.update(v);
  }
  return h.digest();
}

std::vector<int> desk_material_ids() {
  std::vector<int> ids{0, 1, 3, 4};
  for (int i = 6; i < 18; ++i) ids.push_back(i);
  ids.push_back(24);
  ids.push_back(25);
  return ids;
}

// ---------------------------------------------------------------------------

SampleRecord SampleRecord::simulated(Geometry geometry, int material_id, double temperature,
                                     Spectrum tau, Spectrum down, Spectrum up, Spectrum emit,
                                     Spectrum total) {
  SampleRecord r;
  r.geometry_ = geometry;
  r.material_id_ = material_id;
  r.temperature_ = temperature;
  r.labeled_ = true;
  r.source_ = Source::simulated;
  r.components_ = {std::move(tau), std::move(down), std::move(up), std::move(emit), std::move(total)};
  return r;
}

SampleRecord SampleRecord::field_like(Geometry geometry, int material_id,
                                      std::optional<double> temperature, Spectrum total) {
  SampleRecord r;
  r.geometry_ = geometry;
  r.source_ = Source::field_like;
  r.labeled_ = temperature.has_value() && material_id >= 0;
  r.material_id_ = r.labeled_ ? material_id : -1;
  r.temperature_ = r.labeled_ ? *temperature : 0.0;
  r.components_[index(Component::total)] = std::move(total);
  return r;
}

int SampleRecord::material_id() const {
  if (!labeled_) throw WithheldComponentError("material of an unlabelled field-like record is withheld");
  return material_id_;
}

double SampleRecord::temperature() const {
  if (!labeled_) {
    throw WithheldComponentError("temperature of an unlabelled field-like record is withheld");
  }
  return temperature_;
}

const Spectrum& SampleRecord::component(Component c) const {
  const auto& slot = components_[index(c)];
  if (!slot) {
    throw WithheldComponentError(std::string(to_string(c)) + " is withheld for field-like records");
  }
  return *slot;
}

double composition_residual(const SampleRecord& r, const Spectrum& emissivity) {
  const auto& tau = r.tau();
  const auto& down = r.down();
  const auto& up = r.up();
  const auto& emit = r.emit();
  const auto& total = r.total();
  double worst = 0.0;
  for (std::size_t i = 0; i < total.size(); ++i) {
    const double composed = (1.0 - emissivity[i]) * down[i] * tau[i] + emit[i] + up[i];
    worst = std::max(worst, std::abs(composed - total[i]));
  }
  return worst;
}

const MaterialSpec& Dataset::material(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= materials.size() || materials[id].id != id) {
    throw DataError("unknown material id " + std::to_string(id));
  }
  return materials[id];
}

RecordRefs refs(const std::vector<SampleRecord>& records) {
  RecordRefs out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(&r);
  return out;
}

RecordRefs select(const std::vector<SampleRecord>& records, std::span<const std::size_t> indices) {
  RecordRefs out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= records.size()) throw DataError("record index out of range");
    out.push_back(&records[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------

SweepSpec SweepSpec::desk(std::vector<double> temperatures) {
  return SweepSpec{5, 5, std::move(temperatures)};
}

std::vector<Geometry> SweepSpec::geometries() const {
  if (angle_stride <= 0 || range_stride <= 0) throw ConfigError("sweep strides must be positive");
  std::vector<Geometry> out;
  for (int a = 30; a <= 60; a += angle_stride) {
    for (int r = 30; r <= 65; r += range_stride) {
      out.push_back({r * 100.0, static_cast<double>(a)});
    }
  }
  return out;
}

SampleRecord simulate_sample(const AtmosphereModel& atm, const Geometry& geom,
                             const MaterialSpec& material, double temperature,
                             const SpectralGrid& grid) {
  Spectrum tau = floored_transmission(atm, geom, grid);
  Spectrum up = upwelling(atm, geom, grid);
  Spectrum down = downwelling(atm, grid);
  Spectrum emit = surface_emitted_at_sensor(material.emissivity, temperature, tau, grid);
  Spectrum total = at_sensor_radiance(material.emissivity, temperature, tau, down, up, grid);
  return SampleRecord::simulated(geom, material.id, temperature, std::move(tau), std::move(down),
                                 std::move(up), std::move(emit), std::move(total));
}

std::vector<SampleRecord> generate_sweep(const AtmosphereModel& atm,
                                         std::span<const MaterialSpec> materials, const SweepSpec& sweep,
                                         const SpectralGrid& grid) {
  atm.validate();
  const auto geoms = sweep.geometries();
  // Atmospheric components depend on geometry only.
  struct Path {
    Spectrum tau, up;
  };
  std::vector<Path> paths;
  paths.reserve(geoms.size());
  for (const auto& g : geoms) paths.push_back({floored_transmission(atm, g, grid), upwelling(atm, g, grid)});
  const Spectrum down = downwelling(atm, grid);

  std::vector<SampleRecord> out;
  out.reserve(materials.size() * geoms.size() * sweep.temperatures.size());
  for (const auto& m : materials) {
    for (std::size_t g = 0; g < geoms.size(); ++g) {
      const auto& p = paths[g];
      for (double t : sweep.temperatures) {
        Spectrum emit = surface_emitted_at_sensor(m.emissivity, t, p.tau, grid);
        Spectrum total = at_sensor_radiance(m.emissivity, t, p.tau, down, p.up, grid);
        out.push_back(
            SampleRecord::simulated(geoms[g], m.id, t, p.tau, down, p.up, std::move(emit), std::move(total)));
      }
    }
  }
  return out;
}

AtmosphereModel perturb_atmosphere(const AtmosphereModel& base, double scale, std::uint64_t seed) {
  if (!(scale >= 0.0)) throw DomainError("perturbation_scale must be >= 0");
  AtmosphereModel atm = base;
  Rng rng(seed);
  auto jitter = [&](double v) { return std::max(0.0, v * (1.0 + scale * rng.normal())); };
  for (auto& b : atm.band_absorbers) b.peak_per_km = jitter(b.peak_per_km);
  atm.continuum_extinction = jitter(atm.continuum_extinction);
  atm.surface_air_temp += 10.0 * scale * rng.normal();
  atm.rng_seed = seed;
  atm.validate();
  return atm;
}

std::vector<SampleRecord> generate_field_like(const AtmosphereModel& atm_base, const FieldLikeSpec& spec,
                                              const MaterialSpec& material, double temperature,
                                              std::uint64_t seed, const SpectralGrid& grid) {
  if (!(spec.noise_sigma >= 0.0)) throw DomainError("noise_sigma must be >= 0");
  if (spec.n_pixels < 0) throw DomainError("n_pixels must be >= 0");
  if (!(spec.labeled_fraction >= 0.0 && spec.labeled_fraction <= 1.0)) {
    throw DomainError("labeled_fraction must lie in [0, 1]");
  }
  const AtmosphereModel atm = perturb_atmosphere(atm_base, spec.perturbation_scale, Rng::derived(seed, 1).next_u64());
  const Spectrum down = downwelling(atm, grid);
  Rng rng = Rng::derived(seed, 2);

  const auto n = static_cast<std::size_t>(spec.n_pixels);
  const auto n_labeled = static_cast<std::size_t>(std::llround(spec.labeled_fraction * static_cast<double>(n)));
  std::vector<char> labeled(n, 0);
  std::fill_n(labeled.begin(), n_labeled, 1);
  rng.shuffle(labeled);

  std::vector<SampleRecord> out;
  out.reserve(n);
  for (std::size_t p = 0; p < n; ++p) {
    const Geometry g{rng.uniform(spec.min_range, spec.max_range), rng.uniform(spec.min_angle, spec.max_angle)};
    const Spectrum tau = floored_transmission(atm, g, grid);
    const Spectrum up = upwelling(atm, g, grid);
    Spectrum total = at_sensor_radiance(material.emissivity, temperature, tau, down, up, grid);
    if (spec.noise_sigma > 0.0) {
      for (double& v : total.values()) v *= 1.0 + spec.noise_sigma * rng.normal();
    }
    if (labeled[p]) {
      out.push_back(SampleRecord::field_like(g, material.id, temperature, std::move(total)));
    } else {
      out.push_back(SampleRecord::field_like(g, -1, std::nullopt, std::move(total)));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

NormalizationStats NormalizationStats::reference_table() {
  NormalizationStats s;
  s.total = ValueRange{3.656e-4, 1.344e-3};
  s.down = ValueRange{2.1833e-4, 1.01e-3};
  s.up = ValueRange{1.8016e-4, 7.106e-4};
  s.emit = ValueRange{3.544e-4, 1.116e-3};
  return s;
}

const ValueRange& NormalizationStats::range(Component c) const {
  const std::optional<ValueRange>* slot = nullptr;
  switch (c) {
    case Component::total: slot = &total; break;
    case Component::down: slot = &down; break;
    case Component::up: slot = &up; break;
    case Component::emit: slot = &emit; break;
    case Component::tau: throw DataError("transmission is not normalised");
  }
  if (!*slot) throw DataError(std::string("no normalisation stats for ") + to_string(c));
  return **slot;
}

void NormalizationStats::validate() const {
  for (Component c : {Component::total, Component::down, Component::up, Component::emit}) {
    const auto& r = range(c);
    if (!(std::isfinite(r.min) && std::isfinite(r.max) && r.max > r.min)) {
      throw DataError(std::string("normalisation range for ") + to_string(c) + " needs max > min");
    }
  }
}

KeyValueConfig NormalizationStats::to_config() const {
  KeyValueConfig cfg;
  for (Component c : {Component::total, Component::down, Component::up, Component::emit}) {
    const auto& r = range(c);
    cfg.add(std::string(to_string(c)) + ".min", format_double(r.min));
    cfg.add(std::string(to_string(c)) + ".max", format_double(r.max));
  }
  return cfg;
}

NormalizationStats NormalizationStats::from_config(const KeyValueConfig& cfg) {
  NormalizationStats s;
  auto get = [&](Component c) {
    const std::string k = to_string(c);
    return ValueRange{cfg.get_double(k + ".min"), cfg.get_double(k + ".max")};
  };
  s.total = get(Component::total);
  s.down = get(Component::down);
  s.up = get(Component::up);
  s.emit = get(Component::emit);
  s.validate();
  return s;
}

NormalizationStats compute_norm_stats(const RecordRefs& records) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::array<ValueRange, 5> acc;
  acc.fill(ValueRange{inf, -inf});
  bool any = false;
  for (const SampleRecord* r : records) {
    if (r->source() != Source::simulated) continue;
    any = true;
    for (Component c : {Component::total, Component::down, Component::up, Component::emit}) {
      auto& a = acc[static_cast<std::size_t>(c)];
      for (double v : r->component(c).values()) {
        a.min = std::min(a.min, v);
        a.max = std::max(a.max, v);
      }
    }
  }
  if (!any) throw DataError("normalisation stats need at least one simulated record");
  NormalizationStats s;
  s.total = acc[static_cast<std::size_t>(Component::total)];
  s.down = acc[static_cast<std::size_t>(Component::down)];
  s.up = acc[static_cast<std::size_t>(Component::up)];
  s.emit = acc[static_cast<std::size_t>(Component::emit)];
  return s;
}

Spectrum normalize(const Spectrum& x, const NormalizationStats& stats, Component c) {
  if (c == Component::tau) return x;
  const auto& r = stats.range(c);
  const double span = r.span();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = (x[i] - r.min) / span;
  return Spectrum(std::move(y), SpectrumUnit::dimensionless);
}

Spectrum denormalize(const Spectrum& y, const NormalizationStats& stats, Component c) {
  if (c == Component::tau) return y;
  const auto& r = stats.range(c);
  const double span = r.span();
  std::vector<double> x(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = y[i] * span + r.min;
  return Spectrum(std::move(x), SpectrumUnit::radiance);
}

// ---------------------------------------------------------------------------

DatasetSplit split(std::size_t n, std::uint64_t seed) {
  if (n < 10) throw DataError("split needs at least 10 records, got " + std::to_string(n));
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(idx);
  const auto n_test = static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n - n_test)));
  DatasetSplit s;
  s.test.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
  s.validation.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_test),
                      idx.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
  s.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_test + n_val), idx.end());
  return s;
}

// ---------------------------------------------------------------------------

class DatasetCodec {
 public:
  static void write_record(std::ostream& out, const SampleRecord& r) {
    write_pod(out, r.geometry_.range_m);
    write_pod(out, r.geometry_.angle_deg);
    write_pod(out, static_cast<std::int32_t>(r.material_id_));
    write_pod(out, r.labeled_ ? r.temperature_ : std::numeric_limits<double>::quiet_NaN());
    std::uint8_t flags = 0;
    if (r.labeled_) flags |= kLabeledBit;
    if (r.source_ == Source::field_like) flags |= kFieldBit;
    for (std::size_t c = 0; c < 5; ++c) {
      if (r.components_[c]) flags |= presence_bit(c);
    }
    write_pod(out, flags);
    for (const auto& slot : r.components_) {
      if (!slot) continue;
      if (slot->size() != SpectralGrid::kBands) throw DataError("record spectrum has the wrong band count");
      write_bytes(out, slot->vec().data(), SpectralGrid::kBands * sizeof(double));
    }
  }

  static SampleRecord read_record(std::istream& in, const std::string& path) {
    SampleRecord r;
    r.geometry_.range_m = read_pod<double>(in, path);
    r.geometry_.angle_deg = read_pod<double>(in, path);
    r.material_id_ = read_pod<std::int32_t>(in, path);
    r.temperature_ = read_pod<double>(in, path);
    const auto flags = read_pod<std::uint8_t>(in, path);
    if (flags & 0x80) throw FormatError("unknown record flag bits in '" + path + "'");
    r.labeled_ = (flags & kLabeledBit) != 0;
    r.source_ = (flags & kFieldBit) ? Source::field_like : Source::simulated;
    if (!r.labeled_) r.temperature_ = 0.0;
    for (std::size_t c = 0; c < 5; ++c) {
      if (!(flags & presence_bit(c))) continue;
      std::vector<double> v(SpectralGrid::kBands);
      in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
      if (!in) throw FormatError("truncated dataset file '" + path + "'");
      r.components_[c] = Spectrum(std::move(v), c == SampleRecord::index(Component::tau)
                                                    ? SpectrumUnit::dimensionless
                                                    : SpectrumUnit::radiance);
    }
    const bool complete = std::all_of(r.components_.begin(), r.components_.end(),
                                      [](const auto& s) { return s.has_value(); });
    const bool total_only = r.components_[SampleRecord::index(Component::total)].has_value() &&
                            std::count_if(r.components_.begin(), r.components_.end(),
                                          [](const auto& s) { return s.has_value(); }) == 1;
    if (r.source_ == Source::simulated ? !(complete && r.labeled_) : !total_only) {
      throw FormatError("record components inconsistent with its source in '" + path + "'");
    }
    return r;
  }
};

void write_dataset(const Dataset& ds, const std::string& path) {
  const auto& grid = SpectralGrid::standard();
  KeyValueConfig m;
  m.add("format", "LWIRDS1");
  m.add("version", std::to_string(kFormatVersion));
  m.add("grid_first_um", format_double(grid.first()));
  m.add("grid_step_um", format_double(grid.step()));
  m.add("grid_bands", std::to_string(grid.size()));
  m.add("material_seed", std::to_string(ds.material_seed));
  m.add("material_count", std::to_string(ds.materials.size()));
  m.add("material_hash", hex64(material_library_hash(ds.materials)));
  m.add("record_count", std::to_string(ds.records.size()));
  for (const auto& [k, v] : ds.metadata.entries()) m.add("meta." + k, v);
  const std::string manifest = m.to_text();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write dataset file '" + path + "'");
  write_bytes(out, kMagic, sizeof kMagic);
  write_pod(out, static_cast<std::uint64_t>(manifest.size()));
  write_bytes(out, manifest.data(), manifest.size());
  write_pod(out, static_cast<std::uint64_t>(ds.records.size()));
  for (const auto& r : ds.records) DatasetCodec::write_record(out, r);
  out.flush();
  if (!out) throw IoError("failed writing dataset file '" + path + "'");
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read dataset file '" + path + "'");
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw FormatError("'" + path + "' is not an LWIRDS1 dataset (bad magic)");
  }
  const auto manifest_len = read_pod<std::uint64_t>(in, path);
  if (manifest_len > (1u << 24)) throw FormatError("implausible manifest length in '" + path + "'");
  std::string text(manifest_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(manifest_len));
  if (!in) throw FormatError("truncated dataset file '" + path + "'");

  KeyValueConfig m;
  try {
    m = KeyValueConfig::parse(text);
    if (m.get_int("version") != kFormatVersion) {
      throw FormatError("unsupported dataset version " + m.get("version") + " in '" + path + "'");
    }
    const SpectralGrid file_grid(m.get_double("grid_first_um"), m.get_double("grid_step_um"),
                                 static_cast<std::size_t>(m.get_int("grid_bands")));
    if (!(file_grid == SpectralGrid::standard())) {
      throw FormatError("dataset '" + path + "' uses a different spectral grid");
    }
  } catch (const ConfigError& e) {
    throw FormatError("bad dataset manifest in '" + path + "': " + e.what());
  }

  Dataset ds;
  ds.material_seed = static_cast<std::uint64_t>(m.get_int("material_seed"));
  ds.materials = build_material_library(ds.material_seed);
  if (hex64(material_library_hash(ds.materials)) != m.get("material_hash")) {
    throw FormatError("material library hash mismatch in '" + path + "'");
  }
  ds.metadata = m.with_prefix("meta.");

  const auto count = read_pod<std::uint64_t>(in, path);
  if (count != static_cast<std::uint64_t>(m.get_int("record_count"))) {
    throw FormatError("record count disagrees with manifest in '" + path + "'");
  }
  ds.records.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) ds.records.push_back(DatasetCodec::read_record(in, path));
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError("trailing bytes after the last record in '" + path + "'");
  }
  return ds;
}

std::uint64_t file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  Fnv1a h;
  std::vector<unsigned char> buf(1 << 16);
  while (in) {
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    h.update(std::span<const unsigned char>(buf.data(), static_cast<std::size_t>(in.gcount())));
  }
  return h.digest();
}

}  // namespace lwir
