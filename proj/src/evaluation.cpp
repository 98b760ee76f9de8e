#include "lwir/evaluation.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "lwir/config.hpp"
#include "lwir/errors.hpp"

namespace lwir {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kPredictBatch = 64;

Eigen::Map<const Eigen::VectorXd> view(const Spectrum& s) {
  return Eigen::Map<const Eigen::VectorXd>(s.vec().data(), static_cast<Eigen::Index>(s.size()));
}

void predict_batch(HybridNetwork& net, const NormalizationStats& stats, std::span<const Geometry> geoms,
                   std::size_t begin, std::size_t end, std::vector<ComponentPrediction>& out) {
  std::vector<NetInput> in;
  for (std::size_t i = begin; i < end; ++i) in.push_back({geoms[i].range_m, geoms[i].angle_deg});
  const auto p = net.forward(in, Mode::infer);
  const auto& rd = stats.range(Component::down);
  const auto& ru = stats.range(Component::up);
  const Eigen::VectorXd down = (p.down_norm.array() * rd.span() + rd.min).matrix();
  for (std::size_t i = begin; i < end; ++i) {
    const auto b = static_cast<Eigen::Index>(i - begin);
    out[i].down = down;
    out[i].up = (p.up_norm.row(b).transpose().array() * ru.span() + ru.min).matrix();
    out[i].tau = p.tau.row(b).transpose();
  }
}

}  // namespace

std::vector<ComponentPrediction> predict_components(const HybridNetwork& net, const NormalizationStats& stats,
                                                    std::span<const Geometry> geoms, int workers) {
  std::vector<ComponentPrediction> out(geoms.size());
  if (geoms.empty()) return out;
  const std::size_t batches = (geoms.size() + kPredictBatch - 1) / kPredictBatch;
  const auto n_workers = static_cast<std::size_t>(std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1, batches));
  std::atomic<std::size_t> next{0};
  auto work = [&](HybridNetwork local) {
    for (std::size_t b = next++; b < batches; b = next++) {
      predict_batch(local, stats, geoms, b * kPredictBatch, std::min(geoms.size(), (b + 1) * kPredictBatch), out);
    }
  };
  if (n_workers == 1) {
    work(net);
    return out;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(work, net);
  for (auto& t : pool) t.join();
  return out;
}

Predictor network_predictor(const HybridNetwork& net, const NormalizationStats& stats, int workers) {
  return [net, stats, workers](std::span<const Geometry> geoms) { return predict_components(net, stats, geoms, workers); };
}

Predictor simulator_predictor(const AtmosphereModel& atm, const SpectralGrid& grid) {
  return [atm, grid](std::span<const Geometry> geoms) {
    const MaterialSpec probe{0, "probe", MaterialClass::high_emissivity,
                             Spectrum::constant(grid.size(), 0.5, SpectrumUnit::dimensionless), 0.5};
    std::vector<ComponentPrediction> out;
    for (const auto& g : geoms) {
      const auto r = simulate_sample(atm, g, probe, 300.0, grid);
      out.push_back({view(r.down()), view(r.up()), view(r.tau())});
    }
    return out;
  };
}

std::vector<Geometry> geometries_of(const RecordRefs& records) {
  std::vector<Geometry> out;
  out.reserve(records.size());
  for (const SampleRecord* r : records) out.push_back(r->geometry());
  return out;
}

std::string to_string(TargetMode m) { return m == TargetMode::true_target ? "true" : "false"; }

ComponentErrorTable component_errors(std::span<const ComponentPrediction> predictions, const RecordRefs& records,
                                     std::span<const MaterialSpec> materials, TargetMode mode,
                                     const SpectralGrid& grid) {
  if (predictions.size() != records.size()) throw DataError("prediction count does not match the records");
  if (records.empty()) throw DataError("no records to evaluate");
  ComponentErrorTable t;
  t.mode = mode;
  t.records = records.size();
  std::array<double, 5> sum{}, abs_sum{}, sq_sum{};
  std::size_t n = 0;
  for (std::size_t k = 0; k < records.size(); ++k) {
    const SampleRecord& r = *records[k];
    if (r.source() != Source::simulated) throw DataError("component errors need simulated records");
    const auto& p = predictions[k];
    Eigen::ArrayXd eps, planck;
    if (mode == TargetMode::true_target) {
      const auto id = static_cast<std::size_t>(r.material_id());
      if (id >= materials.size()) throw DataError("unknown material id " + std::to_string(id));
      eps = view(materials[id].emissivity).array();
      planck = view(planck_spectrum(grid, r.temperature())).array();
    } else {
      eps = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(grid.size()));
      planck = view(planck_spectrum_extended(grid, 0.0)).array();
    }
    const Eigen::ArrayXd emit = eps * planck * p.tau.array();
    const Eigen::ArrayXd total = (1.0 - eps) * p.down.array() * p.tau.array() + emit + p.up.array();
    for (Component c : kAllComponents) {
      const auto i = static_cast<std::size_t>(c);
      const auto truth = view(r.component(c)).array();
      Eigen::ArrayXd pred;
      switch (c) {
        case Component::tau: pred = p.tau.array(); break;
        case Component::down: pred = p.down.array(); break;
        case Component::up: pred = p.up.array(); break;
        case Component::emit: pred = emit; break;
        case Component::total: pred = total; break;
      }
      sum[i] += truth.sum();
      abs_sum[i] += (truth - pred).abs().sum();
      sq_sum[i] += (truth - pred).square().sum();
    }
    n += grid.size();
  }
  for (std::size_t i = 0; i < 5; ++i) {
    const double dn = static_cast<double>(n);
    t.cells[i] = {sum[i] / dn, abs_sum[i] / dn, std::sqrt(sq_sum[i] / dn)};
  }
  return t;
}

std::string error_tables_csv(const ComponentErrorTable& a, const ComponentErrorTable& b) {
  std::ostringstream os;
  os << "component,truth_mean_true,mae_true,rmse_true,truth_mean_false,mae_false,rmse_false\n";
  for (Component c : {Component::total, Component::down, Component::up, Component::emit, Component::tau}) {
    os << to_string(c) << ',' << format_double(a[c].truth_mean) << ',' << format_double(a[c].mae) << ','
       << format_double(a[c].rmse) << ',' << format_double(b[c].truth_mean) << ',' << format_double(b[c].mae) << ','
       << format_double(b[c].rmse) << '\n';
  }
  return os.str();
}

double default_fixed_value(FixedAxis fixed) { return fixed == FixedAxis::range ? 5000.0 : 30.0; }

std::vector<ResidualField> residual_fields(const Predictor& predict, const AtmosphereModel& atm,
                                           const MaterialSpec& material, double temperature, FixedAxis fixed,
                                           double fixed_value, const SpectralGrid& grid) {
  std::vector<double> axis;
  std::vector<Geometry> geoms;
  if (fixed == FixedAxis::range) {
    for (int a = 30; a <= 60; ++a) {
      axis.push_back(a);
      geoms.push_back({fixed_value, static_cast<double>(a)});
    }
  } else {
    for (int r = 3000; r <= 6500; r += 100) {
      axis.push_back(r);
      geoms.push_back({static_cast<double>(r), fixed_value});
    }
  }
  for (const auto& g : geoms) g.validate();
  const auto preds = predict(geoms);
  if (preds.size() != geoms.size()) throw DataError("predictor returned the wrong number of rows");

  const auto rows = static_cast<Eigen::Index>(geoms.size());
  const auto cols = static_cast<Eigen::Index>(grid.size());
  std::vector<ResidualField> out;
  for (Component c : {Component::total, Component::down, Component::up, Component::emit, Component::tau}) {
    ResidualField f{c, fixed, fixed_value, axis, Eigen::MatrixXd(rows, cols), Eigen::MatrixXd(rows, cols), {}};
    out.push_back(std::move(f));
  }
  const auto eps = view(material.emissivity).array();
  const Eigen::ArrayXd planck = view(planck_spectrum(grid, temperature)).array();
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto r = simulate_sample(atm, geoms[static_cast<std::size_t>(i)], material, temperature, grid);
    const auto& p = preds[static_cast<std::size_t>(i)];
    const Eigen::ArrayXd emit = eps * planck * p.tau.array();
    const Eigen::ArrayXd total = (1.0 - eps) * p.down.array() * p.tau.array() + emit + p.up.array();
    for (auto& f : out) {
      f.truth.row(i) = view(r.component(f.component)).transpose();
      switch (f.component) {
        case Component::tau: f.predicted.row(i) = p.tau.transpose(); break;
        case Component::down: f.predicted.row(i) = p.down.transpose(); break;
        case Component::up: f.predicted.row(i) = p.up.transpose(); break;
        case Component::emit: f.predicted.row(i) = emit.matrix().transpose(); break;
        case Component::total: f.predicted.row(i) = total.matrix().transpose(); break;
      }
    }
  }
  for (auto& f : out) f.residual = f.truth - f.predicted;
  return out;
}

std::string residual_field_csv(const ResidualField& f, const SpectralGrid& grid) {
  std::ostringstream os;
  os << "x,y,series,value\n";
  const std::pair<const char*, const Eigen::MatrixXd*> series[] = {
      {"truth", &f.truth}, {"predicted", &f.predicted}, {"residual", &f.residual}};
  for (const auto& [name, m] : series) {
    for (Eigen::Index i = 0; i < m->rows(); ++i) {
      for (Eigen::Index j = 0; j < m->cols(); ++j) {
        os << format_double(grid[static_cast<std::size_t>(j)]) << ',' << format_double(f.axis[static_cast<std::size_t>(i)])
           << ',' << name << ',' << format_double((*m)(i, j)) << '\n';
      }
    }
  }
  return os.str();
}

std::vector<double> purity_classification(std::span<const double> pixel_mae, std::span<const double> thresholds) {
  std::vector<double> out;
  for (double th : thresholds) {
    if (pixel_mae.empty()) {
      out.push_back(kNaN);
      continue;
    }
    std::size_t below = 0;
    for (double m : pixel_mae) below += m < th ? 1 : 0;
    out.push_back(static_cast<double>(below) / static_cast<double>(pixel_mae.size()));
  }
  return out;
}

BlackbodyTemperature equivalent_blackbody_temperature(const Spectrum& emit, const Spectrum& tau, const Spectrum& eps,
                                                      const SpectralGrid& grid) {
  const std::size_t n = grid.size();
  if (emit.size() != n || tau.size() != n || eps.size() != n) throw DataError("spectra do not match the grid");
  BlackbodyTemperature out{Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), kNaN), std::vector<bool>(n, false)};
  for (std::size_t i = 0; i < n; ++i) {
    if (!(eps[i] > 0.0) || !(tau[i] >= 1e-6)) continue;
    const double radiance = emit[i] / tau[i] / eps[i];
    if (!(radiance > 0.0) || !std::isfinite(radiance)) continue;
    out.kelvin(static_cast<Eigen::Index>(i)) = inverse_planck(grid[i], radiance);
    out.valid[i] = true;
  }
  return out;
}

BlackbodySummary summarize_blackbody(std::span<const BlackbodyTemperature> temps, std::span<const double> true_t) {
  if (temps.size() != true_t.size()) throw DataError("temperature count mismatch");
  BlackbodySummary s;
  if (temps.empty()) return s;
  const auto n = temps.front().kelvin.size();
  Eigen::VectorXd band_sum = Eigen::VectorXd::Zero(n);
  Eigen::VectorXi band_count = Eigen::VectorXi::Zero(n);
  for (std::size_t k = 0; k < temps.size(); ++k) {
    double sum = 0.0;
    int used = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!temps[k].valid[static_cast<std::size_t>(i)]) continue;
      const double err = std::abs(temps[k].kelvin(i) - true_t[k]);
      sum += err;
      ++used;
      band_sum(i) += err;
      ++band_count(i);
    }
    s.per_record_mae.push_back(used ? sum / used : kNaN);
  }
  s.per_band_mae = Eigen::VectorXd(n);
  for (Eigen::Index i = 0; i < n; ++i) s.per_band_mae(i) = band_count(i) ? band_sum(i) / band_count(i) : kNaN;
  return s;
}

Spectrum with_multiplicative_noise(const Spectrum& s, double sigma, Rng& rng) {
  Spectrum out = s;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= 1.0 + sigma * rng.normal();
  return out;
}

Spectrum with_sensor_noise(const Spectrum& emit, const Spectrum& total, double sigma, Rng& rng) {
  if (emit.size() != total.size()) throw DataError("noise reference does not match L_emit");
  Spectrum out = emit;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += sigma * total[i] * rng.normal();
  return out;
}

}  // namespace lwir
