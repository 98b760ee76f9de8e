#include "lwir/retrieval.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "lwir/config.hpp"
#include "lwir/errors.hpp"

namespace lwir {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Eigen::VectorXd to_vec(const Spectrum& s) { return Eigen::Map<const Eigen::VectorXd>(s.vec().data(), s.size()); }

// Valid in-window (estimate, reference) pairs.
struct Pairs {
  std::vector<double> e;
  std::vector<double> ref;
};

void collect(const EmissivityEstimate& e, const double* ref, double ref_scalar, BandWindow w, const SpectralGrid& grid,
             Pairs& out) {
  for (Eigen::Index i = 0; i < e.values.size(); ++i) {
    if (!e.valid[i] || !w.contains(grid[static_cast<std::size_t>(i)])) continue;
    out.e.push_back(e.values(i));
    out.ref.push_back(ref ? ref[i] : ref_scalar);
  }
}

double mae_of(const Pairs& p) {
  if (p.e.empty()) return kNaN;
  double s = 0.0;
  for (std::size_t i = 0; i < p.e.size(); ++i) s += std::abs(p.e[i] - p.ref[i]);
  return s / static_cast<double>(p.e.size());
}

// Min-max normalised copy; a constant vector maps to 0.5.
std::vector<double> min_max(const std::vector<double>& v, bool& constant) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double x : v) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  constant = !(hi > lo);
  std::vector<double> out(v.size(), 0.5);
  if (!constant) {
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - lo) / (hi - lo);
  }
  return out;
}

std::optional<double> norm_mae_of(const Pairs& p) {
  if (p.e.size() < 2) return std::nullopt;
  bool flat_e = false, flat_ref = false;
  const auto ne = min_max(p.e, flat_e);
  if (flat_e) return std::nullopt;
  const auto nr = min_max(p.ref, flat_ref);
  double s = 0.0;
  for (std::size_t i = 0; i < ne.size(); ++i) s += std::abs(ne[i] - nr[i]);
  return s / static_cast<double>(ne.size());
}

double score_of(TesCriterion c, double mae, const std::optional<double>& nm) {
  if (c == TesCriterion::mae || !nm) return mae;
  return mae + *nm;
}

void check_eps_bar(double eps_bar) {
  if (!(eps_bar > 0.0 && eps_bar < 1.0)) throw DataError("eps_bar must be in (0, 1)");
}

}  // namespace

TemperatureGrid TemperatureGrid::parse(const std::string& text) {
  const auto a = text.find(':');
  const auto b = a == std::string::npos ? std::string::npos : text.find(':', a + 1);
  if (b == std::string::npos || text.find(':', b + 1) != std::string::npos) {
    throw ConfigError("temperature grid '" + text + "' is not min:max:step");
  }
  TemperatureGrid g{parse_double(text.substr(0, a), "t-grid min"), parse_double(text.substr(a + 1, b - a - 1), "t-grid max"),
                    parse_double(text.substr(b + 1), "t-grid step")};
  g.validate();
  return g;
}

void TemperatureGrid::validate() const {
  if (!(t_min > 0.0 && t_min < t_max)) throw ConfigError("temperature grid needs 0 < min < max");
  if (!(step > 0.0)) throw ConfigError("temperature grid step must be positive");
}

std::vector<double> TemperatureGrid::values() const {
  validate();
  std::vector<double> out;
  const auto n = static_cast<long>(std::floor((t_max - t_min) / step + 1e-9));
  for (long i = 0; i <= n; ++i) out.push_back(t_min + static_cast<double>(i) * step);
  return out;
}

std::string TemperatureGrid::to_string() const {
  return format_double(t_min) + ":" + format_double(t_max) + ":" + format_double(step);
}

TesInput TesInput::from_record(const SampleRecord& r) {
  return {to_vec(r.total()), to_vec(r.down()), to_vec(r.up()), to_vec(r.tau())};
}

EmissivityEstimate invert_emissivity(const TesInput& in, double temperature, const SpectralGrid& grid) {
  const auto n = static_cast<Eigen::Index>(grid.size());
  if (in.total.size() != n || in.down.size() != n || in.up.size() != n || in.tau.size() != n) {
    throw DataError("retrieval inputs do not match the spectral grid");
  }
  EmissivityEstimate e;
  e.values = Eigen::VectorXd::Constant(n, kNaN);
  e.valid.assign(static_cast<std::size_t>(n), false);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double bt = planck_radiance(grid[static_cast<std::size_t>(i)], temperature);
    const double denom = bt - in.down(i);
    if (!(in.tau(i) >= kMinRetrievalTau) || !(std::abs(denom) >= kMinRetrievalDenominator)) continue;
    e.values(i) = ((in.total(i) - in.up(i)) / in.tau(i) - in.down(i)) / denom;
    e.valid[static_cast<std::size_t>(i)] = true;
    ++e.valid_count;
  }
  if (e.valid_count == 0) throw DataError("degenerate inversion: every band is flagged");
  return e;
}

double emissivity_mae(const EmissivityEstimate& e, double ref, BandWindow w, const SpectralGrid& grid) {
  Pairs p;
  collect(e, nullptr, ref, w, grid, p);
  return mae_of(p);
}

double emissivity_mae(const EmissivityEstimate& e, const Spectrum& ref, BandWindow w, const SpectralGrid& grid) {
  if (ref.size() != static_cast<std::size_t>(e.values.size())) throw DataError("reference does not match estimate");
  Pairs p;
  collect(e, ref.vec().data(), 0.0, w, grid, p);
  return mae_of(p);
}

std::optional<double> norm_mae(const EmissivityEstimate& e, double ref, BandWindow w, const SpectralGrid& grid) {
  Pairs p;
  collect(e, nullptr, ref, w, grid, p);
  return norm_mae_of(p);
}

std::optional<double> norm_mae(const EmissivityEstimate& e, const Spectrum& ref, BandWindow w,
                               const SpectralGrid& grid) {
  if (ref.size() != static_cast<std::size_t>(e.values.size())) throw DataError("reference does not match estimate");
  Pairs p;
  collect(e, ref.vec().data(), 0.0, w, grid, p);
  return norm_mae_of(p);
}

std::string to_string(TesCriterion c) { return c == TesCriterion::mae ? "mae" : "mae_plus_norm_mae"; }

TesCriterion parse_tes_criterion(const std::string& s) {
  if (s == "mae") return TesCriterion::mae;
  if (s == "mae_plus_norm_mae" || s == "mae+norm" || s == "mae+norm_mae") return TesCriterion::mae_plus_norm_mae;
  throw ConfigError("unknown criterion '" + s + "' (expected mae or mae+norm)");
}

TesResult grid_search_temperature(const TesInput& in, double eps_bar, const TemperatureGrid& grid,
                                  TesCriterion criterion, BandWindow w, const SpectralGrid& sgrid) {
  check_eps_bar(eps_bar);
  TesResult best;
  double best_score = std::numeric_limits<double>::infinity();
  bool found = false;
  for (double t : grid.values()) {
    TesRow row{t, kNaN, kNaN, kNaN};
    try {
      auto e = invert_emissivity(in, t, sgrid);
      Pairs p;
      collect(e, nullptr, eps_bar, w, sgrid, p);
      row.mae = mae_of(p);
      const auto nm = norm_mae_of(p);
      if (nm) row.norm_mae = *nm;
      row.score = score_of(criterion, row.mae, nm);
      if (!std::isnan(row.score) && row.score < best_score) {
        best_score = row.score;
        best.t_hat = t;
        best.emissivity = std::move(e);
        found = true;
      }
    } catch (const DataError&) {
      // degenerate at this temperature; the row keeps NaN scores
    }
    best.table.push_back(row);
  }
  if (!found) throw DataError("degenerate inversion at every search temperature");
  return best;
}

JointTesResult grid_search_temperature_joint(std::span<const TesInput> inputs, double eps_bar,
                                             const TemperatureGrid& grid, TesCriterion criterion, BandWindow w,
                                             const SpectralGrid& sgrid) {
  check_eps_bar(eps_bar);
  if (inputs.empty()) throw DataError("joint search needs at least one observation");
  JointTesResult out;
  double best_score = std::numeric_limits<double>::infinity();
  bool found = false;
  for (double t : grid.values()) {
    TesRow row{t, kNaN, kNaN, kNaN};
    Pairs all;
    double mae_sum = 0.0;
    int used = 0;
    for (const auto& in : inputs) {
      try {
        const auto e = invert_emissivity(in, t, sgrid);
        Pairs p;
        collect(e, nullptr, eps_bar, w, sgrid, p);
        if (p.e.empty()) continue;
        mae_sum += mae_of(p);
        ++used;
        all.e.insert(all.e.end(), p.e.begin(), p.e.end());
        all.ref.insert(all.ref.end(), p.ref.begin(), p.ref.end());
      } catch (const DataError&) {
      }
    }
    if (used > 0) {
      row.mae = mae_sum / used;
      const auto nm = norm_mae_of(all);
      if (nm) row.norm_mae = *nm;
      row.score = score_of(criterion, row.mae, nm);
      if (row.score < best_score) {
        best_score = row.score;
        out.t_hat = t;
        found = true;
      }
    }
    out.table.push_back(row);
  }
  if (!found) throw DataError("degenerate inversion at every search temperature");
  return out;
}

std::vector<DeviationPoint> deviation_curve(std::span<const TesInput> inputs, const Spectrum& truth, double t_true,
                                            const std::vector<double>& deltas, BandWindow w,
                                            const SpectralGrid& grid) {
  std::vector<DeviationPoint> out;
  for (double d : deltas) {
    double sum = 0.0;
    int used = 0;
    for (const auto& in : inputs) {
      try {
        const double m = emissivity_mae(invert_emissivity(in, t_true + d, grid), truth, w, grid);
        if (std::isnan(m)) continue;
        sum += m;
        ++used;
      } catch (const DataError&) {
      }
    }
    out.push_back({d, used ? sum / used : kNaN});
  }
  return out;
}

}  // namespace lwir
