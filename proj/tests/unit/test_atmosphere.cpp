#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "lwir/atmosphere.hpp"
#include "lwir/dataset.hpp"
#include "lwir/errors.hpp"

using namespace lwir;

namespace {

const SpectralGrid& grid() { return SpectralGrid::standard(); }

// --- independent quadrature oracle -----------------------------------------

double oracle_k(const AtmosphereModel& atm, double um) {
  double k = atm.continuum_extinction;
  for (const auto& b : atm.band_absorbers) {
    k += b.peak_per_km * std::exp(-0.5 * std::pow((um - b.center_um) / b.width_um, 2));
  }
  return k;
}

template <typename F>
double simpson(F f, double a, double b, int n) {
  if (n % 2) ++n;
  const double h = (b - a) / n;
  double acc = f(a) + f(b);
  for (int i = 1; i < n; ++i) acc += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

double oracle_tau(const AtmosphereModel& atm, double um, double range_m, double angle_deg) {
  const double s = std::sin(angle_deg * std::numbers::pi / 180.0);
  const double r = range_m / 1000.0;
  const double col =
      simpson([&](double x) { return std::exp(-x * s / atm.absorber_scale_height); }, 0.0, r, 4000);
  return std::exp(-oracle_k(atm, um) * col);
}

// Trapezoid rule along the path with `n` intervals, optical depth to the
// sensor by nested Simpson quadrature.
double oracle_up(const AtmosphereModel& atm, double um, double range_m, double angle_deg, int n) {
  const double s = std::sin(angle_deg * std::numbers::pi / 180.0);
  const double r = range_m / 1000.0;
  const double k = oracle_k(atm, um);
  auto rho = [&](double x) { return std::exp(-x * s / atm.absorber_scale_height); };
  auto f = [&](double x) {
    const double above = simpson(rho, x, r, 200);
    return k * rho(x) * planck_radiance(um, atm.temperature_at(x * s)) * std::exp(-k * above);
  };
  const double h = r / n;
  double acc = 0.5 * (f(0.0) + f(r));
  for (int i = 1; i < n; ++i) acc += f(i * h);
  return acc * h;
}

double oracle_down(const AtmosphereModel& atm, double um) {
  const double h = atm.absorber_scale_height;
  auto rho = [&](double z) { return std::exp(-z / h); };
  const double top = AtmosphereModel::kColumnTopKm;
  const double t_eff = simpson([&](double z) { return rho(z) * atm.temperature_at(z); }, 0.0, top, 4000) /
                       simpson(rho, 0.0, top, 4000);
  const double sec = 1.0 / std::cos(53.0 * std::numbers::pi / 180.0);
  return (1.0 - std::exp(-sec * oracle_k(atm, um) * h)) * planck_radiance(um, t_eff);
}

std::size_t band(double um) { return grid().nearest_band(um); }

}  // namespace

TEST(Extinction, DefaultPeaksInsideAbsorptionWindows) {
  const auto atm = AtmosphereModel::default_model();
  const auto k = extinction_profile(atm, grid());
  std::size_t arg = 0;
  for (std::size_t i = 0; i < k.size(); ++i) {
    EXPECT_GE(k[i], atm.continuum_extinction);
    if (k[i] > k[arg]) arg = i;
  }
  const double at = grid()[arg];
  EXPECT_TRUE((at >= 7.5 && at <= 8.5) || (at >= 12.2 && at <= 13.5)) << at;
}

TEST(Extinction, ContinuumOnlyAndLinearity) {
  auto atm = AtmosphereModel::default_model();
  auto bare = atm;
  bare.band_absorbers.clear();
  for (double v : extinction_profile(bare, grid())) EXPECT_EQ(v, atm.continuum_extinction);

  auto doubled = atm;
  for (auto& b : doubled.band_absorbers) b.peak_per_km *= 2.0;
  const auto k1 = extinction_profile(atm, grid());
  const auto k2 = extinction_profile(doubled, grid());
  for (std::size_t i = 0; i < k1.size(); ++i) {
    EXPECT_NEAR(k2[i] - atm.continuum_extinction, 2.0 * (k1[i] - atm.continuum_extinction), 1e-13);
  }
}

TEST(Transmission, MatchesQuadratureOracle) {
  const auto atm = AtmosphereModel::default_model();
  const auto tau = transmission(atm, {5000.0, 45.0}, grid());
  for (std::size_t i = 0; i < grid().size(); i += 17) {
    EXPECT_NEAR(tau[i] / oracle_tau(atm, grid()[i], 5000.0, 45.0), 1.0, 1e-10);
  }
  const double t101 = tau[band(10.1)];
  EXPECT_GE(t101, 0.5);
  EXPECT_LE(t101, 0.95);
  EXPECT_LT(tau[band(7.6)], t101);
}

TEST(Transmission, ZeroRangeLimit) {
  const auto atm = AtmosphereModel::default_model();
  for (double v : slant_transmission(atm, 0.0, 45.0, grid()).values()) EXPECT_EQ(v, 1.0);
  for (double v : slant_transmission(atm, 1e-3, 45.0, grid()).values()) EXPECT_GT(v, 0.99999);
}

TEST(Transmission, DomainChecked) {
  const auto atm = AtmosphereModel::default_model();
  EXPECT_THROW(transmission(atm, {2999.0, 45.0}, grid()), DomainError);
  EXPECT_THROW(transmission(atm, {5000.0, 61.0}, grid()), DomainError);
  EXPECT_THROW(upwelling(atm, {7000.0, 45.0}, grid()), DomainError);
}

TEST(Upwelling, MatchesRefinedOracle) {
  const auto atm = AtmosphereModel::default_model();
  const auto up = upwelling(atm, {5000.0, 45.0}, grid());
  const std::size_t i = band(10.1);
  EXPECT_NEAR(up[i] / oracle_up(atm, grid()[i], 5000.0, 45.0, 10 * atm.n_layers), 1.0, 0.01);
  // Opaque band too, where the path weighting matters most.
  const std::size_t j = band(13.4);
  EXPECT_NEAR(up[j] / oracle_up(atm, grid()[j], 5000.0, 45.0, 10 * atm.n_layers), 1.0, 0.01);

  const auto fine = slant_upwelling(atm, 5000.0, 45.0, 400, grid());
  for (std::size_t b = 0; b < grid().size(); ++b) EXPECT_NEAR(up[b] / fine[b], 1.0, 0.01);
}

TEST(Upwelling, ZeroExtinctionGivesZero) {
  auto atm = AtmosphereModel::default_model();
  atm.band_absorbers.clear();
  atm.continuum_extinction = 0.0;
  for (double v : upwelling(atm, {4000.0, 40.0}, grid()).values()) EXPECT_EQ(v, 0.0);
  for (double v : downwelling(atm, grid()).values()) EXPECT_EQ(v, 0.0);
}

TEST(Downwelling, MatchesOracleAndIsGeometryFree) {
  const auto atm = AtmosphereModel::default_model();
  const auto down = downwelling(atm, grid());
  for (std::size_t i = 0; i < grid().size(); i += 17) {
    EXPECT_NEAR(down[i] / oracle_down(atm, grid()[i]), 1.0, 1e-4);
    EXPECT_GT(down[i], 0.0);
  }
  EXPECT_GT(down[band(7.6)], down[band(10.1)]);
  EXPECT_EQ(down, downwelling(atm, grid()));
}

// Every monotonicity and bound invariant over the full 31 x 36 geometry grid.
TEST(Atmosphere, GeometryInvariantsOnFullGrid) {
  const auto atm = AtmosphereModel::default_model();
  const SweepSpec full;
  std::vector<std::vector<Spectrum>> tau(31), up(31);
  for (int a = 0; a <= 30; ++a) {
    for (int r = 0; r <= 35; ++r) {
      const Geometry g{3000.0 + 100.0 * r, 30.0 + a};
      tau[a].push_back(transmission(atm, g, grid()));
      up[a].push_back(upwelling(atm, g, grid()));
    }
  }
  std::vector<double> bound(grid().size());
  for (std::size_t i = 0; i < bound.size(); ++i) bound[i] = planck_radiance(grid()[i], atm.surface_air_temp + 5.0);

  int violations = 0;
  for (int a = 0; a <= 30; ++a) {
    for (int r = 0; r <= 35; ++r) {
      for (std::size_t i = 0; i < grid().size(); ++i) {
        const double t = tau[a][r][i];
        const double u = up[a][r][i];
        violations += !(t > 0.0 && t <= 1.0);
        violations += !(u > 0.0 && u < (1.0 - t) * bound[i]);
        if (r > 0) {
          violations += !(t < tau[a][r - 1][i]);
          violations += !(u > up[a][r - 1][i]);
        }
        if (a > 0) {
          violations += !(t > tau[a - 1][r][i]);
          violations += !(u < up[a - 1][r][i]);
        }
      }
    }
  }
  EXPECT_EQ(violations, 0);
}

TEST(Atmosphere, LowElevationLooksBrighter) {
  const auto atm = AtmosphereModel::default_model();
  MaterialSpec m;
  m.emissivity = Spectrum::constant(grid().size(), 0.9, SpectrumUnit::dimensionless);
  m.eps_bar = 0.9;
  const auto low = simulate_sample(atm, {5000.0, 30.0}, m, 310.0);
  const auto high = simulate_sample(atm, {5000.0, 60.0}, m, 310.0);
  EXPECT_GT(low.total()[band(10.1)], high.total()[band(10.1)]);
}

TEST(Atmosphere, Deterministic) {
  const auto atm = AtmosphereModel::default_model();
  const Geometry g{4200.0, 37.0};
  EXPECT_EQ(transmission(atm, g, grid()), transmission(atm, g, grid()));
  EXPECT_EQ(upwelling(atm, g, grid()), upwelling(atm, g, grid()));
}

TEST(AtmosphereConfig, RoundTripAndErrors) {
  auto atm = AtmosphereModel::default_model();
  atm.lapse_rate = 0.125;
  atm.rng_seed = 9;
  EXPECT_EQ(AtmosphereModel::from_config(KeyValueConfig::parse(atm.to_config().to_text())), atm);

  EXPECT_THROW(AtmosphereModel::from_config(KeyValueConfig::parse("lapse_rat = 1\n")), ConfigError);
  EXPECT_THROW(AtmosphereModel::from_config(KeyValueConfig::parse("n_layers = 0\n")), DomainError);
  const auto bare = AtmosphereModel::from_config(KeyValueConfig::parse("band_absorbers = none\n"));
  EXPECT_TRUE(bare.band_absorbers.empty());
  const auto one = AtmosphereModel::from_config(KeyValueConfig::parse("band_absorber = 9.6, 0.2, 0.3\n"));
  ASSERT_EQ(one.band_absorbers.size(), 1u);
  EXPECT_EQ(one.band_absorbers[0], (AbsorberBand{9.6, 0.2, 0.3}));
}
