#include <gtest/gtest.h>

#include <cmath>

#include "lwir/errors.hpp"
#include "lwir/retrieval.hpp"
#include "lwir/rng.hpp"

using namespace lwir;

namespace {

const SpectralGrid& G() { return SpectralGrid::standard(); }

const std::vector<MaterialSpec>& library() {
  static const auto lib = build_material_library(42, G());
  return lib;
}

TesInput observe(int material, double t, Geometry g = {4500.0, 40.0}) {
  return TesInput::from_record(simulate_sample(AtmosphereModel::default_model(), g, library()[material], t, G()));
}

EmissivityEstimate estimate(std::vector<double> v) {
  EmissivityEstimate e;
  e.values = Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  e.valid.assign(v.size(), true);
  e.valid_count = static_cast<int>(v.size());
  return e;
}

}  // namespace

TEST(TemperatureGrid, ParsesInclusively) {
  const auto g = TemperatureGrid::parse("280:320:5");
  const auto v = g.values();
  ASSERT_EQ(v.size(), 9u);
  EXPECT_EQ(v.front(), 280.0);
  EXPECT_EQ(v.back(), 320.0);
  EXPECT_EQ(TemperatureGrid{}.values(), v);
  EXPECT_EQ(TemperatureGrid::fine().values().size(), 51u);
  EXPECT_EQ(TemperatureGrid::parse("270:320:1").values().size(), 51u);
  EXPECT_EQ(TemperatureGrid::parse("280:300:7").values().size(), 3u);  // 280, 287, 294
  EXPECT_EQ(g.to_string(), "280:320:5");
  for (const char* bad : {"280:320", "320:280:5", "280:320:0", "a:b:c", "280:320:5:1", "0:10:1"}) {
    EXPECT_THROW(TemperatureGrid::parse(bad), ConfigError) << bad;
  }
}

TEST(InvertEmissivity, BlackbodyAndReflector) {
  Rng rng(3);
  const auto n = static_cast<Eigen::Index>(G().size());
  TesInput in;
  in.tau = Eigen::VectorXd(n);
  in.up = Eigen::VectorXd(n);
  in.down = Eigen::VectorXd(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    in.tau(i) = rng.uniform(0.05, 0.95);
    in.up(i) = rng.uniform(0.0, 5e-4);
    in.down(i) = rng.uniform(0.0, 5e-4);
  }
  const auto b = planck_spectrum(G(), 305.0);
  const Eigen::VectorXd bt = Eigen::Map<const Eigen::VectorXd>(b.vec().data(), n);

  in.total = bt.cwiseProduct(in.tau) + in.up;
  const auto black = invert_emissivity(in, 305.0);
  EXPECT_EQ(black.valid_count, n);
  EXPECT_LE((black.values.array() - 1.0).abs().maxCoeff(), 1e-12);

  in.total = in.down.cwiseProduct(in.tau) + in.up;
  const auto mirror = invert_emissivity(in, 305.0);
  EXPECT_LE(mirror.values.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(InvertEmissivity, RoundTripThroughSimulator) {
  for (int m : {0, 4, 5, 9, 26}) {
    for (double t : {295.0, 318.0}) {
      const auto e = invert_emissivity(observe(m, t, {6100.0, 57.0}), t);
      const auto& truth = library()[m].emissivity;
      for (std::size_t i = 0; i < G().size(); ++i) {
        ASSERT_TRUE(e.valid[i]);
        EXPECT_NEAR(e.values(static_cast<Eigen::Index>(i)), truth[i], 1e-10) << m << " band " << i;
      }
    }
  }
}

TEST(InvertEmissivity, FlagsInvalidBands) {
  auto in = observe(6, 300.0);
  in.tau(3) = 5e-7;
  in.down(10) = planck_radiance(G()[10], 300.0);
  const auto e = invert_emissivity(in, 300.0);
  EXPECT_FALSE(e.valid[3]);
  EXPECT_FALSE(e.valid[10]);
  EXPECT_TRUE(std::isnan(e.values(3)));
  EXPECT_EQ(e.valid_count, 254);
  // Flagged bands never reach the criteria.
  EXPECT_FALSE(std::isnan(emissivity_mae(e, 0.9)));

  in.tau.setZero();
  EXPECT_THROW(invert_emissivity(in, 300.0), DataError);
  in.tau.resize(5);
  EXPECT_THROW(invert_emissivity(in, 300.0), DataError);
}

TEST(InvertEmissivity, DecreasingInTemperature) {
  const auto in = observe(12, 305.0);
  const auto a = invert_emissivity(in, 300.0);
  const auto b = invert_emissivity(in, 301.0);
  for (Eigen::Index i = 0; i < a.values.size(); ++i) {
    if (planck_radiance(G()[static_cast<std::size_t>(i)], 300.0) > in.down(i)) {
      EXPECT_LT(b.values(i), a.values(i)) << i;
    }
  }
}

TEST(NormMae, Oracles) {
  const SpectralGrid g4(7.5, 1.0, 4);
  const Spectrum ref({0.9, 0.95, 0.8, 0.85}, SpectrumUnit::dimensionless);
  // ref normalises to (2/3, 1, 0, 1/3); its inverted shape to (1/3, 0, 1, 2/3).
  EXPECT_NEAR(*norm_mae(estimate({1.0 / 3, 0.0, 1.0, 2.0 / 3}), ref, {}, g4), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(*norm_mae(estimate({0.9, 0.95, 0.8, 0.85}), ref, {}, g4), 0.0, 1e-15);
  EXPECT_NEAR(*norm_mae(estimate({2.1, 2.2, 1.9, 2.0}), ref, {}, g4), 0.0, 1e-14);  // 2 ref + 0.3
  EXPECT_FALSE(norm_mae(estimate({0.7, 0.7, 0.7, 0.7}), ref, {}, g4).has_value());
  // Scalar reference: mean |norm(e) - 0.5| = (1/6 + 1/2 + 1/2 + 1/6) / 4.
  EXPECT_NEAR(*norm_mae(estimate({0.9, 0.95, 0.8, 0.85}), 0.9, {}, g4), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(emissivity_mae(estimate({0.9, 0.95, 0.8, 0.85}), 0.9, {}, g4), 0.05, 1e-15);
  // Windows restrict the bands: 8.5 and 9.5 um only.
  EXPECT_NEAR(emissivity_mae(estimate({0.9, 0.95, 0.8, 0.85}), 0.9, {8.4, 9.6}, g4), 0.075, 1e-15);
}

TEST(GridSearch, RecoversTrueTemperatureWithTrueAtmosphere) {
  for (int m : {0, 1, 2}) {
    for (double t : {290.0, 300.0, 315.0}) {
      const auto in = observe(m, t);
      for (auto c : {TesCriterion::mae, TesCriterion::mae_plus_norm_mae}) {
        const auto r = grid_search_temperature(in, library()[m].eps_bar, TemperatureGrid{}, c);
        EXPECT_EQ(r.t_hat, t) << m << " " << to_string(c);
        EXPECT_EQ(r.table.size(), 9u);
      }
    }
  }
}

TEST(GridSearch, TableAndSelection) {
  const auto in = observe(1, 300.0);
  const auto r = grid_search_temperature(in, library()[1].eps_bar, TemperatureGrid{}, TesCriterion::mae_plus_norm_mae);
  for (const auto& row : r.table) {
    EXPECT_GE(row.score, r.table[4].score);
    EXPECT_NEAR(row.score, row.mae + row.norm_mae, 1e-15);
  }
  const auto again = invert_emissivity(in, r.t_hat);
  EXPECT_EQ(r.emissivity.values, again.values);
  EXPECT_THROW(grid_search_temperature(in, 1.0, TemperatureGrid{}, TesCriterion::mae), DataError);
  EXPECT_THROW(grid_search_temperature(in, 0.0, TemperatureGrid{}, TesCriterion::mae), DataError);
}

TEST(GridSearch, TiesGoToLowerTemperature) {
  // Zero signal inverts to exactly zero at every temperature: all scores tie.
  auto in = observe(6, 300.0);
  in.tau.setOnes();
  in.up.setZero();
  in.down.setZero();
  in.total.setZero();
  const auto r = grid_search_temperature(in, 0.5, TemperatureGrid{}, TesCriterion::mae);
  EXPECT_EQ(r.t_hat, 280.0);
}

TEST(GridSearch, InvariantToCommonRescaling) {
  const auto in = observe(8, 305.0);
  TesInput scaled = in;
  scaled.total = in.up + 0.37 * (in.total - in.up);
  scaled.tau = 0.37 * in.tau;
  const auto a = grid_search_temperature(in, 0.9, TemperatureGrid::fine(), TesCriterion::mae_plus_norm_mae);
  const auto b = grid_search_temperature(scaled, 0.9, TemperatureGrid::fine(), TesCriterion::mae_plus_norm_mae);
  EXPECT_EQ(a.t_hat, b.t_hat);
  for (std::size_t i = 0; i < a.table.size(); ++i) EXPECT_NEAR(a.table[i].score, b.table[i].score, 1e-12);
}

TEST(GridSearch, LowEmissivityTargetWithinOneStep) {
  const int metal = 5;
  ASSERT_LT(library()[metal].eps_bar, 0.05);
  Rng rng(21);
  for (int k = 0; k < 10; ++k) {
    auto in = observe(metal, 315.0, {3000.0 + 350.0 * k, 30.0 + 3.0 * k});
    for (Eigen::Index i = 0; i < in.total.size(); ++i) in.total(i) *= 1.0 + 0.005 * rng.normal();
    const auto r = grid_search_temperature(in, library()[metal].eps_bar, TemperatureGrid{}, TesCriterion::mae);
    EXPECT_LE(std::abs(r.t_hat - 315.0), 5.0) << k;
  }
}

TEST(GridSearch, JointSearch) {
  std::vector<TesInput> obs;
  for (int k = 0; k < 5; ++k) obs.push_back(observe(0, 300.0, {3500.0 + 500.0 * k, 35.0 + 5.0 * k}));
  for (auto c : {TesCriterion::mae, TesCriterion::mae_plus_norm_mae}) {
    const auto r = grid_search_temperature_joint(obs, library()[0].eps_bar, TemperatureGrid{}, c);
    EXPECT_EQ(r.t_hat, 300.0);
    EXPECT_EQ(r.table.size(), 9u);
  }
  EXPECT_THROW(grid_search_temperature_joint({}, 0.9, TemperatureGrid{}, TesCriterion::mae), DataError);
}

TEST(DeviationCurve, MinimumAtTruthAndBounded) {
  std::vector<double> deltas;
  for (int d = -10; d <= 10; ++d) deltas.push_back(d);
  for (int m : {0, 1, 2, 7, 15, 25}) {
    std::vector<TesInput> obs;
    for (int k = 0; k < 4; ++k) obs.push_back(observe(m, 305.0, {3200.0 + 900.0 * k, 31.0 + 9.0 * k}));
    // Over the full range the opaque bands, where B(T) meets L_down near the
    // air temperature, still leave the minimum at the truth.
    const auto full = deviation_curve(obs, library()[m].emissivity, 305.0, deltas);
    ASSERT_EQ(full.size(), deltas.size());
    EXPECT_LT(full[10].mean_mae, 1e-10);
    for (const auto& p : full) {
      if (p.delta_t != 0.0) EXPECT_GT(p.mean_mae, full[10].mean_mae);
    }
    const auto curve = deviation_curve(obs, library()[m].emissivity, 305.0, deltas, BandWindow::restricted());
    for (const auto& p : curve) {
      if (p.delta_t != 0.0) EXPECT_GT(p.mean_mae, curve[10].mean_mae);
      if (std::abs(p.delta_t) <= 5.0) EXPECT_LT(p.mean_mae, 0.1) << m << " dT " << p.delta_t;
    }
    // With exact components the error ratio err(-d) / err(+d) is
    // exp(k d) (B(T+d) - L_down) / (B(T-d) - L_down) > 1 for an exponential B,
    // so underestimating T costs more here.
    if (library()[m].material_class == MaterialClass::high_emissivity) {
      EXPECT_GT(curve[5].mean_mae, curve[15].mean_mae) << m;
    }
  }
}
