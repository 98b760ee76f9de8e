#include "lwir/loss.hpp"

#include <cmath>

#include "lwir/errors.hpp"

namespace lwir {
namespace {

Eigen::VectorXd to_vec(const Spectrum& s) { return Eigen::Map<const Eigen::VectorXd>(s.vec().data(), s.size()); }

}  // namespace

LossSample make_loss_sample(const SampleRecord& r, const Spectrum& emissivity, const NormalizationStats& stats,
                            const SpectralGrid& grid) {
  LossSample s;
  s.input = {r.geometry().range_m, r.geometry().angle_deg};
  s.eps = to_vec(emissivity);
  s.planck = to_vec(planck_spectrum(grid, r.temperature()));
  s.total_norm = to_vec(normalize(r.total(), stats, Component::total));
  if (r.source() == Source::simulated) {
    s.has_components = true;
    s.emit_norm = to_vec(normalize(r.emit(), stats, Component::emit));
    s.down_norm = to_vec(normalize(r.down(), stats, Component::down));
    s.up_norm = to_vec(normalize(r.up(), stats, Component::up));
    s.tau = to_vec(r.tau());
  }
  return s;
}

ComposedRadiance compose_prediction(const Prediction& pred, int b, const LossSample& s,
                                    const NormalizationStats& stats) {
  const auto& rd = stats.range(Component::down);
  const auto& ru = stats.range(Component::up);
  const Eigen::ArrayXd down = pred.down_norm.array() * rd.span() + rd.min;
  const Eigen::ArrayXd up = pred.up_norm.row(b).transpose().array() * ru.span() + ru.min;
  const Eigen::ArrayXd tau = pred.tau.row(b).transpose().array();
  ComposedRadiance c;
  c.emit = s.eps.array() * s.planck.array() * tau;
  c.total = (1.0 - s.eps.array()) * down * tau + c.emit.array() + up;
  return c;
}

LossResult evaluate_loss(LossKind kind, const Prediction& pred, std::span<const LossSample* const> batch,
                         const NormalizationStats& stats, bool with_grad) {
  const int n_batch = pred.batch();
  const Eigen::Index bands = pred.down_norm.size();
  if (static_cast<int>(batch.size()) != n_batch) throw DataError("loss batch does not match the prediction");

  const auto& rt = stats.range(Component::total);
  const auto& re = stats.range(Component::emit);
  const auto& rd = stats.range(Component::down);
  const auto& ru = stats.range(Component::up);
  const bool full = kind == LossKind::loss1;
  const double terms = full ? 5.0 : 1.0;
  const double scale = 1.0 / (terms * static_cast<double>(bands) * n_batch);

  LossResult out;
  if (with_grad) {
    out.grad.down_norm = Eigen::VectorXd::Zero(bands);
    out.grad.up_norm = nn::Mat::Zero(n_batch, bands);
    out.grad.tau = nn::Mat::Zero(n_batch, bands);
  }

  const Eigen::ArrayXd dn = pred.down_norm.array();
  const Eigen::ArrayXd down = dn * rd.span() + rd.min;
  double total = 0.0;
  for (int b = 0; b < n_batch; ++b) {
    const LossSample& s = *batch[b];
    if (full && !s.has_components) throw DataError("loss1 needs a simulated record with every component");
    const Eigen::ArrayXd un = pred.up_norm.row(b).transpose().array();
    const Eigen::ArrayXd tau = pred.tau.row(b).transpose().array();
    const Eigen::ArrayXd eps = s.eps.array();
    const Eigen::ArrayXd eb = eps * s.planck.array();
    const Eigen::ArrayXd emit = eb * tau;
    const Eigen::ArrayXd lam = (1.0 - eps) * down * tau + emit + (un * ru.span() + ru.min);

    const Eigen::ArrayXd r_lam = (lam - rt.min) / rt.span() - s.total_norm.array();
    double sq = r_lam.square().sum();
    Eigen::ArrayXd r_emit, r_down, r_up, r_tau;
    if (full) {
      r_emit = (emit - re.min) / re.span() - s.emit_norm.array();
      r_down = dn - s.down_norm.array();
      r_up = un - s.up_norm.array();
      r_tau = tau - s.tau.array();
      sq += r_emit.square().sum() + r_down.square().sum() + r_up.square().sum() + r_tau.square().sum();
    }
    total += sq;
    if (!with_grad) continue;

    // d loss / d L_total and d loss / d L_emit in physical units.
    const Eigen::ArrayXd g_lam = 2.0 * scale * r_lam / rt.span();
    Eigen::ArrayXd g_emit = g_lam;
    if (full) g_emit += 2.0 * scale * r_emit / re.span();

    Eigen::ArrayXd d_tau = g_emit * eb + g_lam * (1.0 - eps) * down;
    Eigen::ArrayXd d_up = g_lam * ru.span();
    Eigen::ArrayXd d_down = g_lam * (1.0 - eps) * tau * rd.span();
    if (full) {
      d_tau += 2.0 * scale * r_tau;
      d_up += 2.0 * scale * r_up;
      d_down += 2.0 * scale * r_down;
    }
    out.grad.tau.row(b) = d_tau.matrix().transpose();
    out.grad.up_norm.row(b) = d_up.matrix().transpose();
    out.grad.down_norm.array() += d_down;
  }
  out.value = total * scale;
  if (!std::isfinite(out.value)) throw NumericalError("non-finite loss");
  return out;
}

}  // namespace lwir
