#pragma once

#include <span>

#include "lwir/dataset.hpp"
#include "lwir/network.hpp"

namespace lwir {

enum class LossKind { loss1, loss2 };

/// A record prepared for the loss: network input, surface terms and
/// normalised targets. Simulated records carry every target; labelled
/// field-like records only the at-sensor radiance.
struct LossSample {
  NetInput input{};
  Eigen::VectorXd eps;         // emissivity
  Eigen::VectorXd planck;      // B(T) of the target
  Eigen::VectorXd total_norm;  // normalised L_total
  bool has_components = false;
  Eigen::VectorXd emit_norm;
  Eigen::VectorXd down_norm;
  Eigen::VectorXd up_norm;
  Eigen::VectorXd tau;
};

/// Throws WithheldComponentError for unlabelled records.
LossSample make_loss_sample(const SampleRecord& r, const Spectrum& emissivity,
                            const NormalizationStats& stats,
                            const SpectralGrid& grid = SpectralGrid::standard());

/// Loss value (mean over the batch) and, optionally, its gradient with
/// respect to every network output.
struct LossResult {
  double value = 0.0;
  PredictionGrad grad;
};

/// loss1: mean over {L_total, L_emit, L_down, L_up, tau} of the band-mean
/// squared error in normalised space, with L_emit = eps B tau_hat and
/// L_total composed from the de-normalised predictions, then re-normalised.
/// loss2: band-mean squared error of the normalised composed L_total only.
/// loss1 needs samples with components (DataError otherwise).
LossResult evaluate_loss(LossKind kind, const Prediction& pred, std::span<const LossSample* const> batch,
                         const NormalizationStats& stats, bool with_grad);

/// Composed at-sensor radiance and surface emission (physical units) for
/// sample `b` of a prediction.
struct ComposedRadiance {
  Eigen::VectorXd total;
  Eigen::VectorXd emit;
};
ComposedRadiance compose_prediction(const Prediction& pred, int b, const LossSample& s,
                                    const NormalizationStats& stats);

}  // namespace lwir
