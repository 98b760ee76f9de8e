#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "lwir/config.hpp"
#include "lwir/dataset.hpp"
#include "lwir/loss.hpp"
#include "lwir/network.hpp"

namespace lwir {

enum class TrainMode { mixed, ill_posed_only };
std::string to_string(TrainMode m);
TrainMode parse_train_mode(const std::string& s);

struct TrainConfig {
  int epochs = 200;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 42;
  TrainMode mode = TrainMode::mixed;
  int sim_to_field_ratio = 2;
  bool input_prescale = false;

  /// Throws ConfigError on non-positive hyperparameters.
  void validate() const;
  KeyValueConfig to_config() const;
  /// Unknown keys are a ConfigError; missing keys keep their defaults.
  static TrainConfig from_config(const KeyValueConfig& c);
};

/// Batches of indices into the simulated and field training lists, in the
/// order they are visited (all simulated batches first).
struct EpochPlan {
  std::vector<std::vector<std::size_t>> sim_batches;
  std::vector<std::vector<std::size_t>> field_batches;
};

/// Phase 1 draws ratio x n_field simulated records without replacement,
/// phase 2 visits every field record; both reshuffled per epoch from
/// (seed, epoch). A lone trailing record joins the previous batch so batch
/// norm never sees a batch of one. Throws DataError when mixed mode has no
/// field records or the simulated pool is too small.
EpochPlan epoch_plan(std::size_t n_sim, std::size_t n_field, const TrainConfig& cfg, int epoch);

struct TrainingSet {
  std::vector<LossSample> sim_train;
  std::vector<LossSample> sim_val;
  std::vector<LossSample> field_train;  // labelled field-like records only
  std::vector<LossSample> field_val;
};

/// Unlabelled records are skipped. Emissivities are looked up by material id.
std::vector<LossSample> make_loss_samples(const RecordRefs& records, std::span<const MaterialSpec> materials,
                                          const NormalizationStats& stats);

struct AdamState {
  std::vector<nn::Mat> m;
  std::vector<nn::Mat> v;
  std::int64_t step = 0;
};

/// One bias-corrected Adam update from the accumulated gradients.
void adam_update(HybridNetwork& net, AdamState& st, const TrainConfig& cfg);

/// Everything needed to continue a run bit-exactly.
struct TrainState {
  HybridNetwork net;
  AdamState adam;
  int epochs_done = 0;
  double initial_loss1_val = std::numeric_limits<double>::quiet_NaN();
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  /// Parameter values then buffers of the best-validation epoch.
  std::vector<Eigen::VectorXd> best;

  explicit TrainState(HybridNetwork n) : net(std::move(n)) {}
  /// Network initialised from cfg.seed with empty optimizer state.
  static TrainState fresh(const TrainConfig& cfg);
  /// Copy of the network with the best-validation weights (the current ones
  /// if no epoch has finished).
  HybridNetwork best_network() const;
};

struct EpochLog {
  int epoch = 0;  // 1-based
  double loss1_train = std::numeric_limits<double>::quiet_NaN();
  double loss2_train = std::numeric_limits<double>::quiet_NaN();
  double loss1_val = std::numeric_limits<double>::quiet_NaN();
  double loss2_val = std::numeric_limits<double>::quiet_NaN();
  double loss_val = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochLog> epochs;
  double initial_loss1_val = std::numeric_limits<double>::quiet_NaN();
  double wall_seconds = 0.0;
  int best_epoch = -1;
  double best_val = std::numeric_limits<double>::infinity();
  std::string optimizer;
  std::string checkpoint;

  /// epoch,loss1_train,loss2_train,loss_val,seconds,loss1_val,loss2_val
  std::string to_csv() const;
};

/// Validation losses with batch norm in inference mode. Empty sets give NaN.
struct ValidationLoss {
  double loss1 = std::numeric_limits<double>::quiet_NaN();
  double loss2 = std::numeric_limits<double>::quiet_NaN();
};
ValidationLoss validation_loss(HybridNetwork& net, const TrainingSet& data, const NormalizationStats& stats);

/// Model-selection metric: loss1 + loss2 in mixed mode, loss2 alone when
/// training is ill-posed only.
double selection_metric(const ValidationLoss& v, TrainMode mode);

using EpochCallback = std::function<void(const TrainState&, const EpochLog&)>;

/// Runs epochs state.epochs_done .. cfg.epochs - 1. Throws NumericalError
/// (with epoch, batch and parameter norm) on a non-finite loss.
TrainReport train(TrainState& state, const TrainingSet& data, const NormalizationStats& stats,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

// ---- checkpoints -----------------------------------------------------------

struct Checkpoint {
  TrainState state;
  NormalizationStats stats;
  KeyValueConfig manifest;
  /// The caller-supplied manifest entries (the `extra` argument at save time).
  KeyValueConfig extra;
  /// Optimizer moments and best-epoch weights were stored.
  bool resumable = false;
};

/// Magic "LWIRNN1\n", u64 manifest length, manifest text, then float64
/// payload: parameters and buffers in declaration order, optionally followed
/// by the Adam moments and the best-epoch snapshot. `extra` entries are added
/// to the manifest and may not reuse a built-in key (ConfigError).
/// to the manifest.
void save_checkpoint(const std::string& path, const TrainState& state, const NormalizationStats& stats,
                     bool resumable, const KeyValueConfig& extra = {});
/// Inference-only checkpoint of `net`.
void save_model(const std::string& path, const HybridNetwork& net, const NormalizationStats& stats,
                const KeyValueConfig& extra = {});
/// Throws FormatError on bad magic, grid or architecture mismatch, and
/// truncated or oversized payloads.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace lwir
