#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lwir/layers.hpp"
#include "lwir/spectral.hpp"

namespace lwir {

/// Per-pixel network input. The wavelength channel is the spectral grid the
/// network was built for and is held by the network itself.
struct NetInput {
  double range_m;
  double angle_deg;
};

enum class Mode { train, infer };

struct NetworkOptions {
  /// Feed range/6500, angle/60 and wavelength/13.5 instead of raw metres,
  /// degrees and micrometres.
  bool input_prescale = false;
};

/// Network outputs for a batch. `down_norm` is shared by every sample since
/// the downwelling branch sees only the wavelength channel.
struct Prediction {
  Eigen::VectorXd down_norm;  // (bands)
  nn::Mat up_norm;            // (batch, bands)
  nn::Mat tau;                // (batch, bands)
  int batch() const { return static_cast<int>(up_norm.rows()); }
};

/// Loss gradient with respect to each network output (same layout as Prediction).
struct PredictionGrad {
  Eigen::VectorXd down_norm;
  nn::Mat up_norm;
  nn::Mat tau;
};

struct LayerShape {
  std::string layer;
  int channels;
  int length;
};

/// Three-branch geometry-dependent network:
///  I   dense 256->256, LeakyReLU, dense 256->256, sigmoid  -> normalised L_down
///  II  one dense layer (+ LeakyReLU) per input: range, angle, wavelength -> 3 x 256
///  III strided-conv encoder (6 blocks) and transposed-conv decoder (6 blocks),
///      final sigmoid -> channel 0 normalised L_up, channel 1 transmission.
class HybridNetwork {
 public:
  static constexpr int kBands = 256;
  static constexpr int kEncoderBlocks = 6;
  static constexpr int kDecoderBlocks = 6;

  explicit HybridNetwork(NetworkOptions options = {},
                         const SpectralGrid& grid = SpectralGrid::standard());

  /// Fan-in scaled uniform weights, zero biases, unit batch-norm scale.
  void init_params(std::uint64_t seed);

  /// Latent block of shape (3, 256 * batch): rows are range, angle, wavelength.
  nn::Mat embed(std::span<const NetInput> inputs);

  Prediction forward(std::span<const NetInput> inputs, Mode mode, bool update_stats = true);

  /// Accumulates parameter gradients for the most recent forward().
  void backward(const PredictionGrad& grad);

  void zero_grad();

  /// Trainable tensors in declaration order (the checkpoint payload order).
  std::vector<nn::Param*> params();
  std::vector<const nn::Param*> params() const;
  /// Batch-norm running statistics in declaration order.
  std::vector<Eigen::VectorXd*> buffers();
  std::vector<const Eigen::VectorXd*> buffers() const;

  std::size_t parameter_count() const;

  /// Layer-by-layer output shapes of the encoder/decoder.
  std::vector<LayerShape> shape_ledger() const;

  /// Text description of every layer; its hash guards checkpoint loading.
  std::string architecture_signature() const;
  std::uint64_t architecture_hash() const;

  const NetworkOptions& options() const { return options_; }
  /// The wavelength input as fed to branches I and II (scaled when prescaling).
  const std::vector<double>& wavelength_channel() const { return wavelengths_; }

 private:
  struct EncoderBlock {
    nn::Conv1d conv;
    nn::BatchNorm1d norm;
    nn::LeakyRelu act;
  };
  struct DecoderBlock {
    nn::ConvTranspose1d conv;
    nn::BatchNorm1d norm;
    nn::LeakyRelu act;
  };

  NetworkOptions options_;
  std::vector<double> wavelengths_;

  // Branch I
  nn::Dense down_fc1_;
  nn::LeakyRelu down_act_;
  nn::Dense down_fc2_;
  nn::Sigmoid down_sigmoid_;

  // Branch II
  nn::Dense range_fc_;
  nn::Dense angle_fc_;
  nn::Dense wave_fc_;
  nn::LeakyRelu range_act_;
  nn::LeakyRelu angle_act_;
  nn::LeakyRelu wave_act_;

  // Branch III
  std::vector<EncoderBlock> encoder_;
  std::vector<DecoderBlock> decoder_;  // first five transposed blocks
  nn::ConvTranspose1d final_conv_;     // sixth, followed by the sigmoid
  nn::Sigmoid out_sigmoid_;

  int batch_ = 0;
};

}  // namespace lwir
