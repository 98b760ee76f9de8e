#include "lwir/network.hpp"

#include <array>
#include <sstream>

#include "lwir/errors.hpp"
#include "lwir/hash.hpp"

namespace lwir {
namespace {

struct BlockSpec {
  const char* name;
  int in_channels;
  int out_channels;
  int kernel;
  int stride;
  int pad;
  int out_length;  // expected output length, checked below
};

// Encoder / decoder layout. The last transposed layer runs at stride 1: with
// stride 2 it would emit (247 - 1) * 2 - 2 + 12 = 502 samples instead of 256.
constexpr std::array<BlockSpec, 6> kEncoder{{
    {"conv1", 3, 16, 11, 1, 1, 248},
    {"conv2", 16, 32, 7, 2, 1, 122},
    {"conv3", 32, 64, 7, 2, 1, 59},
    {"conv4", 64, 128, 7, 2, 1, 28},
    {"conv5", 128, 256, 5, 2, 1, 13},
    {"conv6", 256, 256, 13, 1, 0, 1},
}};

constexpr std::array<BlockSpec, 6> kDecoder{{
    {"deconv1", 256, 256, 13, 1, 0, 13},
    {"deconv2", 256, 128, 6, 2, 1, 28},
    {"deconv3", 128, 64, 7, 2, 1, 59},
    {"deconv4", 64, 32, 8, 2, 1, 122},
    {"deconv5", 32, 16, 7, 2, 1, 247},
    {"deconv6", 16, 2, 12, 1, 1, 256},
}};

constexpr bool encoder_lengths_match() {
  int len = HybridNetwork::kBands;
  for (const auto& b : kEncoder) {
    len = nn::conv_output_length(len, b.kernel, b.stride, b.pad);
    if (len != b.out_length) return false;
  }
  return true;
}

constexpr bool decoder_lengths_match() {
  int len = kEncoder.back().out_length;
  for (const auto& b : kDecoder) {
    len = nn::conv_transpose_output_length(len, b.kernel, b.stride, b.pad);
    if (len != b.out_length) return false;
  }
  return len == HybridNetwork::kBands;
}

static_assert(encoder_lengths_match(), "encoder output lengths drifted from the layout table");
static_assert(decoder_lengths_match(), "decoder output lengths drifted from the layout table");

constexpr double kRangeScale = 6500.0;
constexpr double kAngleScale = 60.0;
constexpr double kWavelengthScale = 13.5;

}  // namespace

HybridNetwork::HybridNetwork(NetworkOptions options, const SpectralGrid& grid)
    : options_(options),
      wavelengths_(grid.wavelengths().begin(), grid.wavelengths().end()),
      down_fc1_("down_fc1", kBands, kBands),
      down_fc2_("down_fc2", kBands, kBands),
      range_fc_("range_fc", 1, kBands),
      angle_fc_("angle_fc", 1, kBands),
      wave_fc_("wave_fc", kBands, kBands),
      final_conv_(kDecoder[5].name, kDecoder[5].in_channels, kDecoder[5].out_channels,
                  kDecoder[5].kernel, kDecoder[5].stride, kDecoder[5].pad, kDecoder[4].out_length) {
  if (grid.size() != static_cast<std::size_t>(kBands)) {
    throw DataError("the hybrid network needs a 256-band spectral grid");
  }
  if (options_.input_prescale) {
    for (double& w : wavelengths_) w /= kWavelengthScale;
  }
  int len = kBands;
  for (const auto& b : kEncoder) {
    encoder_.push_back(EncoderBlock{
        nn::Conv1d(b.name, b.in_channels, b.out_channels, b.kernel, b.stride, b.pad, len),
        nn::BatchNorm1d(std::string(b.name) + ".bn", b.out_channels), nn::LeakyRelu{}});
    len = encoder_.back().conv.shape.out_length;
  }
  for (std::size_t i = 0; i + 1 < kDecoder.size(); ++i) {
    const auto& b = kDecoder[i];
    decoder_.push_back(DecoderBlock{
        nn::ConvTranspose1d(b.name, b.in_channels, b.out_channels, b.kernel, b.stride, b.pad, len),
        nn::BatchNorm1d(std::string(b.name) + ".bn", b.out_channels), nn::LeakyRelu{}});
    len = decoder_.back().conv.shape.out_length;
  }
}

void HybridNetwork::init_params(std::uint64_t seed) {
  Rng rng(seed);
  down_fc1_.init(rng);
  down_fc2_.init(rng);
  range_fc_.init(rng);
  angle_fc_.init(rng);
  wave_fc_.init(rng);
  for (auto& b : encoder_) {
    b.conv.init(rng);
    b.norm.init();
  }
  for (auto& b : decoder_) {
    b.conv.init(rng);
    b.norm.init();
  }
  final_conv_.init(rng);
}

nn::Mat HybridNetwork::embed(std::span<const NetInput> inputs) {
  const int batch = static_cast<int>(inputs.size());
  nn::Mat range_in(1, batch);
  nn::Mat angle_in(1, batch);
  for (int b = 0; b < batch; ++b) {
    range_in(0, b) = inputs[b].range_m;
    angle_in(0, b) = inputs[b].angle_deg;
    if (options_.input_prescale) {
      range_in(0, b) /= kRangeScale;
      angle_in(0, b) /= kAngleScale;
    }
  }
  const nn::Mat wave_in = Eigen::Map<const Eigen::VectorXd>(wavelengths_.data(), kBands);

  const nn::Mat r = range_act_.forward(range_fc_.forward(range_in));  // (256, batch)
  const nn::Mat a = angle_act_.forward(angle_fc_.forward(angle_in));
  const nn::Mat w = wave_act_.forward(wave_fc_.forward(wave_in));     // (256, 1)

  nn::Mat latent(3, static_cast<Eigen::Index>(kBands) * batch);
  for (int b = 0; b < batch; ++b) {
    latent.block(0, static_cast<Eigen::Index>(b) * kBands, 1, kBands) = r.col(b).transpose();
    latent.block(1, static_cast<Eigen::Index>(b) * kBands, 1, kBands) = a.col(b).transpose();
    latent.block(2, static_cast<Eigen::Index>(b) * kBands, 1, kBands) = w.col(0).transpose();
  }
  return latent;
}

Prediction HybridNetwork::forward(std::span<const NetInput> inputs, Mode mode, bool update_stats) {
  if (inputs.empty()) throw DataError("forward pass needs at least one input");
  const bool training = mode == Mode::train;
  batch_ = static_cast<int>(inputs.size());

  Prediction out;
  {
    const nn::Mat wave_in = Eigen::Map<const Eigen::VectorXd>(wavelengths_.data(), kBands);
    const nn::Mat h = down_act_.forward(down_fc1_.forward(wave_in));
    out.down_norm = down_sigmoid_.forward(down_fc2_.forward(h)).col(0);
  }

  nn::Mat x = embed(inputs);
  for (auto& b : encoder_) {
    x = b.act.forward(b.norm.forward(b.conv.forward(x, batch_), training, update_stats));
  }
  for (auto& b : decoder_) {
    x = b.act.forward(b.norm.forward(b.conv.forward(x, batch_), training, update_stats));
  }
  x = out_sigmoid_.forward(final_conv_.forward(x, batch_));  // (2, 256 * batch)

  out.up_norm = Eigen::Map<const nn::Mat>(x.row(0).data(), batch_, kBands);
  out.tau = Eigen::Map<const nn::Mat>(x.row(1).data(), batch_, kBands);
  return out;
}

void HybridNetwork::backward(const PredictionGrad& grad) {
  {
    nn::Mat g = down_sigmoid_.backward(nn::Mat(grad.down_norm));
    g = down_fc2_.backward(g);
    g = down_act_.backward(g);
    down_fc1_.backward(g);
  }

  const Eigen::Index n = static_cast<Eigen::Index>(kBands) * batch_;
  nn::Mat g(2, n);
  g.row(0) = Eigen::Map<const Eigen::RowVectorXd>(grad.up_norm.data(), n);
  g.row(1) = Eigen::Map<const Eigen::RowVectorXd>(grad.tau.data(), n);

  g = final_conv_.backward(out_sigmoid_.backward(g));
  for (auto it = decoder_.rbegin(); it != decoder_.rend(); ++it) {
    g = it->conv.backward(it->norm.backward(it->act.backward(g)));
  }
  for (auto it = encoder_.rbegin(); it != encoder_.rend(); ++it) {
    g = it->conv.backward(it->norm.backward(it->act.backward(g)));
  }

  // g is the gradient of the (3, 256 * batch) latent block.
  nn::Mat dr(kBands, batch_);
  nn::Mat da(kBands, batch_);
  nn::Mat dw = nn::Mat::Zero(kBands, 1);
  for (int b = 0; b < batch_; ++b) {
    const Eigen::Index off = static_cast<Eigen::Index>(b) * kBands;
    dr.col(b) = g.block(0, off, 1, kBands).transpose();
    da.col(b) = g.block(1, off, 1, kBands).transpose();
    dw.col(0) += g.block(2, off, 1, kBands).transpose();
  }
  range_fc_.backward(range_act_.backward(dr));
  angle_fc_.backward(angle_act_.backward(da));
  wave_fc_.backward(wave_act_.backward(dw));
}

void HybridNetwork::zero_grad() {
  for (nn::Param* p : params()) p->grad.setZero();
}

std::vector<nn::Param*> HybridNetwork::params() {
  std::vector<nn::Param*> out;
  auto dense = [&out](nn::Dense& d) {
    out.push_back(&d.weight);
    out.push_back(&d.bias);
  };
  dense(down_fc1_);
  dense(down_fc2_);
  dense(range_fc_);
  dense(angle_fc_);
  dense(wave_fc_);
  for (auto& b : encoder_) {
    out.push_back(&b.conv.weight);
    out.push_back(&b.conv.bias);
    out.push_back(&b.norm.gamma);
    out.push_back(&b.norm.beta);
  }
  for (auto& b : decoder_) {
    out.push_back(&b.conv.weight);
    out.push_back(&b.conv.bias);
    out.push_back(&b.norm.gamma);
    out.push_back(&b.norm.beta);
  }
  out.push_back(&final_conv_.weight);
  out.push_back(&final_conv_.bias);
  return out;
}

std::vector<const nn::Param*> HybridNetwork::params() const {
  auto mut = const_cast<HybridNetwork*>(this)->params();
  return {mut.begin(), mut.end()};
}

std::vector<Eigen::VectorXd*> HybridNetwork::buffers() {
  std::vector<Eigen::VectorXd*> out;
  for (auto& b : encoder_) {
    out.push_back(&b.norm.running_mean);
    out.push_back(&b.norm.running_var);
  }
  for (auto& b : decoder_) {
    out.push_back(&b.norm.running_mean);
    out.push_back(&b.norm.running_var);
  }
  return out;
}

std::vector<const Eigen::VectorXd*> HybridNetwork::buffers() const {
  auto mut = const_cast<HybridNetwork*>(this)->buffers();
  return {mut.begin(), mut.end()};
}

std::size_t HybridNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const nn::Param* p : params()) n += static_cast<std::size_t>(p->size());
  return n;
}

std::vector<LayerShape> HybridNetwork::shape_ledger() const {
  std::vector<LayerShape> out;
  out.push_back({"latent", 3, kBands});
  for (const auto& b : encoder_) {
    out.push_back({b.norm.gamma.name.substr(0, b.norm.gamma.name.find('.')), b.conv.shape.out_channels,
                   b.conv.shape.out_length});
  }
  for (const auto& b : decoder_) {
    out.push_back({b.norm.gamma.name.substr(0, b.norm.gamma.name.find('.')), b.conv.shape.out_channels,
                   b.conv.shape.out_length});
  }
  out.push_back({kDecoder[5].name, final_conv_.shape.out_channels, final_conv_.shape.out_length});
  return out;
}

std::string HybridNetwork::architecture_signature() const {
  std::ostringstream os;
  os << "hybrid-v1 bands=" << kBands << " prescale=" << (options_.input_prescale ? 1 : 0);
  for (const nn::Param* p : params()) {
    os << ' ' << p->name << '[' << p->value.rows() << 'x' << p->value.cols() << ']';
  }
  auto conv = [&os](const nn::ConvShape& s) {
    os << " k" << s.kernel << 's' << s.stride << 'p' << s.pad << 'l' << s.in_length << "->"
       << s.out_length;
  };
  for (const auto& b : encoder_) conv(b.conv.shape);
  for (const auto& b : decoder_) conv(b.conv.shape);
  conv(final_conv_.shape);
  return os.str();
}

std::uint64_t HybridNetwork::architecture_hash() const { return fnv1a(architecture_signature()); }

}  // namespace lwir
