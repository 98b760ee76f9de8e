#pragma once

// Minimal layer set for the hybrid network: dense, strided 1-D convolution,
// 1-D transposed convolution, batch normalisation and two activations, each
// with an exact hand-written backward pass.
//
// Activations are row-major matrices of shape (channels, length * batch);
// column b * length + l holds position l of sample b. Dense layers take
// (features, batch).

#include <Eigen/Core>
#include <string>
#include <vector>

#include "lwir/rng.hpp"

namespace lwir::nn {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class LayerKind { dense, conv, conv_transpose, batch_norm };

const char* to_string(LayerKind kind);

/// A trainable tensor with its gradient accumulator.
struct Param {
  std::string name;
  LayerKind kind;
  Mat value;
  Mat grad;

  Param(std::string n, LayerKind k, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), kind(k), value(Mat::Zero(rows, cols)), grad(Mat::Zero(rows, cols)) {}
  Eigen::Index size() const { return value.size(); }
};

/// Output length of a strided convolution.
constexpr int conv_output_length(int in, int kernel, int stride, int pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

/// Output length of a transposed convolution.
constexpr int conv_transpose_output_length(int in, int kernel, int stride, int pad) {
  return (in - 1) * stride - 2 * pad + kernel;
}

/// Fan-in scaled uniform init: U(-sqrt(6 / fan_in), +sqrt(6 / fan_in)).
void kaiming_uniform(Mat& w, int fan_in, Rng& rng);

class Dense {
 public:
  Dense(std::string name, int in, int out);

  Mat forward(const Mat& x);
  Mat backward(const Mat& dy);
  void init(Rng& rng);

  Param weight;
  Param bias;
  int in_features;
  int out_features;

 private:
  Mat x_;
};

struct ConvShape {
  int in_channels;
  int out_channels;
  int kernel;
  int stride;
  int pad;
  int in_length;
  int out_length;
};

class Conv1d {
 public:
  Conv1d(std::string name, int in_channels, int out_channels, int kernel, int stride, int pad,
         int in_length);

  Mat forward(const Mat& x, int batch);
  Mat backward(const Mat& dy);
  void init(Rng& rng);

  ConvShape shape;
  Param weight;  // (out, in * kernel)
  Param bias;    // (out, 1)

 private:
  Mat cols_;
  int batch_ = 0;
};

class ConvTranspose1d {
 public:
  ConvTranspose1d(std::string name, int in_channels, int out_channels, int kernel, int stride,
                  int pad, int in_length);

  Mat forward(const Mat& x, int batch);
  Mat backward(const Mat& dy);
  void init(Rng& rng);

  ConvShape shape;
  Param weight;  // (out * kernel, in)
  Param bias;    // (out, 1)

 private:
  Mat x_;
  int batch_ = 0;
};

class BatchNorm1d {
 public:
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

  BatchNorm1d(std::string name, int channels);

  /// Training mode normalises with the statistics of `x` itself and, when
  /// `update_stats` is set, folds them into the running estimates.
  Mat forward(const Mat& x, bool training, bool update_stats);
  Mat backward(const Mat& dy);
  void init();

  int channels;
  Param gamma;
  Param beta;
  Eigen::VectorXd running_mean;
  Eigen::VectorXd running_var;

 private:
  Mat xhat_;
  Eigen::VectorXd inv_std_;
  bool training_ = true;
};

class LeakyRelu {
 public:
  static constexpr double kSlope = 0.01;
  Mat forward(const Mat& x);
  Mat backward(const Mat& dy) const;

 private:
  Mat x_;
};

class Sigmoid {
 public:
  Mat forward(const Mat& x);
  Mat backward(const Mat& dy) const;

 private:
  Mat y_;
};

// Column gather / scatter shared by both convolution flavours. `big` has
// `big_length` positions per sample, `small` has `small_length`; entry
// (c * kernel + k, b * small_length + j) of the column matrix pairs with
// position j * stride - pad + k of the big signal.
Mat gather_columns(const Mat& big, int big_length, int small_length, int kernel, int stride, int pad,
                   int batch);
Mat scatter_columns(const Mat& cols, int channels, int big_length, int small_length, int kernel,
                    int stride, int pad, int batch);

}  // namespace lwir::nn
