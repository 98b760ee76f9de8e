#include "lwir/layers.hpp"

#include <cmath>

namespace lwir::nn {

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv: return "conv";
    case LayerKind::conv_transpose: return "conv_transpose";
    case LayerKind::batch_norm: return "batch_norm";
  }
  return "?";
}

void kaiming_uniform(Mat& w, int fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-bound, bound);
}

// ---------------------------------------------------------------------------
// Dense

Dense::Dense(std::string name, int in, int out)
    : weight(name + ".weight", LayerKind::dense, out, in),
      bias(name + ".bias", LayerKind::dense, out, 1),
      in_features(in),
      out_features(out) {}

void Dense::init(Rng& rng) {
  kaiming_uniform(weight.value, in_features, rng);
  bias.value.setZero();
}

Mat Dense::forward(const Mat& x) {
  x_ = x;
  Mat y = weight.value * x;
  y.colwise() += bias.value.col(0);
  return y;
}

Mat Dense::backward(const Mat& dy) {
  weight.grad.noalias() += dy * x_.transpose();
  bias.grad.col(0) += dy.rowwise().sum();
  return weight.value.transpose() * dy;
}

// ---------------------------------------------------------------------------
// Column helpers

Mat gather_columns(const Mat& big, int big_length, int small_length, int kernel, int stride, int pad,
                   int batch) {
  const int channels = static_cast<int>(big.rows());
  Mat cols = Mat::Zero(static_cast<Eigen::Index>(channels) * kernel,
                       static_cast<Eigen::Index>(small_length) * batch);
  for (int c = 0; c < channels; ++c) {
    const double* src = big.row(c).data();
    for (int k = 0; k < kernel; ++k) {
      double* dst = cols.row(static_cast<Eigen::Index>(c) * kernel + k).data();
      for (int b = 0; b < batch; ++b) {
        const double* s = src + static_cast<std::ptrdiff_t>(b) * big_length;
        double* d = dst + static_cast<std::ptrdiff_t>(b) * small_length;
        for (int j = 0; j < small_length; ++j) {
          const int pos = j * stride - pad + k;
          if (pos >= 0 && pos < big_length) d[j] = s[pos];
        }
      }
    }
  }
  return cols;
}

Mat scatter_columns(const Mat& cols, int channels, int big_length, int small_length, int kernel,
                    int stride, int pad, int batch) {
  Mat big = Mat::Zero(channels, static_cast<Eigen::Index>(big_length) * batch);
  for (int c = 0; c < channels; ++c) {
    double* dst = big.row(c).data();
    for (int k = 0; k < kernel; ++k) {
      const double* src = cols.row(static_cast<Eigen::Index>(c) * kernel + k).data();
      for (int b = 0; b < batch; ++b) {
        double* d = dst + static_cast<std::ptrdiff_t>(b) * big_length;
        const double* s = src + static_cast<std::ptrdiff_t>(b) * small_length;
        for (int j = 0; j < small_length; ++j) {
          const int pos = j * stride - pad + k;
          if (pos >= 0 && pos < big_length) d[pos] += s[j];
        }
      }
    }
  }
  return big;
}

// ---------------------------------------------------------------------------
// Conv1d

Conv1d::Conv1d(std::string name, int in_channels, int out_channels, int kernel, int stride, int pad,
               int in_length)
    : shape{in_channels, out_channels, kernel, stride, pad, in_length,
            conv_output_length(in_length, kernel, stride, pad)},
      weight(name + ".weight", LayerKind::conv, out_channels, in_channels * kernel),
      bias(name + ".bias", LayerKind::conv, out_channels, 1) {}

void Conv1d::init(Rng& rng) {
  kaiming_uniform(weight.value, shape.in_channels * shape.kernel, rng);
  bias.value.setZero();
}

Mat Conv1d::forward(const Mat& x, int batch) {
  batch_ = batch;
  cols_ = gather_columns(x, shape.in_length, shape.out_length, shape.kernel, shape.stride, shape.pad,
                         batch);
  Mat y = weight.value * cols_;
  y.colwise() += bias.value.col(0);
  return y;
}

Mat Conv1d::backward(const Mat& dy) {
  weight.grad.noalias() += dy * cols_.transpose();
  bias.grad.col(0) += dy.rowwise().sum();
  const Mat dcols = weight.value.transpose() * dy;
  return scatter_columns(dcols, shape.in_channels, shape.in_length, shape.out_length, shape.kernel,
                         shape.stride, shape.pad, batch_);
}

// ---------------------------------------------------------------------------
// ConvTranspose1d

ConvTranspose1d::ConvTranspose1d(std::string name, int in_channels, int out_channels, int kernel,
                                 int stride, int pad, int in_length)
    : shape{in_channels, out_channels, kernel, stride, pad, in_length,
            conv_transpose_output_length(in_length, kernel, stride, pad)},
      weight(name + ".weight", LayerKind::conv_transpose, out_channels * kernel, in_channels),
      bias(name + ".bias", LayerKind::conv_transpose, out_channels, 1) {}

void ConvTranspose1d::init(Rng& rng) {
  kaiming_uniform(weight.value, shape.in_channels * shape.kernel, rng);
  bias.value.setZero();
}

Mat ConvTranspose1d::forward(const Mat& x, int batch) {
  batch_ = batch;
  x_ = x;
  const Mat cols = weight.value * x;
  Mat y = scatter_columns(cols, shape.out_channels, shape.out_length, shape.in_length, shape.kernel,
                          shape.stride, shape.pad, batch);
  y.colwise() += bias.value.col(0);
  return y;
}

Mat ConvTranspose1d::backward(const Mat& dy) {
  bias.grad.col(0) += dy.rowwise().sum();
  const Mat dcols = gather_columns(dy, shape.out_length, shape.in_length, shape.kernel, shape.stride,
                                   shape.pad, batch_);
  weight.grad.noalias() += dcols * x_.transpose();
  return weight.value.transpose() * dcols;
}

// ---------------------------------------------------------------------------
// BatchNorm1d

BatchNorm1d::BatchNorm1d(std::string name, int c)
    : channels(c),
      gamma(name + ".gamma", LayerKind::batch_norm, c, 1),
      beta(name + ".beta", LayerKind::batch_norm, c, 1),
      running_mean(Eigen::VectorXd::Zero(c)),
      running_var(Eigen::VectorXd::Ones(c)) {
  init();
}

void BatchNorm1d::init() {
  gamma.value.setOnes();
  beta.value.setZero();
  running_mean.setZero();
  running_var.setOnes();
}

Mat BatchNorm1d::forward(const Mat& x, bool training, bool update_stats) {
  training_ = training;
  const Eigen::Index n = x.cols();
  xhat_.resize(x.rows(), n);
  inv_std_.resize(channels);
  for (int c = 0; c < channels; ++c) {
    double mean;
    double var;
    if (training) {
      mean = x.row(c).mean();
      var = (x.row(c).array() - mean).square().mean();
      if (update_stats) {
        const double unbiased = n > 1 ? var * static_cast<double>(n) / static_cast<double>(n - 1) : var;
        running_mean[c] = (1.0 - kMomentum) * running_mean[c] + kMomentum * mean;
        running_var[c] = (1.0 - kMomentum) * running_var[c] + kMomentum * unbiased;
      }
    } else {
      mean = running_mean[c];
      var = running_var[c];
    }
    inv_std_[c] = 1.0 / std::sqrt(var + kEps);
    xhat_.row(c) = (x.row(c).array() - mean) * inv_std_[c];
  }
  Mat y(x.rows(), n);
  for (int c = 0; c < channels; ++c) {
    y.row(c) = xhat_.row(c).array() * gamma.value(c, 0) + beta.value(c, 0);
  }
  return y;
}

Mat BatchNorm1d::backward(const Mat& dy) {
  const double n = static_cast<double>(dy.cols());
  Mat dx(dy.rows(), dy.cols());
  for (int c = 0; c < channels; ++c) {
    const double sum_dy = dy.row(c).sum();
    const double sum_dy_xhat = dy.row(c).dot(xhat_.row(c));
    gamma.grad(c, 0) += sum_dy_xhat;
    beta.grad(c, 0) += sum_dy;
    const double g = gamma.value(c, 0) * inv_std_[c];
    if (training_) {
      dx.row(c) = g / n * (n * dy.row(c).array() - sum_dy - xhat_.row(c).array() * sum_dy_xhat);
    } else {
      dx.row(c) = g * dy.row(c).array();
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Activations

Mat LeakyRelu::forward(const Mat& x) {
  x_ = x;
  return x.unaryExpr([](double v) { return v > 0.0 ? v : kSlope * v; });
}

Mat LeakyRelu::backward(const Mat& dy) const {
  return dy.binaryExpr(x_, [](double g, double v) { return v > 0.0 ? g : kSlope * g; });
}

Mat Sigmoid::forward(const Mat& x) {
  y_ = x.unaryExpr([](double v) {
    // Split keeps exp() from overflowing for large |v|.
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
  return y_;
}

Mat Sigmoid::backward(const Mat& dy) const {
  return dy.binaryExpr(y_, [](double g, double s) { return g * s * (1.0 - s); });
}

}  // namespace lwir::nn
