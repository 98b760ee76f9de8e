#include <gtest/gtest.h>

#include <functional>

#include "lwir/layers.hpp"

using namespace lwir;
using namespace lwir::nn;

namespace {

Mat random_mat(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
  return m;
}

// Scalar probe loss sum(w .* y) and its gradient w.
struct Probe {
  Mat w;
  double operator()(const Mat& y) const { return (w.array() * y.array()).sum(); }
};

// Central differences of `loss` with respect to every entry of `x`.
Mat numeric_grad(Mat& x, const std::function<double()>& loss, double h = 1e-6) {
  Mat g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x.data()[i];
    x.data()[i] = keep + h;
    const double up = loss();
    x.data()[i] = keep - h;
    const double down = loss();
    x.data()[i] = keep;
    g.data()[i] = (up - down) / (2 * h);
  }
  return g;
}

void expect_close(const Mat& analytic, const Mat& numeric, double tol) {
  ASSERT_EQ(analytic.rows(), numeric.rows());
  ASSERT_EQ(analytic.cols(), numeric.cols());
  const double scale = std::max(1.0, numeric.cwiseAbs().maxCoeff());
  EXPECT_LE((analytic - numeric).cwiseAbs().maxCoeff() / scale, tol);
}

}  // namespace

TEST(Shapes, OutputLengthFormulas) {
  EXPECT_EQ(conv_output_length(256, 11, 1, 1), 248);
  EXPECT_EQ(conv_output_length(248, 7, 2, 1), 122);
  EXPECT_EQ(conv_output_length(13, 13, 1, 0), 1);
  EXPECT_EQ(conv_transpose_output_length(1, 13, 1, 0), 13);
  EXPECT_EQ(conv_transpose_output_length(13, 6, 2, 1), 28);
  EXPECT_EQ(conv_transpose_output_length(247, 12, 1, 1), 256);
}

TEST(Dense, GradientCheck) {
  Rng rng(1);
  Dense d("d", 5, 4);
  d.init(rng);
  d.bias.value = random_mat(4, 1, rng);
  Mat x = random_mat(5, 3, rng);
  const Probe probe{random_mat(4, 3, rng)};
  auto loss = [&] { return probe(d.forward(x)); };

  loss();
  d.weight.grad.setZero();
  d.bias.grad.setZero();
  const Mat dx = d.backward(probe.w);
  expect_close(dx, numeric_grad(x, loss), 1e-8);
  expect_close(d.weight.grad, numeric_grad(d.weight.value, loss), 1e-8);
  expect_close(d.bias.grad, numeric_grad(d.bias.value, loss), 1e-8);
}

TEST(Conv1d, MatchesDirectConvolution) {
  Rng rng(2);
  const int cin = 2, cout = 3, k = 4, s = 2, p = 1, len = 11, batch = 2;
  Conv1d c("c", cin, cout, k, s, p, len);
  c.init(rng);
  c.bias.value = random_mat(cout, 1, rng);
  const Mat x = random_mat(cin, len * batch, rng);
  const Mat y = c.forward(x, batch);
  const int out = conv_output_length(len, k, s, p);
  ASSERT_EQ(y.cols(), out * batch);
  for (int b = 0; b < batch; ++b) {
    for (int o = 0; o < cout; ++o) {
      for (int j = 0; j < out; ++j) {
        double acc = c.bias.value(o, 0);
        for (int i = 0; i < cin; ++i) {
          for (int t = 0; t < k; ++t) {
            const int pos = j * s - p + t;
            if (pos >= 0 && pos < len) acc += c.weight.value(o, i * k + t) * x(i, b * len + pos);
          }
        }
        EXPECT_NEAR(y(o, b * out + j), acc, 1e-13);
      }
    }
  }
}

TEST(Conv1d, GradientCheck) {
  Rng rng(3);
  const int batch = 2, len = 13;
  Conv1d c("c", 2, 3, 5, 2, 1, len);
  c.init(rng);
  c.bias.value = random_mat(3, 1, rng);
  Mat x = random_mat(2, len * batch, rng);
  const Probe probe{random_mat(3, c.shape.out_length * batch, rng)};
  auto loss = [&] { return probe(c.forward(x, batch)); };

  loss();
  const Mat dx = c.backward(probe.w);
  expect_close(dx, numeric_grad(x, loss), 1e-8);
  expect_close(c.weight.grad, numeric_grad(c.weight.value, loss), 1e-8);
  expect_close(c.bias.grad, numeric_grad(c.bias.value, loss), 1e-8);
}

TEST(ConvTranspose1d, IsAdjointOfConv) {
  // <conv(x), y> == <x, convT(y)> with shared weights and zero biases.
  Rng rng(4);
  const int cin = 3, cout = 2, k = 6, s = 2, p = 1, len = 28, batch = 2;
  Conv1d c("c", cin, cout, k, s, p, len);
  c.init(rng);
  ConvTranspose1d t("t", cout, cin, k, s, p, c.shape.out_length);
  ASSERT_EQ(t.shape.out_length, len);
  // Conv weight (cout, cin * k) and transposed weight (cin * k, cout).
  t.weight.value = c.weight.value.transpose();
  const Mat x = random_mat(cin, len * batch, rng);
  const Mat y = random_mat(cout, c.shape.out_length * batch, rng);
  const double lhs = (c.forward(x, batch).array() * y.array()).sum();
  const double rhs = (x.array() * t.forward(y, batch).array()).sum();
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(ConvTranspose1d, GradientCheck) {
  Rng rng(5);
  const int batch = 2, len = 6;
  ConvTranspose1d t("t", 3, 2, 7, 2, 1, len);
  t.init(rng);
  t.bias.value = random_mat(2, 1, rng);
  Mat x = random_mat(3, len * batch, rng);
  const Probe probe{random_mat(2, t.shape.out_length * batch, rng)};
  auto loss = [&] { return probe(t.forward(x, batch)); };

  loss();
  const Mat dx = t.backward(probe.w);
  expect_close(dx, numeric_grad(x, loss), 1e-8);
  expect_close(t.weight.grad, numeric_grad(t.weight.value, loss), 1e-8);
  expect_close(t.bias.grad, numeric_grad(t.bias.value, loss), 1e-8);
}

TEST(BatchNorm1d, TrainingGradientCheck) {
  Rng rng(6);
  BatchNorm1d bn("bn", 3);
  bn.gamma.value = random_mat(3, 1, rng);
  bn.beta.value = random_mat(3, 1, rng);
  Mat x = random_mat(3, 10, rng);
  const Probe probe{random_mat(3, 10, rng)};
  auto loss = [&] { return probe(bn.forward(x, true, false)); };

  loss();
  const Mat dx = bn.backward(probe.w);
  expect_close(dx, numeric_grad(x, loss), 1e-7);
  expect_close(bn.gamma.grad, numeric_grad(bn.gamma.value, loss), 1e-7);
  expect_close(bn.beta.grad, numeric_grad(bn.beta.value, loss), 1e-7);
}

TEST(BatchNorm1d, RunningStatistics) {
  BatchNorm1d bn("bn", 1);
  Mat x(1, 4);
  x << 1.0, 2.0, 3.0, 6.0;
  const Mat y = bn.forward(x, true, true);
  EXPECT_NEAR(y.mean(), 0.0, 1e-15);
  // mean 3, biased var 3.5, unbiased 14/3
  EXPECT_NEAR(bn.running_mean(0), 0.1 * 3.0, 1e-15);
  EXPECT_NEAR(bn.running_var(0), 0.9 + 0.1 * 14.0 / 3.0, 1e-15);

  const Mat before_mean = bn.running_mean;
  bn.forward(x, true, false);
  EXPECT_EQ(bn.running_mean, before_mean);

  const Mat z = bn.forward(x, false, false);
  EXPECT_NEAR(z(0, 0), (1.0 - bn.running_mean(0)) / std::sqrt(bn.running_var(0) + BatchNorm1d::kEps), 1e-14);
}

TEST(BatchNorm1d, InferenceGradientCheck) {
  Rng rng(7);
  BatchNorm1d bn("bn", 2);
  bn.running_mean << 0.3, -0.2;
  bn.running_var << 1.5, 0.7;
  bn.gamma.value = random_mat(2, 1, rng);
  Mat x = random_mat(2, 5, rng);
  const Probe probe{random_mat(2, 5, rng)};
  auto loss = [&] { return probe(bn.forward(x, false, false)); };
  loss();
  const Mat dx = bn.backward(probe.w);
  expect_close(dx, numeric_grad(x, loss), 1e-8);
}

TEST(Activations, LeakyReluAndSigmoid) {
  Mat x(1, 4);
  x << -2.0, -0.5, 0.5, 800.0;
  LeakyRelu lr;
  const Mat y = lr.forward(x);
  EXPECT_DOUBLE_EQ(y(0, 0), -0.02);
  EXPECT_DOUBLE_EQ(y(0, 2), 0.5);
  const Mat g = lr.backward(Mat::Ones(1, 4));
  EXPECT_DOUBLE_EQ(g(0, 1), 0.01);
  EXPECT_DOUBLE_EQ(g(0, 3), 1.0);

  Sigmoid sg;
  Mat big(1, 3);
  big << -800.0, 0.0, 800.0;
  const Mat s = sg.forward(big);
  EXPECT_EQ(s(0, 0), 0.0);
  EXPECT_EQ(s(0, 1), 0.5);
  EXPECT_EQ(s(0, 2), 1.0);
  EXPECT_TRUE(s.allFinite());

  Rng rng(8);
  Mat z = random_mat(2, 3, rng);
  const Probe probe{random_mat(2, 3, rng)};
  Sigmoid s2;
  auto loss = [&] { return probe(s2.forward(z)); };
  loss();
  const Mat dz = s2.backward(probe.w);
  expect_close(dz, numeric_grad(z, loss), 1e-9);
}
