#include <cmath>

#include "doctest.h"
#include "wcd/nncore.hpp"

using namespace wcd;
using nn::Mat;
using nn::Vec;

namespace {

Mat random_mat(nn::Rng& rng, int rows, int cols, double scale = 1.0) {
  Mat m(rows, cols);
  for (int i = 0; i < rows; i++)
    for (int j = 0; j < cols; j++) m(i, j) = rng.uniform(-scale, scale);
  return m;
}

// Central finite differences of a scalar function w.r.t. one tensor.
template <typename LossFn>
Mat finite_diff(nn::Tensor& t, LossFn loss, double h = 1e-5) {
  Mat g(t.value.rows(), t.value.cols());
  for (Eigen::Index i = 0; i < t.value.rows(); i++) {
    for (Eigen::Index j = 0; j < t.value.cols(); j++) {
      double orig = t.value(i, j);
      t.value(i, j) = orig + h;
      double up = loss();
      t.value(i, j) = orig - h;
      double down = loss();
      t.value(i, j) = orig;
      g(i, j) = (up - down) / (2 * h);
    }
  }
  return g;
}

double rel_err(const Mat& a, const Mat& b) {
  double denom = std::max(1e-12, std::max(a.cwiseAbs().maxCoeff(),
                                          b.cwiseAbs().maxCoeff()));
  return (a - b).cwiseAbs().maxCoeff() / denom;
}

}  // namespace

TEST_CASE("dense_forward identity and constant") {
  nn::Rng rng(1);
  nn::Dense layer("d", 3, 3);
  layer.W.value = Mat::Identity(3, 3);
  Mat x = random_mat(rng, 4, 3);
  CHECK(rel_err(nn::dense_forward(x, layer), x) < 1e-12);

  layer.W.value.setZero();
  layer.b.value << 1.0, 2.0, 3.0;
  Mat y = nn::dense_forward(x, layer);
  for (int i = 0; i < 4; i++) {
    CHECK(y(i, 0) == 1.0);
    CHECK(y(i, 2) == 3.0);
  }
}

TEST_CASE("dense_forward matches a naive triple loop") {
  nn::Rng rng(2);
  nn::Dense layer("d", 7, 5);
  nn::init_dense(layer, rng);
  layer.b.value = random_mat(rng, 1, 5);
  Mat x = random_mat(rng, 6, 7);
  Mat y = nn::dense_forward(x, layer);
  for (int r = 0; r < 6; r++)
    for (int o = 0; o < 5; o++) {
      double acc = layer.b.value(0, o);
      for (int i = 0; i < 7; i++) acc += layer.W.value(o, i) * x(r, i);
      CHECK(y(r, o) == doctest::Approx(acc).epsilon(1e-6));
    }
}

TEST_CASE("dense_forward rejects dimension mismatch") {
  nn::Dense layer("d", 4, 2);
  CHECK_THROWS(nn::dense_forward(Mat::Zero(3, 5), layer));
}

TEST_CASE("layer_norm zero-centers and normalizes") {
  nn::LayerNorm p("ln", 4);
  Mat constant = Mat::Constant(2, 4, 3.7);
  Mat y = nn::layer_norm_forward(constant, p);
  CHECK(y.cwiseAbs().maxCoeff() < 1e-6);

  Mat pm(1, 2);
  pm << 1.0, -1.0;
  nn::LayerNorm p2("ln", 2);
  p2.eps = 1e-12;
  Mat y2 = nn::layer_norm_forward(pm, p2);
  CHECK(y2(0, 0) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(y2(0, 1) == doctest::Approx(-1.0).epsilon(1e-5));

  nn::Rng rng(3);
  Mat x = random_mat(rng, 5, 64, 2.0);
  nn::LayerNorm p3("ln", 64);
  p3.eps = 1e-10;
  Mat y3 = nn::layer_norm_forward(x, p3);
  for (int r = 0; r < 5; r++) {
    CHECK(std::abs(y3.row(r).mean()) < 1e-5);
    double var = y3.row(r).array().square().mean();
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("layer_norm is invariant to additive input shifts") {
  nn::Rng rng(4);
  nn::LayerNorm p("ln", 16);
  p.gain.value = random_mat(rng, 1, 16);
  p.shift.value = random_mat(rng, 1, 16);
  Mat x = random_mat(rng, 3, 16);
  Mat shifted = x.array() + 5.25;
  CHECK(rel_err(nn::layer_norm_forward(x, p),
                nn::layer_norm_forward(shifted, p)) < 1e-9);
}

TEST_CASE("bce_loss reference values") {
  CHECK(nn::bce_loss(0.5, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  CHECK(nn::bce_loss(1.0 - nn::kProbEps, 1.0) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(nn::bce_loss(0.9, 0.0) == doctest::Approx(-std::log(0.1)).epsilon(1e-9));
  // clamp keeps the loss finite at the boundaries
  CHECK(std::isfinite(nn::bce_loss(0.0, 1.0)));
  CHECK(std::isfinite(nn::bce_loss(1.0, 0.0)));
}

TEST_CASE("logistic-regression gradient has the closed form (p-y)x") {
  nn::Rng rng(5);
  nn::Dense layer("d", 6, 1);
  nn::init_dense(layer, rng);
  Mat x = random_mat(rng, 1, 6);
  double y = 1.0;
  Mat z = nn::dense_forward(x, layer);
  double p = 1.0 / (1.0 + std::exp(-z(0, 0)));
  Mat dlogit(1, 1);
  dlogit << p - y;
  nn::dense_backward(x, dlogit, layer);
  CHECK(rel_err(layer.W.grad, (p - y) * x) < 1e-10);
  CHECK(layer.b.grad(0, 0) == doctest::Approx(p - y).epsilon(1e-10));
}

TEST_CASE("dense gradients match central finite differences") {
  nn::Rng rng(6);
  nn::Dense layer("d", 9, 4);
  nn::init_dense(layer, rng);
  layer.b.value = random_mat(rng, 1, 4, 0.3);
  Mat x = random_mat(rng, 5, 9);
  Mat target = random_mat(rng, 5, 4);

  auto loss = [&]() {
    return 0.5 * (nn::dense_forward(x, layer) - target).squaredNorm();
  };
  Mat dy = nn::dense_forward(x, layer) - target;
  layer.W.zero_grad();
  layer.b.zero_grad();
  nn::dense_backward(x, dy, layer);
  CHECK(rel_err(layer.W.grad, finite_diff(layer.W, loss)) < 1e-6);
  CHECK(rel_err(layer.b.grad, finite_diff(layer.b, loss)) < 1e-6);
}

TEST_CASE("layer_norm gradients match central finite differences") {
  nn::Rng rng(7);
  nn::LayerNorm p("ln", 8);
  p.gain.value = random_mat(rng, 1, 8).array() + 1.5;
  p.shift.value = random_mat(rng, 1, 8);
  Mat x = random_mat(rng, 4, 8);
  Mat target = random_mat(rng, 4, 8);

  auto loss = [&]() {
    return 0.5 * (nn::layer_norm_forward(x, p) - target).squaredNorm();
  };
  nn::LayerNormCache cache;
  Mat dy = nn::layer_norm_forward(x, p, &cache) - target;
  p.gain.zero_grad();
  p.shift.zero_grad();
  Mat dx = nn::layer_norm_backward(dy, cache, p);
  CHECK(rel_err(p.gain.grad, finite_diff(p.gain, loss)) < 1e-5);
  CHECK(rel_err(p.shift.grad, finite_diff(p.shift, loss)) < 1e-5);

  // input gradient via a temporary tensor holding x
  nn::Tensor xt("x", 4, 8);
  xt.value = x;
  auto loss_x = [&]() {
    return 0.5 * (nn::layer_norm_forward(xt.value, p) - target).squaredNorm();
  };
  CHECK(rel_err(dx, finite_diff(xt, loss_x)) < 1e-5);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  nn::Tensor t("t", 2, 2);
  t.value << 1.0, 2.0, 3.0, 4.0;
  Mat before = t.value;
  nn::Adam adam;
  adam.step({&t});
  CHECK(rel_err(t.value, before) == 0.0);
}

TEST_CASE("adam: constant gradient steps toward -sign(g) with magnitude lr") {
  nn::Tensor t("t", 1, 2);
  t.value << 0.0, 0.0;
  nn::AdamConfig cfg;
  nn::Adam adam(cfg);
  Mat g(1, 2);
  g << 3.0, -0.25;
  Mat prev = t.value;
  for (int i = 0; i < 200; i++) {
    t.grad = g;
    prev = t.value;
    adam.step({&t});
  }
  Mat delta = t.value - prev;
  CHECK(delta(0, 0) == doctest::Approx(-cfg.lr).epsilon(1e-3));
  CHECK(delta(0, 1) == doctest::Approx(cfg.lr).epsilon(1e-3));
}

TEST_CASE("adam: identical seeds give bit-identical trajectories") {
  auto run = [] {
    nn::Rng rng(77);
    nn::Tensor t("t", 3, 3);
    t.value = random_mat(rng, 3, 3);
    nn::Adam adam;
    for (int i = 0; i < 50; i++) {
      t.grad = random_mat(rng, 3, 3);
      adam.step({&t});
    }
    return t.value;
  };
  Mat a = run(), b = run();
  CHECK((a.array() == b.array()).all());
}

TEST_CASE("adam rejects non-finite gradients") {
  nn::Tensor t("t", 1, 1);
  t.grad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  nn::Adam adam;
  CHECK_THROWS(adam.step({&t}));
}

TEST_CASE("inverted dropout preserves the expected value") {
  nn::Rng rng(8);
  const double rate = 0.2;
  const int n = 200000;
  Mat x = Mat::Constant(1, n, 1.0);
  Mat mask;
  Mat y = nn::dropout_forward_train(x, rate, rng, &mask);
  CHECK(y.mean() == doctest::Approx(1.0).epsilon(0.01));
  // mask entries are exactly 0 or 1/(1-rate)
  for (int j = 0; j < 100; j++) {
    double m = mask(0, j);
    CHECK((m == 0.0 || m == doctest::Approx(1.25).epsilon(1e-12)));
  }
}
