#include "wcd/nncore.hpp"

#include <cmath>
#include <stdexcept>

namespace wcd::nn {

Mat dense_forward(const Mat& x, const Dense& layer) {
  if (x.cols() != layer.W.value.cols())
    throw std::invalid_argument("dense_forward: dimension mismatch");
  Mat y = x * layer.W.value.transpose();
  y.rowwise() += layer.b.value.row(0);
  return y;
}

Mat dense_backward(const Mat& x, const Mat& dy, Dense& layer) {
  layer.W.grad.noalias() += dy.transpose() * x;
  layer.b.grad.row(0) += dy.colwise().sum();
  return dy * layer.W.value;
}

Mat layer_norm_forward(const Mat& x, const LayerNorm& p,
                       LayerNormCache* cache) {
  const double n = static_cast<double>(x.cols());
  Vec mean = x.rowwise().mean();
  Mat centered = x.colwise() - mean;
  Vec var = centered.array().square().rowwise().sum() / n;
  Vec invstd = (var.array() + p.eps).rsqrt();
  Mat xhat = centered.array().colwise() * invstd.array();
  Mat y = xhat.array().rowwise() * p.gain.value.row(0).array();
  y.array().rowwise() += p.shift.value.row(0).array();
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->invstd = std::move(invstd);
  }
  return y;
}

Mat layer_norm_backward(const Mat& dy, const LayerNormCache& cache,
                        LayerNorm& p) {
  const Mat& xhat = cache.xhat;
  const double n = static_cast<double>(dy.cols());
  // Column-at-a-time passes: row-wise reductions on column-major storage
  // stride badly, so accumulate the per-row means while walking columns.
  Mat dxhat(dy.rows(), dy.cols());
  Vec sum_dxhat = Vec::Zero(dy.rows());
  Vec sum_dxhat_xhat = Vec::Zero(dy.rows());
  for (Eigen::Index j = 0; j < dy.cols(); j++) {
    p.gain.grad(0, j) += (dy.col(j).array() * xhat.col(j).array()).sum();
    p.shift.grad(0, j) += dy.col(j).sum();
    dxhat.col(j) = dy.col(j) * p.gain.value(0, j);
    sum_dxhat += dxhat.col(j);
    sum_dxhat_xhat.array() += dxhat.col(j).array() * xhat.col(j).array();
  }
  Vec mean_dxhat = sum_dxhat / n;
  Vec mean_dxhat_xhat = sum_dxhat_xhat / n;
  Mat dx(dy.rows(), dy.cols());
  for (Eigen::Index j = 0; j < dy.cols(); j++)
    dx.col(j) = ((dxhat.col(j) - mean_dxhat).array() -
                 xhat.col(j).array() * mean_dxhat_xhat.array()) *
                cache.invstd.array();
  return dx;
}

Mat dropout_forward_train(const Mat& x, double rate, Rng& rng, Mat* mask) {
  if (rate < 0.0 || rate >= 1.0)
    throw std::invalid_argument("dropout rate must be in [0,1)");
  const double scale = 1.0 / (1.0 - rate);
  Mat m(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < m.rows(); i++)
    for (Eigen::Index j = 0; j < m.cols(); j++)
      m(i, j) = rng.uniform() < rate ? 0.0 : scale;
  Mat y = x.cwiseProduct(m);
  if (mask) *mask = std::move(m);
  return y;
}

double bce_loss(double p, double y) {
  p = std::min(1.0 - kProbEps, std::max(kProbEps, p));
  return -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
}

void Adam::step(const std::vector<Tensor*>& params) {
  if (m_.empty()) {
    for (const Tensor* t : params) {
      m_.push_back(Mat::Zero(t->value.rows(), t->value.cols()));
      v_.push_back(Mat::Zero(t->value.rows(), t->value.cols()));
    }
  }
  if (m_.size() != params.size())
    throw std::invalid_argument("Adam: parameter list changed size");
  step_++;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (size_t i = 0; i < params.size(); i++) {
    Tensor& t = *params[i];
    if (!t.grad.allFinite())
      throw std::runtime_error("Adam: non-finite gradient in " + t.name);
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * t.grad;
    v_[i] = cfg_.beta2 * v_[i] +
            (1.0 - cfg_.beta2) * t.grad.cwiseProduct(t.grad);
    Mat mhat = m_[i] / bc1;
    Mat vhat = v_[i] / bc2;
    t.value.array() -=
        cfg_.lr * mhat.array() / (vhat.array().sqrt() + cfg_.eps);
  }
}

void init_dense(Dense& layer, Rng& rng) {
  const double limit =
      std::sqrt(6.0 / (layer.in_dim() + layer.out_dim()));
  for (Eigen::Index i = 0; i < layer.W.value.rows(); i++)
    for (Eigen::Index j = 0; j < layer.W.value.cols(); j++)
      layer.W.value(i, j) = rng.uniform(-limit, limit);
  layer.b.value.setZero();
}

}  // namespace wcd::nn
