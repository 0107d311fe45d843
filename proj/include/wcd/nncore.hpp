#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace wcd::nn {

// Training and gradient checking run in double; the float inference path
// lives in models.hpp. Batch matrices are rows = examples, cols = features.
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// All randomness (init, dropout, batch sampling, synthetic corpora) flows
// through this wrapper so runs are reproducible from a single seed. The
// distributions are hand-rolled on top of mt19937_64 because the standard
// library's are implementation-defined.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}
  uint64_t next() { return engine_(); }
  // [0, 1)
  double uniform() { return (engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // [0, n)
  uint64_t uniform_int(uint64_t n) {
    uint64_t threshold = (~uint64_t{0} - n + 1) % n;
    for (;;) {
      uint64_t r = engine_();
      if (r >= threshold) return r % n;
    }
  }

 private:
  std::mt19937_64 engine_;
};

// A named learnable tensor with its gradient accumulator. Bias and
// layer-norm vectors are stored as 1 x N matrices so the optimizer and
// serialization treat every parameter uniformly.
struct Tensor {
  std::string name;
  Mat value;
  Mat grad;

  Tensor() = default;
  Tensor(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), value(Mat::Zero(rows, cols)),
        grad(Mat::Zero(rows, cols)) {}
  void zero_grad() { grad.setZero(); }
};

struct Dense {
  Tensor W;  // out x in
  Tensor b;  // 1 x out
  Dense() = default;
  Dense(const std::string& name, int in, int out)
      : W(name + ".W", out, in), b(name + ".b", 1, out) {}
  int in_dim() const { return static_cast<int>(W.value.cols()); }
  int out_dim() const { return static_cast<int>(W.value.rows()); }
};

Mat dense_forward(const Mat& x, const Dense& layer);
// Accumulates into layer.W.grad / layer.b.grad; returns dL/dx.
Mat dense_backward(const Mat& x, const Mat& dy, Dense& layer);

struct LayerNorm {
  Tensor gain, shift;  // each 1 x dim
  double eps = 1e-5;
  LayerNorm() = default;
  LayerNorm(const std::string& name, int dim)
      : gain(name + ".gain", 1, dim), shift(name + ".shift", 1, dim) {
    gain.value.setOnes();
  }
};

struct LayerNormCache {
  Mat xhat;    // normalized input, pre gain/shift
  Vec invstd;  // per row
};

// Per row: (x - mean) / sqrt(var + eps) * gain + shift, with biased
// (population) variance over the feature axis.
Mat layer_norm_forward(const Mat& x, const LayerNorm& p,
                       LayerNormCache* cache = nullptr);
Mat layer_norm_backward(const Mat& dy, const LayerNormCache& cache,
                        LayerNorm& p);

// Inverted dropout: kept activations are scaled by 1/(1-rate) so inference
// is the exact identity. The mask (already scaled) is written to *mask.
Mat dropout_forward_train(const Mat& x, double rate, Rng& rng, Mat* mask);

inline Mat relu(const Mat& x) { return x.cwiseMax(0.0); }
inline Mat sigmoid(const Mat& x) {
  return ((-x.array()).exp() + 1.0).inverse().matrix();
}

inline constexpr double kProbEps = 1e-7;

// -[y ln p + (1-y) ln(1-p)] with p clamped to [kProbEps, 1-kProbEps].
double bce_loss(double p, double y);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}
  // Bias-corrected update from each tensor's .grad. Throws on non-finite
  // gradients. Moment buffers are allocated lazily on the first call.
  void step(const std::vector<Tensor*>& params);
  long step_count() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  long step_ = 0;
  std::vector<Mat> m_, v_;
};

// Glorot-uniform initialization for a dense layer; biases stay zero.
void init_dense(Dense& layer, Rng& rng);

}  // namespace wcd::nn
