#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "wcd/hashing.hpp"
#include "wcd/nncore.hpp"
#include "wcd/pyramid.hpp"
#include "wcd/tokenizer.hpp"

namespace wcd {

enum class Variant {
  kProposed,        // hierarchical inspector over 31 pyramid nodes + master
  kFlatSequential,  // same inspector, 16 leaf nodes only
  kFlattenedFf,     // rasterized 16x1024 into a plain feed-forward stack
  kFfBot,           // flat 16384 bag of tokens into the same stack
  kLrBot,           // elastic-net logistic regression on the flat bag
};

std::string variant_name(Variant v);
std::optional<Variant> variant_from_name(const std::string& name);

struct ModelDims {
  int feature_dim = kChunkBins;  // per-node width
  int flat_dim = kFlatBins;      // baseline input width
  int hidden = 1024;
  int heads = 26;
  int leaves = kChunks;
  double dropout = 0.2;
};

// LayerNorm -> Dropout -> Dense -> ReLU, the block both the inspector and
// the master are built from.
struct Block {
  nn::LayerNorm ln;
  nn::Dense fc;
  double dropout_rate = 0.2;
};

struct BlockCache {
  nn::LayerNormCache ln;
  nn::Mat mask;      // scaled dropout mask (empty at inference)
  nn::Mat fc_input;  // post-dropout input to the dense layer
  nn::Mat pre_relu;
};

enum class Mode { kTrain, kInfer };

// When mode is kTrain and cache->mask is already populated the stored mask
// is reused instead of drawing a fresh one; the finite-difference checks
// depend on this to probe a frozen stochastic forward pass.
nn::Mat block_forward(const nn::Mat& x, Block& blk, Mode mode, nn::Rng* rng,
                      BlockCache* cache);
nn::Mat block_backward(const nn::Mat& dy, Block& blk, BlockCache& cache);

// One model variant. The inspector blocks, when present, are applied with
// shared weights to every pyramid node; the trunk runs on the max-pooled
// vector (or directly on flat features for the baselines).
struct Model {
  Variant tag = Variant::kProposed;
  ModelDims dims;
  std::vector<Block> inspector;
  std::vector<Block> trunk;
  nn::Dense head;

  // Pyramid rows fed per document: 2*leaves-1, leaves, or 1 (flat input).
  int rows_per_doc() const;
  int input_dim() const;
  std::vector<nn::Tensor*> params();
  void zero_grad();
};

Model make_model(Variant v, const ModelDims& dims, nn::Rng& rng);
size_t param_count(const Model& m);
size_t param_count(Variant v, const ModelDims& dims);

struct ForwardCache {
  std::vector<BlockCache> inspector;
  Eigen::MatrixXi argmax;  // docs x hidden, node index winning each neuron
  std::vector<BlockCache> trunk;
  nn::Mat head_input;
  nn::Mat probs;
};

// X packs each document's node rows contiguously: (docs*rows_per_doc) x dim.
// Returns docs x heads probabilities.
nn::Mat model_forward(Model& m, const nn::Mat& X, Mode mode, nn::Rng* rng,
                      ForwardCache* cache);

// Mean over documents of the mean per-head BCE over unmasked heads.
// mask(i,j) = 1 when label j of document i is known. Rejects documents
// whose mask row is all zero.
double masked_bce_loss(const nn::Mat& probs, const nn::Mat& labels,
                       const nn::Mat& mask);

// Accumulates parameter gradients of masked_bce_loss into the model.
void model_backward(Model& m, ForwardCache& cache, const nn::Mat& labels,
                    const nn::Mat& mask);

// Convenience single-document wrappers over the batch machinery.
// inspector_forward returns the max-pooled vector and, in training mode,
// the per-neuron argmax node indices.
std::pair<nn::Vec, Eigen::VectorXi> inspector_forward(
    const nn::Mat& nodes, Model& m, Mode mode, nn::Rng* rng = nullptr);
nn::Vec master_forward(const nn::Vec& pooled, Model& m, Mode mode,
                       nn::Rng* rng = nullptr);

// Float32 forward path for scoring and throughput benchmarks. Weights are
// cast once; dropout is the identity.
struct InferenceModel {
  Variant tag;
  ModelDims dims;
  struct FBlock {
    Eigen::RowVectorXf gain, shift, b;
    Eigen::MatrixXf W;
    float eps;
  };
  std::vector<FBlock> inspector, trunk;
  Eigen::MatrixXf head_W;
  Eigen::RowVectorXf head_b;

  int rows_per_doc() const;
  // X packs node rows per document as in model_forward.
  Eigen::MatrixXf forward(const Eigen::MatrixXf& X) const;
};

InferenceModel to_inference(const Model& m);

// Per-variant feature extraction. Returns rows_per_doc() rows: pyramid
// nodes for the inspector variants, leaf bags for flat_sequential, one
// rasterized or flat-bag row for the baselines.
Eigen::MatrixXf features_for_variant(Variant v, const TokenStream& stream);

// Model file: versioned binary header (magic, format version, variant tag,
// dimensions, hash-variant id) followed by named tensors as little-endian
// float32. Loading rejects a mismatched hash-variant identifier.
void save_model(const std::string& path, Model& m);
Model load_model(const std::string& path);

}  // namespace wcd
