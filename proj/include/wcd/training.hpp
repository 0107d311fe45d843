#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "wcd/corpus.hpp"
#include "wcd/models.hpp"
#include "wcd/nncore.hpp"

namespace wcd {

struct TrainConfig {
  int batch_size = 64;  // must be even: half malicious, half benign
  int max_epochs = 200;
  int patience = 10;
  uint64_t seed = 1;
  nn::AdamConfig adam;
  // plain-GD learning rate for the elastic-net solver
  double lr_bot_step = 1e-3;
};

// Featurized documents for one variant: features[i] is rows_per_doc x dim.
struct Dataset {
  std::vector<Eigen::MatrixXf> features;
  nn::Mat labels;  // docs x heads
  nn::Mat mask;    // 1 = label known
  std::vector<std::vector<std::string>> tags;  // for family reports

  int size() const { return static_cast<int>(features.size()); }
};

// Head registry: head 0 is the malicious/benign decision, heads 1..25 are
// auxiliary tags. Tags beyond the head budget are ignored.
std::vector<std::string> tag_registry(const Manifest& manifest, int heads);

Dataset build_dataset(Variant v, const Manifest& manifest,
                      const std::vector<int>& indices,
                      const std::vector<std::string>& registry, int heads,
                      int jobs = 1);

// Deterministic class-balanced batch stream. Each batch holds batch_size/2
// documents of each class; the minority class is sampled uniformly with
// replacement, the majority class is a reshuffled walk. One epoch is
// ceil(majority / (batch_size/2)) batches.
class BalancedBatcher {
 public:
  BalancedBatcher(const std::vector<int>& positives,
                  const std::vector<int>& negatives, int batch_size,
                  uint64_t seed);
  int batches_per_epoch() const { return batches_per_epoch_; }
  std::vector<int> next();

 private:
  std::vector<int> pos_, neg_;
  std::vector<int> major_order_;
  size_t major_cursor_ = 0;
  int half_;
  int batches_per_epoch_;
  bool pos_is_minority_;
  nn::Rng rng_;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_auc = 0.0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<EpochRecord> history;
  double best_val_auc = 0.0;
  int best_epoch = 0;
};

// Adam on the masked multi-head BCE with balanced batches; early stopping
// on validation AUC of head 0 (best checkpoint returned).
TrainResult train(Variant v, const ModelDims& dims, const Dataset& train_set,
                  const Dataset& val_set, const TrainConfig& config);

struct ElasticNetGrid {
  std::vector<double> l1{1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
  std::vector<double> l2{1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
};

struct LrBotResult {
  Model model;
  double l1 = 0.0, l2 = 0.0;
  double best_val_auc = 0.0;
};

// Proximal gradient descent (soft-threshold L1, L2 weight decay) per grid
// point; the point with the best validation AUC wins.
LrBotResult train_lr_bot(const ElasticNetGrid& grid, const ModelDims& dims,
                         const Dataset& train_set, const Dataset& val_set,
                         const TrainConfig& config);

// Scores head 0 for every document via the float inference path.
std::vector<double> score_dataset(const InferenceModel& model,
                                  const Dataset& data, int doc_batch = 256);

double validation_auc(const InferenceModel& model, const Dataset& data);

// Line-delimited JSON, one record per epoch.
void write_history(const std::string& path,
                   const std::vector<EpochRecord>& history);

}  // namespace wcd
