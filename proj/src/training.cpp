#include "wcd/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <stdexcept>
#include <thread>

#include "wcd/evaluation.hpp"
#include "wcd/tokenizer.hpp"

namespace wcd {

using nn::Mat;

std::vector<std::string> tag_registry(const Manifest& manifest, int heads) {
  std::set<std::string> tags;
  for (const auto& rec : manifest.records)
    tags.insert(rec.tags.begin(), rec.tags.end());
  std::vector<std::string> registry(tags.begin(), tags.end());
  if (static_cast<int>(registry.size()) > heads - 1)
    registry.resize(heads - 1);
  return registry;
}

Dataset build_dataset(Variant v, const Manifest& manifest,
                      const std::vector<int>& indices,
                      const std::vector<std::string>& registry, int heads,
                      int jobs) {
  Dataset ds;
  const int n = static_cast<int>(indices.size());
  ds.features.resize(n);
  ds.labels = Mat::Zero(n, heads);
  ds.mask = Mat::Ones(n, heads);
  ds.tags.resize(n);

  auto worker = [&](int begin, int end) {
    for (int i = begin; i < end; i++) {
      const DocumentRecord& rec = manifest.records[indices[i]];
      std::vector<uint8_t> content = read_content(manifest, rec);
      TokenStream stream =
          tokenize(std::span<const uint8_t>(content.data(), content.size()));
      ds.features[i] = features_for_variant(v, stream);
    }
  };
  jobs = std::max(1, jobs);
  if (jobs == 1 || n < 2 * jobs) {
    worker(0, n);
  } else {
    std::vector<std::thread> threads;
    int chunk = (n + jobs - 1) / jobs;
    for (int t = 0; t < jobs; t++)
      threads.emplace_back(worker, std::min(n, t * chunk),
                           std::min(n, (t + 1) * chunk));
    for (auto& th : threads) th.join();
  }

  for (int i = 0; i < n; i++) {
    const DocumentRecord& rec = manifest.records[indices[i]];
    ds.labels(i, 0) = rec.label == Label::kMalicious ? 1.0 : 0.0;
    for (size_t t = 0; t < registry.size(); t++) {
      bool present = std::find(rec.tags.begin(), rec.tags.end(),
                               registry[t]) != rec.tags.end();
      ds.labels(i, static_cast<int>(t) + 1) = present ? 1.0 : 0.0;
    }
    ds.tags[i] = rec.tags;
  }
  return ds;
}

BalancedBatcher::BalancedBatcher(const std::vector<int>& positives,
                                 const std::vector<int>& negatives,
                                 int batch_size, uint64_t seed)
    : pos_(positives), neg_(negatives), rng_(seed) {
  if (pos_.empty() || neg_.empty())
    throw std::invalid_argument("balanced batches need both classes");
  if (batch_size < 2 || batch_size % 2 != 0)
    throw std::invalid_argument("batch size must be even and >= 2");
  half_ = batch_size / 2;
  pos_is_minority_ = pos_.size() < neg_.size();
  size_t majority = std::max(pos_.size(), neg_.size());
  batches_per_epoch_ =
      static_cast<int>((majority + half_ - 1) / static_cast<size_t>(half_));
  major_order_ = pos_is_minority_ ? neg_ : pos_;
}

std::vector<int> BalancedBatcher::next() {
  const std::vector<int>& minority = pos_is_minority_ ? pos_ : neg_;
  std::vector<int> batch;
  batch.reserve(2 * half_);
  for (int i = 0; i < half_; i++) {
    if (major_cursor_ == 0) {
      // fresh shuffle at every wrap
      for (size_t j = major_order_.size(); j > 1; j--)
        std::swap(major_order_[j - 1],
                  major_order_[rng_.uniform_int(j)]);
    }
    batch.push_back(major_order_[major_cursor_]);
    major_cursor_ = (major_cursor_ + 1) % major_order_.size();
  }
  for (int i = 0; i < half_; i++)
    batch.push_back(minority[rng_.uniform_int(minority.size())]);
  return batch;
}

namespace {

void pack_batch(const Dataset& ds, const std::vector<int>& idx, int rows_per_doc,
                Mat& X, Mat& Y, Mat& M) {
  const int docs = static_cast<int>(idx.size());
  const Eigen::Index dim = ds.features[idx[0]].cols();
  X.resize(static_cast<Eigen::Index>(docs) * rows_per_doc, dim);
  Y.resize(docs, ds.labels.cols());
  M.resize(docs, ds.mask.cols());
  for (int d = 0; d < docs; d++) {
    X.middleRows(static_cast<Eigen::Index>(d) * rows_per_doc, rows_per_doc) =
        ds.features[idx[d]].cast<double>();
    Y.row(d) = ds.labels.row(idx[d]);
    M.row(d) = ds.mask.row(idx[d]);
  }
}

std::vector<Mat> snapshot_params(Model& m) {
  std::vector<Mat> out;
  for (nn::Tensor* t : m.params()) out.push_back(t->value);
  return out;
}

void restore_params(Model& m, const std::vector<Mat>& snap) {
  auto params = m.params();
  for (size_t i = 0; i < params.size(); i++) params[i]->value = snap[i];
}

void split_classes(const Dataset& ds, std::vector<int>& pos,
                   std::vector<int>& neg) {
  for (int i = 0; i < ds.size(); i++)
    (ds.labels(i, 0) > 0.5 ? pos : neg).push_back(i);
}

}  // namespace

std::vector<double> score_dataset(const InferenceModel& model,
                                  const Dataset& data, int doc_batch) {
  const int R = model.rows_per_doc();
  std::vector<double> scores(data.size());
  for (int begin = 0; begin < data.size(); begin += doc_batch) {
    int end = std::min(data.size(), begin + doc_batch);
    Eigen::MatrixXf X(static_cast<Eigen::Index>(end - begin) * R,
                      data.features[begin].cols());
    for (int d = begin; d < end; d++)
      X.middleRows(static_cast<Eigen::Index>(d - begin) * R, R) =
          data.features[d];
    Eigen::MatrixXf probs = model.forward(X);
    for (int d = begin; d < end; d++)
      scores[d] = static_cast<double>(probs(d - begin, 0));
  }
  return scores;
}

double validation_auc(const InferenceModel& model, const Dataset& data) {
  std::vector<double> scores = score_dataset(model, data);
  std::vector<ScoredPoint> points(data.size());
  for (int i = 0; i < data.size(); i++) {
    points[i].score = scores[i];
    points[i].label = data.labels(i, 0) > 0.5 ? 1 : 0;
  }
  return roc(points).auc;
}

TrainResult train(Variant v, const ModelDims& dims, const Dataset& train_set,
                  const Dataset& val_set, const TrainConfig& config) {
  if (v == Variant::kLrBot)
    throw std::invalid_argument("use train_lr_bot for the lr_bot variant");
  if (config.patience < 1) throw std::invalid_argument("patience must be >= 1");

  nn::Rng rng(config.seed);
  Model model = make_model(v, dims, rng);
  nn::Adam adam(config.adam);

  std::vector<int> pos, neg;
  split_classes(train_set, pos, neg);
  BalancedBatcher batcher(pos, neg, config.batch_size, config.seed ^ 0x9e3779b97f4a7c15ULL);

  const int R = model.rows_per_doc();
  TrainResult result;
  std::vector<Mat> best_snapshot = snapshot_params(model);
  double best_auc = -1.0;
  int best_epoch = 0;
  int since_improve = 0;
  ForwardCache cache;
  Mat X, Y, M;

  for (int epoch = 1; epoch <= config.max_epochs; epoch++) {
    auto t0 = std::chrono::steady_clock::now();
    double loss_sum = 0.0;
    for (int b = 0; b < batcher.batches_per_epoch(); b++) {
      std::vector<int> idx = batcher.next();
      pack_batch(train_set, idx, R, X, Y, M);
      model.zero_grad();
      // Keep the cache buffers between batches but force fresh dropout
      // masks; model_forward reuses a populated mask of the right shape.
      for (auto& bc : cache.inspector) bc.mask.resize(0, 0);
      for (auto& bc : cache.trunk) bc.mask.resize(0, 0);
      Mat probs = model_forward(model, X, Mode::kTrain, &rng, &cache);
      loss_sum += masked_bce_loss(probs, Y, M);
      model_backward(model, cache, Y, M);
      adam.step(model.params());
    }
    double val_auc = validation_auc(to_inference(model), val_set);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / batcher.batches_per_epoch();
    rec.val_auc = val_auc;
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    result.history.push_back(rec);
    if (!std::isfinite(rec.train_loss))
      throw std::runtime_error("training diverged: non-finite loss at epoch " +
                               std::to_string(epoch));
    if (val_auc > best_auc) {
      best_auc = val_auc;
      best_epoch = epoch;
      best_snapshot = snapshot_params(model);
      since_improve = 0;
    } else {
      since_improve++;
      if (since_improve >= config.patience) break;
    }
  }
  restore_params(model, best_snapshot);
  result.model = std::move(model);
  result.best_val_auc = best_auc;
  result.best_epoch = best_epoch;
  return result;
}

LrBotResult train_lr_bot(const ElasticNetGrid& grid, const ModelDims& dims,
                         const Dataset& train_set, const Dataset& val_set,
                         const TrainConfig& config) {
  if (grid.l1.empty() || grid.l2.empty())
    throw std::invalid_argument("elastic-net grid must be non-empty");
  for (double v : grid.l1)
    if (v < 0) throw std::invalid_argument("negative L1 penalty");
  for (double v : grid.l2)
    if (v < 0) throw std::invalid_argument("negative L2 penalty");

  std::vector<int> pos, neg;
  split_classes(train_set, pos, neg);

  LrBotResult best;
  best.best_val_auc = -1.0;
  const double lr = config.lr_bot_step;

  for (double l1 : grid.l1) {
    for (double l2 : grid.l2) {
      nn::Rng rng(config.seed);
      Model model = make_model(Variant::kLrBot, dims, rng);
      BalancedBatcher batcher(pos, neg, config.batch_size,
                              config.seed ^ 0x9e3779b97f4a7c15ULL);
      double best_auc = -1.0;
      std::vector<Mat> snapshot = snapshot_params(model);
      int since_improve = 0;
      Mat X, Y, M;
      for (int epoch = 1; epoch <= config.max_epochs; epoch++) {
        for (int b = 0; b < batcher.batches_per_epoch(); b++) {
          std::vector<int> idx = batcher.next();
          pack_batch(train_set, idx, 1, X, Y, M);
          model.zero_grad();
          ForwardCache cache;
          model_forward(model, X, Mode::kInfer, nullptr, &cache);
          model_backward(model, cache, Y, M);
          // gradient step with L2 decay, then the L1 proximal shrink
          Mat& W = model.head.W.value;
          W -= lr * (model.head.W.grad + l2 * W);
          model.head.b.value -= lr * model.head.b.grad;
          const double shrink = lr * l1;
          W = W.unaryExpr([shrink](double w) {
            if (w > shrink) return w - shrink;
            if (w < -shrink) return w + shrink;
            return 0.0;
          });
        }
        double val_auc = validation_auc(to_inference(model), val_set);
        if (val_auc > best_auc) {
          best_auc = val_auc;
          snapshot = snapshot_params(model);
          since_improve = 0;
        } else if (++since_improve >= config.patience) {
          break;
        }
      }
      restore_params(model, snapshot);
      if (best_auc > best.best_val_auc) {
        best.best_val_auc = best_auc;
        best.l1 = l1;
        best.l2 = l2;
        best.model = std::move(model);
      }
    }
  }
  return best;
}

void write_history(const std::string& path,
                   const std::vector<EpochRecord>& history) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& rec : history) {
    nlohmann::json j{{"epoch", rec.epoch},
                     {"train_loss", rec.train_loss},
                     {"val_auc", rec.val_auc},
                     {"wall_seconds", rec.wall_seconds}};
    out << j.dump() << '\n';
  }
}

}  // namespace wcd
