#include "wcd/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "wcd/tokenizer.hpp"

namespace wcd {

RocResult roc(const std::vector<ScoredPoint>& points) {
  size_t n_pos = 0, n_neg = 0;
  for (const auto& p : points) {
    if (!std::isfinite(p.score))
      throw std::invalid_argument("roc: non-finite score");
    (p.label ? n_pos : n_neg)++;
  }
  if (n_pos == 0 || n_neg == 0)
    throw std::invalid_argument("roc: both classes required");

  std::vector<const ScoredPoint*> sorted;
  sorted.reserve(points.size());
  for (const auto& p : points) sorted.push_back(&p);
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredPoint* a, const ScoredPoint* b) {
              return a->score > b->score;
            });

  RocResult r;
  r.points.emplace_back(0.0, 0.0);
  size_t tp = 0, fp = 0;
  double auc = 0.0;
  double prev_fpr = 0.0, prev_tpr = 0.0;
  size_t i = 0;
  while (i < sorted.size()) {
    // all points with this score cross the threshold together
    double score = sorted[i]->score;
    while (i < sorted.size() && sorted[i]->score == score) {
      (sorted[i]->label ? tp : fp)++;
      i++;
    }
    double fpr = static_cast<double>(fp) / n_neg;
    double tpr = static_cast<double>(tp) / n_pos;
    auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
    r.points.emplace_back(fpr, tpr);
    prev_fpr = fpr;
    prev_tpr = tpr;
  }
  r.auc = auc;
  return r;
}

DrAtFprResult dr_at_fpr(const std::vector<ScoredPoint>& points,
                        double target_fpr) {
  if (target_fpr <= 0.0 || target_fpr >= 1.0)
    throw std::invalid_argument("target FPR must be in (0,1)");
  size_t n_pos = 0, n_neg = 0;
  for (const auto& p : points) (p.label ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0)
    throw std::invalid_argument("dr_at_fpr: both classes required");

  std::vector<const ScoredPoint*> sorted;
  sorted.reserve(points.size());
  for (const auto& p : points) sorted.push_back(&p);
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredPoint* a, const ScoredPoint* b) {
              return a->score > b->score;
            });

  DrAtFprResult best;
  best.low_resolution = static_cast<double>(n_neg) < 1.0 / target_fpr;
  // threshold above every score: DR 0, FPR 0 (always admissible)
  best.threshold = sorted.front()->score +
                   std::max(1.0, std::abs(sorted.front()->score)) * 1e-9;
  size_t tp = 0, fp = 0;
  size_t i = 0;
  while (i < sorted.size()) {
    double score = sorted[i]->score;
    while (i < sorted.size() && sorted[i]->score == score) {
      (sorted[i]->label ? tp : fp)++;
      i++;
    }
    double fpr = static_cast<double>(fp) / n_neg;
    if (fpr <= target_fpr) {
      // thresholds get smaller as we go; TPR only grows, so keep updating
      best.threshold = score;
      best.detection_rate = static_cast<double>(tp) / n_pos;
      best.realized_fpr = fpr;
    } else {
      break;
    }
  }
  return best;
}

std::vector<FamilyRow> family_report(const std::vector<ScoredPoint>& points,
                                     double threshold) {
  size_t n_malware = 0;
  std::map<std::string, std::pair<size_t, size_t>> per_tag;  // tag -> (n, detected)
  for (const auto& p : points) {
    if (!p.label) continue;
    n_malware++;
    bool detected = p.score >= threshold;
    for (const auto& tag : p.tags) {
      auto& [n, det] = per_tag[tag];
      n++;
      if (detected) det++;
    }
  }
  std::vector<FamilyRow> rows;
  for (const auto& [tag, counts] : per_tag) {
    FamilyRow row;
    row.family = tag;
    row.detection_rate =
        static_cast<double>(counts.second) / static_cast<double>(counts.first);
    row.prevalence_pct = 100.0 * static_cast<double>(counts.first) /
                         static_cast<double>(n_malware);
    rows.push_back(std::move(row));
  }
  std::sort(rows.begin(), rows.end(), [](const FamilyRow& a, const FamilyRow& b) {
    return a.detection_rate > b.detection_rate;
  });
  return rows;
}

void write_roc(const std::string& path, const RocResult& r) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# FPR TPR\n";
  for (const auto& [fpr, tpr] : r.points) out << fpr << ' ' << tpr << '\n';
}

BenchReport bench_throughput(const InferenceModel& model,
                             const std::vector<std::vector<uint8_t>>& docs,
                             int batch_size) {
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  using clock = std::chrono::steady_clock;
  BenchReport report;
  report.batch_size = batch_size;
  report.documents = static_cast<int>(docs.size());
  const int R = model.rows_per_doc();

  auto cpu_now = [] {
    timespec ts{};
    clock_gettime(CLOCK_PROCESS_CPUTIME_ID, &ts);
    return static_cast<double>(ts.tv_sec) + 1e-9 * ts.tv_nsec;
  };
  std::vector<double> batch_ms;
  auto t_start = clock::now();
  double cpu_start = cpu_now();
  for (size_t begin = 0; begin < docs.size(); begin += batch_size) {
    size_t end = std::min(docs.size(), begin + batch_size);
    auto t0 = clock::now();
    Eigen::MatrixXf X(static_cast<Eigen::Index>(end - begin) * R,
                      model.inspector.empty() ? model.dims.flat_dim
                                              : model.dims.feature_dim);
    for (size_t d = begin; d < end; d++) {
      TokenStream stream = tokenize(
          std::span<const uint8_t>(docs[d].data(), docs[d].size()));
      X.middleRows(static_cast<Eigen::Index>(d - begin) * R, R) =
          features_for_variant(model.tag, stream);
    }
    volatile float sink = model.forward(X).sum();
    (void)sink;
    batch_ms.push_back(
        std::chrono::duration<double, std::milli>(clock::now() - t0).count());
  }
  report.wall_seconds =
      std::chrono::duration<double>(clock::now() - t_start).count();
  report.cpu_seconds = cpu_now() - cpu_start;
  report.pages_per_sec = docs.size() / report.wall_seconds;
  report.pages_per_cpu_sec = docs.size() / report.cpu_seconds;

  std::sort(batch_ms.begin(), batch_ms.end());
  auto pct = [&](double q) {
    if (batch_ms.empty()) return 0.0;
    size_t idx = static_cast<size_t>(q * (batch_ms.size() - 1));
    return batch_ms[idx];
  };
  report.p50_ms = pct(0.50);
  report.p95_ms = pct(0.95);
  report.p99_ms = pct(0.99);
  return report;
}

void write_bench_report(const std::string& path, const BenchReport& r) {
  nlohmann::json j{{"version", 1},
                   {"pages_per_sec", r.pages_per_sec},
                   {"pages_per_cpu_sec", r.pages_per_cpu_sec},
                   {"p50_ms", r.p50_ms},
                   {"p95_ms", r.p95_ms},
                   {"p99_ms", r.p99_ms},
                   {"batch_size", r.batch_size},
                   {"documents", r.documents},
                   {"wall_seconds", r.wall_seconds},
                   {"cpu_seconds", r.cpu_seconds},
                   {"hardware", r.hardware}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace wcd
