#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wcd/models.hpp"

namespace wcd {

struct ScoredPoint {
  double score = 0.0;  // head-0 probability
  int label = 0;       // 1 = malicious
  std::vector<std::string> tags;
};

struct RocResult {
  std::vector<std::pair<double, double>> points;  // (FPR, TPR), (0,0)..(1,1)
  double auc = 0.0;
};

// Thresholds sweep the distinct scores descending; equal scores share one
// threshold. AUC by the trapezoid rule. Both classes must be present.
RocResult roc(const std::vector<ScoredPoint>& points);

struct DrAtFprResult {
  double detection_rate = 0.0;
  double threshold = 0.0;      // classify as malicious when score >= threshold
  double realized_fpr = 0.0;
  bool low_resolution = false;  // fewer negatives than 1/target_fpr
};

// Smallest threshold whose empirical FPR is <= target; the realized FPR
// never exceeds the target.
DrAtFprResult dr_at_fpr(const std::vector<ScoredPoint>& points,
                        double target_fpr);

struct FamilyRow {
  std::string family;
  double detection_rate = 0.0;
  double prevalence_pct = 0.0;  // share of malware carrying the tag
};

// Per-tag detection rate among malware at the given threshold. Tags absent
// from the malware population are simply not reported.
std::vector<FamilyRow> family_report(const std::vector<ScoredPoint>& points,
                                     double threshold);

void write_roc(const std::string& path, const RocResult& r);

struct BenchReport {
  double pages_per_sec = 0.0;      // wall-clock throughput
  double pages_per_cpu_sec = 0.0;  // process-CPU throughput (steal-proof)
  double p50_ms = 0.0, p95_ms = 0.0, p99_ms = 0.0;  // per-batch latency
  int batch_size = 0;
  int documents = 0;
  double wall_seconds = 0.0;
  double cpu_seconds = 0.0;
  std::string hardware;
};

// End-to-end tokenize -> hash -> pyramid -> forward over the documents in
// fixed-size batches. Reports both wall-clock and process-CPU throughput;
// the latter is stable on machines where other tenants steal the core.
BenchReport bench_throughput(const InferenceModel& model,
                             const std::vector<std::vector<uint8_t>>& docs,
                             int batch_size);

void write_bench_report(const std::string& path, const BenchReport& r);

}  // namespace wcd
