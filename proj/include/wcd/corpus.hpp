#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wcd/nncore.hpp"

namespace wcd {

enum class Label { kBenign, kIndeterminate, kMalicious };

// 0 detections -> benign, 1-2 -> indeterminate (excluded from train/test),
// 3 or more -> malicious. Negative counts are rejected.
Label label_from_detections(int detection_count);

struct DocumentRecord {
  std::string sha256_hex;        // 64 lowercase hex chars
  std::string path;              // content file, relative to the manifest dir
  std::vector<uint8_t> content;  // inline content (synthetic corpora)
  int64_t first_seen = 0;        // epoch seconds
  int detection_count = 0;
  std::vector<std::string> tags;
  Label label = Label::kBenign;
};

struct Manifest {
  std::vector<DocumentRecord> records;
  std::string base_dir;  // directory containing the manifest file
};

struct TimeSplit {
  std::vector<int> train;  // indices into manifest.records
  std::vector<int> test;
  std::vector<std::string> warnings;
};

// train: first_seen < cutoff; test: cutoff <= first_seen < cutoff + horizon.
// Indeterminate records are excluded from both sides.
TimeSplit time_split(const Manifest& manifest, int64_t cutoff,
                     int64_t horizon_seconds);

inline constexpr int64_t kTwoMonthsSeconds = 61LL * 24 * 3600;

std::string sha256_hex(const std::vector<uint8_t>& bytes);

// Manifest file: header row then
//   hash,path,first_seen,detection_count,tag1;tag2;...
// Duplicate hashes keep the first occurrence and warn. Malformed rows
// raise with their line number.
Manifest load_manifest(const std::string& path,
                       std::vector<std::string>* warnings = nullptr);
void save_manifest(const std::string& path, const Manifest& manifest);

// Reads a record's content (inline bytes if present, else from file).
std::vector<uint8_t> read_content(const Manifest& manifest,
                                  const DocumentRecord& rec);

// Synthetic needle-in-haystack corpus. Benign documents are HTML-ish token
// soup from a benign vocabulary; malicious documents are the same soup with
// a short snippet of family-specific trigger tokens injected. Trigger
// tokens also occur in benign documents at a low background rate, so no
// single token presence separates the classes. Document token length is
// drawn before the class so length carries no label signal.
struct SyntheticSpec {
  int n_documents = 5000;
  double malicious_fraction = 0.5;
  // log-normal token-count distribution (heavy tailed)
  double log_len_mu = 6.2;
  double log_len_sigma = 0.8;
  int min_tokens = 48;
  int max_tokens = 30000;
  // snippet length in tokens, additionally capped at 5% of the document
  int snippet_min = 10;
  int snippet_max = 48;
  double snippet_cap_fraction = 0.05;
  int benign_vocab = 400;
  int tokens_per_family = 10;
  int families = 6;
  // fraction of families whose snippet is dispersed over a wider window
  // instead of contiguous (spread-out obfuscation style)
  int dispersed_families = 2;
  double trigger_background_rate = 0.01;
  uint64_t seed = 1;
  int64_t time_start = 1500000000;  // first_seen of the first document
  int64_t time_step = 60;           // seconds between consecutive documents
};

// Content is generated inline; write_corpus materializes it to disk.
Manifest generate_synthetic(const SyntheticSpec& spec);

// Writes one content file per record plus manifest.csv into dir.
void write_corpus(const Manifest& manifest, const std::string& dir);

SyntheticSpec load_synthetic_spec(const std::string& json_path);

}  // namespace wcd
