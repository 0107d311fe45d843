#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "wcd/tokenizer.hpp"

namespace wcd {

inline constexpr int kChunks = 16;
inline constexpr int kChunkBins = 1024;
inline constexpr int kFlatBins = 16384;  // kChunks * kChunkBins
inline constexpr int kLengthBuckets = 8;

// One length-hashed bag of tokens per sequential chunk.
struct ChunkedBags {
  Eigen::MatrixXf counts;  // kChunks x kChunkBins
  size_t doc_token_count = 0;
};

// Whole-document bag used by the LR-BoT / FF-BoT baselines.
struct FlatBag {
  Eigen::VectorXf counts;  // kFlatBins
};

// Length bucket in 0..7: trunc(min(8, max(1, log_1.4(len)))) - 1.
int length_bucket(size_t token_len);

// bucket_width is the per-bucket bin span: chunk_bins/8 = 128 for the
// chunked representation, flat_bins/8 = 2048 for the flat one.
uint32_t token_bin(std::string_view token, uint32_t bucket_width);

ChunkedBags bag_chunks(const TokenStream& stream, const ChunkPlan& plan);
FlatBag bag_flat(const TokenStream& stream);

// Feature cache: 16-byte header (magic + format version), then per record
// a 32-byte document hash followed by 16x1024 little-endian float32 counts.
struct FeatureCacheRecord {
  std::array<uint8_t, 32> doc_hash;
  ChunkedBags bags;
};

void write_feature_cache(const std::string& path,
                         const std::vector<FeatureCacheRecord>& records);
std::vector<FeatureCacheRecord> read_feature_cache(const std::string& path);

}  // namespace wcd
