#include "wcd/hashing.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "wcd/murmur3.hpp"

namespace wcd {

int length_bucket(size_t token_len) {
  if (token_len == 0)
    throw std::invalid_argument("length_bucket: empty token");
  double loglen = std::log(static_cast<double>(token_len)) / std::log(1.4);
  double clamped = std::min(8.0, std::max(1.0, loglen));
  return static_cast<int>(clamped) - 1;
}

uint32_t token_bin(std::string_view token, uint32_t bucket_width) {
  uint32_t bucket = static_cast<uint32_t>(length_bucket(token.size()));
  return bucket * bucket_width + murmur3_x86_32(token, 0) % bucket_width;
}

ChunkedBags bag_chunks(const TokenStream& stream, const ChunkPlan& plan) {
  ChunkedBags bags;
  bags.counts = Eigen::MatrixXf::Zero(static_cast<int>(plan.ranges.size()),
                                      kChunkBins);
  bags.doc_token_count = stream.tokens.size();
  constexpr uint32_t width = kChunkBins / kLengthBuckets;
  for (size_t c = 0; c < plan.ranges.size(); c++) {
    auto [start, end] = plan.ranges[c];
    for (size_t i = start; i < end; i++) {
      bags.counts(static_cast<int>(c),
                  static_cast<int>(token_bin(stream.tokens[i], width))) += 1.f;
    }
  }
  return bags;
}

FlatBag bag_flat(const TokenStream& stream) {
  FlatBag bag;
  bag.counts = Eigen::VectorXf::Zero(kFlatBins);
  constexpr uint32_t width = kFlatBins / kLengthBuckets;
  for (const auto& tok : stream.tokens)
    bag.counts(static_cast<int>(token_bin(tok, width))) += 1.f;
  return bag;
}

namespace {
constexpr char kCacheMagic[12] = {'W', 'C', 'D', 'F', 'E', 'A',
                                  'T', 'C', 'H', 'E', '\0', '\0'};
constexpr uint32_t kCacheVersion = 1;
}  // namespace

void write_feature_cache(const std::string& path,
                         const std::vector<FeatureCacheRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out.write(kCacheMagic, sizeof(kCacheMagic));
  out.write(reinterpret_cast<const char*>(&kCacheVersion), 4);
  for (const auto& rec : records) {
    if (rec.bags.counts.rows() != kChunks || rec.bags.counts.cols() != kChunkBins)
      throw std::runtime_error("feature cache: bad tensor shape");
    out.write(reinterpret_cast<const char*>(rec.doc_hash.data()), 32);
    // Row-major so each chunk's 1024 bins are contiguous on disk.
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm =
        rec.bags.counts;
    out.write(reinterpret_cast<const char*>(rm.data()),
              sizeof(float) * kChunks * kChunkBins);
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<FeatureCacheRecord> read_feature_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  char magic[12];
  uint32_t version = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&version), 4);
  if (!in || std::memcmp(magic, kCacheMagic, sizeof(magic)) != 0)
    throw std::runtime_error("not a feature cache: " + path);
  if (version != kCacheVersion)
    throw std::runtime_error("unsupported feature cache version");
  std::vector<FeatureCacheRecord> records;
  while (true) {
    FeatureCacheRecord rec;
    in.read(reinterpret_cast<char*>(rec.doc_hash.data()), 32);
    if (in.gcount() == 0) break;
    if (in.gcount() != 32) throw std::runtime_error("truncated cache record");
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(
        kChunks, kChunkBins);
    in.read(reinterpret_cast<char*>(rm.data()),
            sizeof(float) * kChunks * kChunkBins);
    if (!in) throw std::runtime_error("truncated cache record");
    rec.bags.counts = rm;
    rec.bags.doc_token_count = static_cast<size_t>(rm.sum());
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace wcd
