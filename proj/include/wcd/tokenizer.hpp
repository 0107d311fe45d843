#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace wcd {

// Ordered token stream extracted from one document. Tokens are raw byte
// strings: either a maximal run of bytes > 0x7F or a maximal run of
// [A-Za-z0-9_]. Everything else is a separator.
struct TokenStream {
  std::vector<std::string> tokens;
  size_t source_len = 0;
};

// Half-open [start, end) ranges into a token list, one per chunk.
struct ChunkPlan {
  std::vector<std::pair<size_t, size_t>> ranges;
  size_t stepsize = 0;
};

TokenStream tokenize(std::span<const uint8_t> document);
TokenStream tokenize(const std::string& document);

// For n_tokens >= steps this reproduces the reference chunking exactly:
// start_k = floor(n*k/steps), width floor(n/steps). For 0 < n_tokens < steps
// token i is assigned to chunk i alone and the remaining chunks are empty.
ChunkPlan plan_chunks(size_t n_tokens, size_t steps = 16);

}  // namespace wcd
