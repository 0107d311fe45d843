#include "wcd/tokenizer.hpp"

namespace wcd {

namespace {

inline bool is_word_byte(uint8_t b) {
  return (b >= 'a' && b <= 'z') || (b >= 'A' && b <= 'Z') ||
         (b >= '0' && b <= '9') || b == '_';
}

inline bool is_high_byte(uint8_t b) { return b > 0x7F; }

}  // namespace

TokenStream tokenize(std::span<const uint8_t> document) {
  TokenStream out;
  out.source_len = document.size();
  const uint8_t* p = document.data();
  size_t i = 0;
  const size_t n = document.size();
  while (i < n) {
    uint8_t b = p[i];
    if (is_high_byte(b)) {
      size_t j = i + 1;
      while (j < n && is_high_byte(p[j])) j++;
      out.tokens.emplace_back(reinterpret_cast<const char*>(p + i), j - i);
      i = j;
    } else if (is_word_byte(b)) {
      size_t j = i + 1;
      while (j < n && is_word_byte(p[j])) j++;
      out.tokens.emplace_back(reinterpret_cast<const char*>(p + i), j - i);
      i = j;
    } else {
      i++;
    }
  }
  return out;
}

TokenStream tokenize(const std::string& document) {
  return tokenize(std::span<const uint8_t>(
      reinterpret_cast<const uint8_t*>(document.data()), document.size()));
}

ChunkPlan plan_chunks(size_t n_tokens, size_t steps) {
  ChunkPlan plan;
  plan.ranges.reserve(steps);
  if (n_tokens >= steps) {
    plan.stepsize = n_tokens / steps;
    for (size_t k = 0; k < steps; k++) {
      size_t start = n_tokens * k / steps;
      plan.ranges.emplace_back(start, start + plan.stepsize);
    }
  } else {
    // Short document: one token per chunk, trailing chunks empty.
    plan.stepsize = n_tokens > 0 ? 1 : 0;
    for (size_t k = 0; k < steps; k++) {
      if (k < n_tokens)
        plan.ranges.emplace_back(k, k + 1);
      else
        plan.ranges.emplace_back(n_tokens, n_tokens);
    }
  }
  return plan;
}

}  // namespace wcd
