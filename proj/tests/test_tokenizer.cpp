#include <set>

#include "doctest.h"
#include "wcd/nncore.hpp"
#include "wcd/tokenizer.hpp"

using namespace wcd;

TEST_CASE("tokenize basic html fragment") {
  TokenStream s = tokenize(std::string("<div id=\"x\">"));
  REQUIRE(s.tokens.size() == 3);
  CHECK(s.tokens[0] == "div");
  CHECK(s.tokens[1] == "id");
  CHECK(s.tokens[2] == "x");
  CHECK(s.source_len == 12);
}

TEST_CASE("tokenize empty input") {
  TokenStream s = tokenize(std::string(""));
  CHECK(s.tokens.empty());
}

TEST_CASE("tokenize non-ascii run forms one token") {
  std::vector<uint8_t> bytes{0x68, 0xC3, 0xA9, 0x6C, 0x6C};
  TokenStream s = tokenize(std::span<const uint8_t>(bytes.data(), bytes.size()));
  REQUIRE(s.tokens.size() == 3);
  CHECK(s.tokens[0] == "h");
  CHECK(s.tokens[1] == "\xC3\xA9");
  CHECK(s.tokens[2] == "ll");
}

TEST_CASE("tokenize handles embedded NUL as separator") {
  std::vector<uint8_t> bytes{'a', 0x00, 'b'};
  TokenStream s = tokenize(std::span<const uint8_t>(bytes.data(), bytes.size()));
  REQUIRE(s.tokens.size() == 2);
  CHECK(s.tokens[0] == "a");
  CHECK(s.tokens[1] == "b");
}

TEST_CASE("tokens are homogeneous and non-empty") {
  nn::Rng rng(7);
  for (int trial = 0; trial < 50; trial++) {
    std::vector<uint8_t> bytes(rng.uniform_int(400));
    for (auto& b : bytes) b = static_cast<uint8_t>(rng.uniform_int(256));
    TokenStream s = tokenize(std::span<const uint8_t>(bytes.data(), bytes.size()));
    for (const auto& tok : s.tokens) {
      REQUIRE(!tok.empty());
      bool high = static_cast<uint8_t>(tok[0]) > 0x7F;
      for (char c : tok) {
        uint8_t b = static_cast<uint8_t>(c);
        if (high)
          CHECK(b > 0x7F);
        else
          CHECK((std::isalnum(b) || b == '_'));
      }
    }
    // determinism
    TokenStream s2 = tokenize(std::span<const uint8_t>(bytes.data(), bytes.size()));
    CHECK(s2.tokens == s.tokens);
  }
}

TEST_CASE("plan_chunks n=33 drops the trailing token") {
  ChunkPlan plan = plan_chunks(33);
  REQUIRE(plan.ranges.size() == 16);
  CHECK(plan.stepsize == 2);
  std::set<size_t> covered;
  for (size_t k = 0; k < 16; k++) {
    CHECK(plan.ranges[k].first == 33 * k / 16);
    for (size_t i = plan.ranges[k].first; i < plan.ranges[k].second; i++)
      CHECK(covered.insert(i).second);  // never covered twice
  }
  CHECK(covered.size() == 32);
  CHECK(covered.count(32) == 0);
}

TEST_CASE("plan_chunks n=16 covers every token once") {
  ChunkPlan plan = plan_chunks(16);
  for (size_t k = 0; k < 16; k++) {
    CHECK(plan.ranges[k].first == k);
    CHECK(plan.ranges[k].second == k + 1);
  }
}

TEST_CASE("plan_chunks short document: one token per chunk") {
  ChunkPlan plan = plan_chunks(5);
  REQUIRE(plan.ranges.size() == 16);
  for (size_t k = 0; k < 5; k++) {
    CHECK(plan.ranges[k].first == k);
    CHECK(plan.ranges[k].second == k + 1);
  }
  for (size_t k = 5; k < 16; k++)
    CHECK(plan.ranges[k].first == plan.ranges[k].second);
}

TEST_CASE("plan_chunks n=0 gives all-empty chunks") {
  ChunkPlan plan = plan_chunks(0);
  REQUIRE(plan.ranges.size() == 16);
  for (auto [a, b] : plan.ranges) CHECK(a == b);
}

TEST_CASE("plan_chunks properties over random sizes") {
  nn::Rng rng(42);
  for (int trial = 0; trial < 200; trial++) {
    size_t n = rng.uniform_int(5000);
    ChunkPlan plan = plan_chunks(n);
    REQUIRE(plan.ranges.size() == 16);
    size_t covered = 0;
    size_t prev_start = 0, prev_end = 0;
    for (auto [a, b] : plan.ranges) {
      CHECK(a >= prev_start);       // starts non-decreasing
      CHECK(a >= prev_end);         // no overlap
      CHECK(b <= std::max(n, a));   // in bounds
      covered += b - a;
      prev_start = a;
      prev_end = b;
    }
    if (n >= 16)
      CHECK(covered == 16 * (n / 16));
    else
      CHECK(covered == n);
  }
}
