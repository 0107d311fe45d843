#pragma once

#include <Eigen/Core>
#include <vector>

#include "wcd/hashing.hpp"

namespace wcd {

// Multi-scale representation built by recursive pairwise averaging of the
// chunk bags. For 16 leaves the node layout is: rows 0..15 the leaves in
// document order, 16..23 the 8-node level, 24..27, 28..29, and row 30 the
// root. Parents are the element-wise mean of their two children.
struct Pyramid {
  Eigen::MatrixXf nodes;               // total_nodes x feature_dim
  std::vector<int> level_offsets;      // start row of each level, leaves first
};

// Leaf count must be a power of two (16 in the production configuration;
// other sizes are for tests). total nodes = 2*leaves - 1.
Pyramid build_pyramid(const Eigen::MatrixXf& leaf_bags);

inline Pyramid build_pyramid(const ChunkedBags& bags) {
  return build_pyramid(bags.counts);
}

}  // namespace wcd
