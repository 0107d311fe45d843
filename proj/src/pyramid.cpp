#include "wcd/pyramid.hpp"

#include <stdexcept>

namespace wcd {

Pyramid build_pyramid(const Eigen::MatrixXf& leaf_bags) {
  const int leaves = static_cast<int>(leaf_bags.rows());
  if (leaves < 1 || (leaves & (leaves - 1)) != 0)
    throw std::invalid_argument("build_pyramid: leaf count must be a power of two");
  const int total = 2 * leaves - 1;
  Pyramid pyr;
  pyr.nodes.resize(total, leaf_bags.cols());
  pyr.nodes.topRows(leaves) = leaf_bags;
  pyr.level_offsets.push_back(0);
  int level_start = 0;
  int level_size = leaves;
  int next = leaves;
  while (level_size > 1) {
    pyr.level_offsets.push_back(next);
    for (int i = 0; i < level_size / 2; i++) {
      pyr.nodes.row(next + i) =
          0.5f * (pyr.nodes.row(level_start + 2 * i) +
                  pyr.nodes.row(level_start + 2 * i + 1));
    }
    level_start = next;
    next += level_size / 2;
    level_size /= 2;
  }
  return pyr;
}

}  // namespace wcd
