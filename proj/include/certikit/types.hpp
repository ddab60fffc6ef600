#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <vector>

namespace certikit {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Offsets of the activation blocks [x0 (input), x1, ..., xL (hidden)] inside
/// the flattened variable vector of length N = input_dim + sum(hidden dims).
struct BlockLayout {
  std::vector<Index> offset;
  std::vector<Index> size;
  Index total = 0;

  Index blocks() const { return static_cast<Index>(size.size()); }

  Eigen::VectorBlock<Vector> segment(Vector& v, Index block) const {
    return v.segment(offset[block], size[block]);
  }
  Eigen::VectorBlock<const Vector> segment(const Vector& v, Index block) const {
    return v.segment(offset[block], size[block]);
  }

  static BlockLayout from_sizes(const std::vector<Index>& sizes) {
    BlockLayout layout;
    layout.size = sizes;
    layout.offset.reserve(sizes.size());
    for (Index s : sizes) {
      layout.offset.push_back(layout.total);
      layout.total += s;
    }
    return layout;
  }
};

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace certikit
