#pragma once

#include <vector>

#include "certikit/model.hpp"
#include "certikit/types.hpp"

namespace certikit {

/// Element-wise activation bounds per block (0 = input, 1..L = post-ReLU hidden).
/// Pre-activation bounds are kept for diagnostics when computed locally.
struct LayerBounds {
  std::vector<Vector> lower;
  std::vector<Vector> upper;
  std::vector<Vector> pre_lower;  // per hidden layer; may be empty (imported bounds)
  std::vector<Vector> pre_upper;

  Index blocks() const { return static_cast<Index>(lower.size()); }
};

/// Per-coordinate affine change of variables x = center + half_width .* xbar
/// mapping xbar in [-1,1]^N onto [lower, upper]; half_width >= 0, with
/// half_width = 0 pinning degenerate coordinates.
struct Normalization {
  Vector center;
  Vector half_width;
  BlockLayout layout;

  static Normalization from_bounds(const Network& network, const LayerBounds& bounds);

  Vector denormalize(const Eigen::Ref<const Vector>& xbar) const {
    return center + half_width.cwiseProduct(xbar);
  }
  /// Inverse map; degenerate coordinates go to 0.
  Vector normalize(const Eigen::Ref<const Vector>& x) const;
};

/// Interval arithmetic through the network: affine step W c + b -/+ |W| r
/// with c, r the interval midpoint and radius, then ReLU clamp at 0.
LayerBounds interval_propagate(const Network& network, const InputBox& box);

/// Interval for the readout output given last-block bounds (no activation).
void output_interval(const Network& network, const LayerBounds& bounds, Vector& lower,
                     Vector& upper);

/// Validates shapes against the network, rejects lower > upper (naming block and
/// index), and clamps hidden lower bounds at 0. Blocks arrive as raw vectors,
/// e.g. parsed from a bounds file.
LayerBounds import_bounds(const std::vector<Vector>& lower, const std::vector<Vector>& upper,
                          const Network& network);

/// Upper bound on ||target - y||^2 - tau over y in [lower, upper]:
/// || max(|upper - target|, |target - lower|) ||^2 - tau.
double ibp_quadratic_bound(const Eigen::Ref<const Vector>& lower,
                           const Eigen::Ref<const Vector>& upper,
                           const Eigen::Ref<const Vector>& target, double tau);

}  // namespace certikit
