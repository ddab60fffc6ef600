#pragma once

#include <cstdint>
#include <functional>

#include "certikit/model.hpp"
#include "certikit/types.hpp"

namespace certikit {

struct AttackConfig {
  int steps = 100;
  int restarts = 5;
  double step_size = 0.0;  // 0 = per-coordinate default 2.5 * half_width / steps
  std::uint64_t seed = 0;
};

struct AttackResult {
  double value = 0.0;  // lower bound on opt, recomputed by an exact forward pass
  Vector witness;
  int restarts = 0;
  int steps = 0;
};

/// Projected gradient ascent on phi(network(x)) over the input box with
/// sign-gradient steps. The ReLU subgradient at 0 is fixed to 1. The first
/// restart starts from the box center, the rest from seeded uniform points.
AttackResult pgd_lower_bound(const VerificationInstance& instance, const AttackConfig& config = {});

struct GridResult {
  double value = 0.0;
  Vector argmax;
};

/// Exhaustive evaluation on a uniform grid (endpoints included) with
/// points_per_dim samples per input coordinate. Inputs of dimension > 3 or
/// grids over 1e7 points are rejected.
GridResult grid_search_opt(const VerificationInstance& instance, int points_per_dim);

/// Max relative error between grad and central finite differences of f at
/// point, with a 1e-8 absolute floor on the denominator.
double fd_check(const std::function<double(const Vector&)>& f,
                const std::function<Vector(const Vector&)>& grad, const Vector& point,
                double h = 1e-5);

}  // namespace certikit
