#pragma once

#include <cstdint>
#include <functional>

#include "certikit/types.hpp"

namespace certikit {

/// Symmetric operator given only through matrix-vector products.
struct LinearOperator {
  Index dim = 0;
  std::function<Vector(const Eigen::Ref<const Vector>&)> apply;
};

struct EigenEstimate {
  double value = 0.0;     // Ritz value; >= true lambda_min for the Lanczos path
  Vector vector;          // unit norm
  double residual = 0.0;  // ||A v - value * v||
  int iterations = 0;
  enum class Method { Lanczos, Dense } method = Method::Lanczos;
  bool converged = false;
};

inline constexpr Index kDefaultDenseCap = 20001;

/// k Lanczos steps with full reorthogonalization from a seeded Gaussian start
/// vector; returns the smallest Ritz pair lifted back to R^dim. On breakdown
/// (off-diagonal below 1e-12) restarts once from a fresh seeded vector and
/// keeps the better pair; a second breakdown means an invariant subspace was
/// found and the current pair is returned converged.
EigenEstimate lanczos_min_eig(const LinearOperator& op, int k, std::uint64_t seed,
                              double tol = 1e-7);

/// Materializes the operator column by column, symmetrizes, and runs a dense
/// symmetric eigensolver. The result certifies; refuses dims over the cap.
EigenEstimate dense_min_eig(const LinearOperator& op, Index dim_cap = kDefaultDenseCap);

/// Dense (A + A^T)/2 from basis-vector applications; the symmetry defect
/// ||A - A^T||_max is written to *defect when given.
Matrix materialize(const LinearOperator& op, double* defect = nullptr);

}  // namespace certikit
