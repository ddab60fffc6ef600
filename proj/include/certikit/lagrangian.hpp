#pragma once

#include <vector>

#include "certikit/bounds.hpp"
#include "certikit/model.hpp"
#include "certikit/types.hpp"

namespace certikit {

/// All Lagrange multipliers of the relaxed QCQP. Per hidden layer i:
///   lambda_a: x_{i+1} >= 0
///   lambda_b: x_{i+1} >= L_i(x_i)
///   lambda_c: x_{i+1} .* (x_{i+1} - L_i(x_i)) <= 0
/// Per block i (input included):
///   lambda_d: (x_i - l_i) .* (x_i - u_i) <= 0
/// kappa in R^{1+N} is the diagonal shift of the eigenvalue reformulation,
/// split as leading scalar kappa[0] and vector kappa[1:].
struct DualState {
  std::vector<Vector> lambda_a;
  std::vector<Vector> lambda_b;
  std::vector<Vector> lambda_c;
  std::vector<Vector> lambda_d;
  Vector kappa;

  static DualState zeros(const Network& network);
  bool nonnegative() const;
};

/// Fixed flattening [a | b | c | d | kappa] used by the optimizer.
class DualLayout {
 public:
  explicit DualLayout(const Network& network);

  Index flat_size() const { return flat_size_; }
  Vector flatten(const DualState& state) const;
  DualState unflatten(const Eigen::Ref<const Vector>& flat) const;

  Index lambda_c_begin() const { return c_begin_; }
  Index lambda_c_end() const { return d_begin_; }
  Index kappa_begin() const { return kappa_begin_; }  // position of kappa[0]
  Index kappa_size() const { return flat_size_ - kappa_begin_; }

 private:
  std::vector<Index> hidden_dims_;
  std::vector<Index> block_dims_;
  Index c_begin_ = 0, d_begin_ = 0, kappa_begin_ = 0, flat_size_ = 0;
};

/// L(xbar, lambda) evaluated directly term by term in original coordinates
/// (x = center + half_width .* xbar). Upper-bounds phi(x) for every feasible x
/// and every lambda >= 0. kappa is ignored.
double evaluate_lagrangian(const Eigen::Ref<const Vector>& xbar, const DualState& duals,
                           const VerificationInstance& instance, const LayerBounds& bounds);

/// Coefficients of the Lagrangian as a quadratic in normalized coordinates,
///   L(xbar, lambda) = c + g^T xbar + 1/2 xbar^T H xbar,
/// assembled analytically per layer. H is exposed only through matrix-vector
/// products built from layer forward/adjoint passes; the solver operator
///   A v = kappa .* v - (g^T v_r ; v_0 g + H v_r)
/// is symmetric with M(lambda) affine in lambda.
class QuadCoeffs {
 public:
  QuadCoeffs(const VerificationInstance& instance, const LayerBounds& bounds,
             const DualState& duals);

  Index n() const { return n_; }
  double c() const { return c_; }
  const Vector& g() const { return g_; }

  /// H v in normalized coordinates.
  Vector apply_H(const Eigen::Ref<const Vector>& v) const;
  /// A v = kappa .* v - M(lambda) v on R^{1+N}.
  Vector apply_A(const Eigen::Ref<const Vector>& kappa, const Eigen::Ref<const Vector>& v) const;

  const Normalization& normalization() const { return norm_; }

 private:
  Vector apply_H_original(const Eigen::Ref<const Vector>& w) const;

  const VerificationInstance* instance_;
  Normalization norm_;
  std::vector<Vector> lambda_c_;
  std::vector<Vector> lambda_d_;
  Index n_ = 0;
  double c_ = 0.0;
  Vector g_;
};

/// Danskin lambda-derivative helper for the dual subgradient: for every
/// multiplier with constraint coefficient t_k(xbar) = c_k + a_k^T xbar
/// + 1/2 xbar^T B_k xbar, returns c_k + gamma * (Q_k(v) - v0^2 c_k), where
/// Q_k is the homogenization of t_k and v = (v0, v_r) is the current minimal
/// eigenvector. kappa in the result is left at zero.
DualState multiplier_gradient(const VerificationInstance& instance, const LayerBounds& bounds,
                              const Eigen::Ref<const Vector>& v, double gamma);

}  // namespace certikit
