#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "certikit/attack.hpp"
#include "certikit/eigensolve.hpp"
#include "certikit/lagrangian.hpp"

namespace certikit {

struct SolverConfig {
  int max_iters = 1000;

  enum class Optimizer { Adam, RMSProp };
  Optimizer optimizer = Optimizer::Adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double rmsprop_decay = 0.9;
  double optimizer_eps = 1e-8;

  double learning_rate = 1e-3;
  std::vector<double> anneal_at = {1.0 / 3.0, 2.0 / 3.0};  // fractions of max_iters
  double anneal_factor = 0.1;
  double lr_scale_lambda_c = 1.0;

  enum class KappaMode { Free, Penalty, ClampAfter };
  KappaMode kappa_mode = KappaMode::Free;
  double kappa_penalty = 1e-3;
  double kappa_clamp_fraction = 0.5;

  bool use_lambda_d = true;
  int lanczos_k = 200;
  double lanczos_tol = 1e-7;
  std::uint64_t seed = 0;
  int certify_every = 0;  // iterations between dense certifications; 0 = final only
  bool stop_on_verified = false;
  Index dense_cap = kDefaultDenseCap;

  void validate() const;
  /// Adam with the 10x reduced lambda_c learning rate used for MLP runs.
  static SolverConfig mlp_preset();
};

struct SolveResult {
  double bound_initial = 0.0;    // certified bound at the initialization
  double bound_certified = 0.0;  // best certified bound (dense eigendecomposition only)
  DualState best_duals;          // iterate achieving bound_certified
  std::vector<double> estimate_history;  // Lanczos-estimate f per iteration (monitoring only)
  std::vector<std::pair<int, double>> certified_checkpoints;  // (iteration, best certified so far)
  double final_estimate = 0.0;
  double wall_time_s = 0.0;
  int iterations = 0;
  bool verified = false;  // bound_certified < 0
};

/// lambda = 0 with the closed-form kappa (kappa_0 = ||g||_1, kappa_tail = |g|)
/// when H(0) = 0, otherwise Gershgorin row
/// sums of |M(0)| (which keep diag(kappa) - M(0) PSD).
DualState init_duals(const VerificationInstance& instance, const LayerBounds& bounds);

struct DualObjective {
  double value = 0.0;
  EigenEstimate eig;
};

/// f(lambda, kappa) = c(lambda) + 1/2 sum_j max(kappa_j - e, 0) with
/// e = min(lambda_min(diag(kappa) - M(lambda)), 0). Dense method certifies;
/// Lanczos is a monitoring estimate that may under-report and never certifies.
DualObjective dual_objective(const DualState& duals, const VerificationInstance& instance,
                             const LayerBounds& bounds, EigenEstimate::Method method,
                             const SolverConfig& config = {});

/// Same, reusing already-assembled coefficients.
DualObjective dual_objective_with(const QuadCoeffs& coeffs, const DualState& duals,
                                  const VerificationInstance& instance, const LayerBounds& bounds,
                                  EigenEstimate::Method method, const SolverConfig& config,
                                  std::uint64_t lanczos_seed);

/// Danskin subgradient of f at (lambda, kappa) given the minimal eigenpair
/// (v_star unit norm, eig_value).
DualState subgradient(const DualState& duals, const Eigen::Ref<const Vector>& v_star,
                      double eig_value, const VerificationInstance& instance,
                      const LayerBounds& bounds);

/// Projected Adam/RMSProp over the flattened duals, with per-group learning
/// rates, the anneal schedule, and kappa mode handling. Moment buffers persist
/// across iterations.
class DualOptimizer {
 public:
  DualOptimizer(const Network& network, const SolverConfig& config);

  /// iteration is 1-based; projects every coordinate to >= 0.
  DualState step(const DualState& state, const DualState& gradient, int iteration);

 private:
  DualLayout layout_;
  SolverConfig config_;
  Vector scale_;  // per-coordinate learning-rate scale
  Vector m_, v_;
  int adam_t_ = 0;
};

/// The first-order dual loop: Lanczos eigmin, subgradient step, projection, dense
/// certification at checkpoints and at the best-estimate iterate. Returns the
/// best certified bound, never the Lanczos estimate.
SolveResult solve(const VerificationInstance& instance, const LayerBounds& bounds,
                  const SolverConfig& config);

struct TargetReport {
  Index target = -1;
  AttackResult attack;
  std::optional<SolveResult> result;  // empty when the solve was skipped
  std::string verdict;                // "verified", "falsified", or "undecided"
};

struct RobustnessReport {
  std::vector<TargetReport> targets;
  std::string verdict;
};

/// One instance per incorrect target label; verified iff every certified
/// bound is < 0. PGD runs first on every target; any positive PGD value
/// falsifies the instance and the (expensive) solves are skipped.
RobustnessReport verify_robustness(const Network& network, const Eigen::Ref<const Vector>& input,
                                   Index label, double eps, bool clip_to_unit,
                                   const SolverConfig& config, const AttackConfig& attack = {},
                                   int workers = 1);

}  // namespace certikit
