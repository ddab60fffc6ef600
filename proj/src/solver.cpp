#include "certikit/solver.hpp"

#include <chrono>
#include <cmath>
#include <thread>

namespace certikit {

void SolverConfig::validate() const {
  if (max_iters < 0) throw Error("config: max_iters must be >= 0");
  if (learning_rate <= 0.0) throw Error("config: learning_rate must be positive");
  if (anneal_factor <= 0.0) throw Error("config: anneal_factor must be positive");
  if (lr_scale_lambda_c <= 0.0) throw Error("config: lr_scale_lambda_c must be positive");
  for (double f : anneal_at)
    if (f <= 0.0 || f > 1.0) throw Error("config: anneal fractions must lie in (0, 1]");
  if (kappa_mode == KappaMode::ClampAfter &&
      (kappa_clamp_fraction <= 0.0 || kappa_clamp_fraction > 1.0))
    throw Error("config: kappa_clamp_fraction must lie in (0, 1]");
  if (kappa_mode == KappaMode::Penalty && kappa_penalty < 0.0)
    throw Error("config: kappa_penalty must be >= 0");
  if (lanczos_k < 2) throw Error("config: lanczos_k must be >= 2");
  if (lanczos_tol <= 0.0) throw Error("config: lanczos_tol must be positive");
  if (certify_every < 0) throw Error("config: certify_every must be >= 0");
}

SolverConfig SolverConfig::mlp_preset() {
  SolverConfig config;
  config.optimizer = Optimizer::Adam;
  config.lr_scale_lambda_c = 0.1;
  return config;
}

DualState init_duals(const VerificationInstance& instance, const LayerBounds& bounds) {
  DualState state = DualState::zeros(instance.network);
  const QuadCoeffs coeffs(instance, bounds, state);
  const Index n = coeffs.n();
  const Vector g_abs = coeffs.g().cwiseAbs();
  state.kappa[0] = g_abs.sum();
  state.kappa.tail(n) = g_abs;
  if (instance.objective.has_quadratic()) {
    // Gershgorin row sums over the only nonzero H(0) block (the folded
    // objective on the last hidden block, scaled into normalized coordinates).
    const BlockLayout& layout = instance.network.layout();
    const Index last = instance.network.num_hidden_layers();
    const Matrix h_hat = instance.objective.materialize_quadratic();
    const Vector s_last = layout.segment(coeffs.normalization().half_width, last);
    const Vector row_sums =
        (s_last.asDiagonal() * h_hat * s_last.asDiagonal()).cwiseAbs().rowwise().sum();
    state.kappa.segment(1 + layout.offset[static_cast<size_t>(last)], row_sums.size()) +=
        row_sums;
  }
  return state;
}

namespace {

double dual_value_from_eig(const QuadCoeffs& coeffs, const Vector& kappa, double eig_value) {
  const double e = std::min(eig_value, 0.0);
  const double f = coeffs.c() + 0.5 * (kappa.array() - e).max(0.0).sum();
  if (!std::isfinite(f))
    throw Error("dual objective overflow: c=" + std::to_string(coeffs.c()) +
                " eig=" + std::to_string(eig_value));
  return f;
}

LinearOperator make_A_operator(const QuadCoeffs& coeffs, const Vector& kappa) {
  return LinearOperator{1 + coeffs.n(), [&coeffs, kappa](const Eigen::Ref<const Vector>& v) {
                          return coeffs.apply_A(kappa, v);
                        }};
}

}  // namespace

DualObjective dual_objective_with(const QuadCoeffs& coeffs, const DualState& duals,
                                  const VerificationInstance&, const LayerBounds&,
                                  EigenEstimate::Method method, const SolverConfig& config,
                                  std::uint64_t lanczos_seed) {
  if (!duals.nonnegative()) throw Error("dual_objective: negative multiplier");
  const LinearOperator op = make_A_operator(coeffs, duals.kappa);
  DualObjective result;
  result.eig = method == EigenEstimate::Method::Dense
                   ? dense_min_eig(op, config.dense_cap)
                   : lanczos_min_eig(op, config.lanczos_k, lanczos_seed, config.lanczos_tol);
  result.value = dual_value_from_eig(coeffs, duals.kappa, result.eig.value);
  return result;
}

DualObjective dual_objective(const DualState& duals, const VerificationInstance& instance,
                             const LayerBounds& bounds, EigenEstimate::Method method,
                             const SolverConfig& config) {
  const QuadCoeffs coeffs(instance, bounds, duals);
  return dual_objective_with(coeffs, duals, instance, bounds, method, config, config.seed);
}

DualState subgradient(const DualState& duals, const Eigen::Ref<const Vector>& v_star,
                      double eig_value, const VerificationInstance& instance,
                      const LayerBounds& bounds) {
  const double e = std::min(eig_value, 0.0);
  const bool clamped = e < 0.0;
  const Eigen::ArrayXd active = (duals.kappa.array() - e > 0.0).cast<double>();
  const double active_count = active.sum();
  const double gamma = clamped ? active_count : 0.0;

  DualState grad = multiplier_gradient(instance, bounds, v_star, gamma);
  grad.kappa =
      0.5 * (active - (clamped ? 1.0 : 0.0) * active_count * v_star.array().square()).matrix();
  return grad;
}

DualOptimizer::DualOptimizer(const Network& network, const SolverConfig& config)
    : layout_(network), config_(config) {
  config_.validate();
  const Index size = layout_.flat_size();
  m_ = Vector::Zero(size);
  v_ = Vector::Zero(size);
  scale_ = Vector::Ones(size);
  scale_.segment(layout_.lambda_c_begin(), layout_.lambda_c_end() - layout_.lambda_c_begin())
      .setConstant(config_.lr_scale_lambda_c);
}

DualState DualOptimizer::step(const DualState& state, const DualState& gradient, int iteration) {
  Vector theta = layout_.flatten(state);
  Vector grad = layout_.flatten(gradient);
  if (theta.size() != grad.size()) throw Error("optimizer: state/gradient shape mismatch");

  const double frac = config_.max_iters > 0
                          ? static_cast<double>(iteration) / config_.max_iters
                          : 1.0;
  double lr = config_.learning_rate;
  for (double at : config_.anneal_at)
    if (frac > at) lr *= config_.anneal_factor;

  const Index kappa_rest = layout_.kappa_begin() + 1;
  const Index kappa_rest_size = layout_.flat_size() - kappa_rest;
  const bool clamp_kappa = config_.kappa_mode == SolverConfig::KappaMode::ClampAfter &&
                           frac >= config_.kappa_clamp_fraction;
  if (config_.kappa_mode == SolverConfig::KappaMode::Penalty)
    grad.segment(kappa_rest, kappa_rest_size).array() += config_.kappa_penalty;
  if (clamp_kappa) grad.segment(kappa_rest, kappa_rest_size).setZero();
  if (!config_.use_lambda_d)
    grad.segment(layout_.lambda_c_end(), layout_.kappa_begin() - layout_.lambda_c_end())
        .setZero();

  if (config_.optimizer == SolverConfig::Optimizer::Adam) {
    ++adam_t_;
    m_ = config_.adam_beta1 * m_ + (1.0 - config_.adam_beta1) * grad;
    v_ = config_.adam_beta2 * v_ + (1.0 - config_.adam_beta2) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(config_.adam_beta1, adam_t_);
    const double bc2 = 1.0 - std::pow(config_.adam_beta2, adam_t_);
    const Vector m_hat = m_ / bc1;
    const Vector v_hat = v_ / bc2;
    theta -= lr * scale_.cwiseProduct(
                      m_hat.cwiseQuotient(v_hat.cwiseSqrt().array().matrix() +
                                          Vector::Constant(theta.size(), config_.optimizer_eps)));
  } else {
    v_ = config_.rmsprop_decay * v_ + (1.0 - config_.rmsprop_decay) * grad.cwiseProduct(grad);
    theta -= lr * scale_.cwiseProduct(grad.cwiseQuotient(
                      v_.cwiseSqrt() + Vector::Constant(theta.size(), config_.optimizer_eps)));
  }

  theta = theta.cwiseMax(0.0);
  if (clamp_kappa) theta.segment(kappa_rest, kappa_rest_size).setZero();
  return layout_.unflatten(theta);
}

SolveResult solve(const VerificationInstance& instance, const LayerBounds& bounds,
                  const SolverConfig& config) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  const Index dim = 1 + instance.network.total_vars();

  SolveResult result;
  DualState state = init_duals(instance, bounds);
  {
    // The init is PSD by construction (closed form / Gershgorin), so
    // f = c + 1/2 sum(kappa) certifies; the dense pass confirms it.
    const QuadCoeffs coeffs(instance, bounds, state);
    result.bound_initial = dual_value_from_eig(coeffs, state.kappa, 0.0);
    if (dim <= config.dense_cap) {
      const DualObjective certified = dual_objective_with(
          coeffs, state, instance, bounds, EigenEstimate::Method::Dense, config, config.seed);
      result.bound_initial = std::min(result.bound_initial, certified.value);
    }
  }
  result.bound_certified = result.bound_initial;
  result.best_duals = state;
  result.final_estimate = result.bound_initial;
  result.certified_checkpoints.emplace_back(0, result.bound_certified);
  if (config.stop_on_verified && result.bound_certified < 0.0) {
    result.verified = true;
    result.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
  }

  DualState best_estimate_state = state;
  double best_estimate = std::numeric_limits<double>::infinity();
  DualOptimizer optimizer(instance.network, config);

  auto certify = [&](const DualState& candidate, int iteration) {
    const DualObjective certified = dual_objective(candidate, instance, bounds,
                                                   EigenEstimate::Method::Dense, config);
    if (certified.value < result.bound_certified) {
      result.bound_certified = certified.value;
      result.best_duals = candidate;
    }
    result.certified_checkpoints.emplace_back(iteration, result.bound_certified);
  };

  int t = 1;
  for (; t <= config.max_iters; ++t) {
    const QuadCoeffs coeffs(instance, bounds, state);
    const DualObjective estimate =
        dual_objective_with(coeffs, state, instance, bounds, EigenEstimate::Method::Lanczos,
                            config, config.seed + static_cast<std::uint64_t>(t));
    result.estimate_history.push_back(estimate.value);
    result.final_estimate = estimate.value;
    if (estimate.value < best_estimate) {
      best_estimate = estimate.value;
      best_estimate_state = state;
    }
    const DualState grad =
        subgradient(state, estimate.eig.vector, estimate.eig.value, instance, bounds);
    state = optimizer.step(state, grad, t);

    if (config.certify_every > 0 && t % config.certify_every == 0) {
      certify(state, t);
      if (config.stop_on_verified && result.bound_certified < 0.0) {
        ++t;
        break;
      }
    }
  }
  result.iterations = std::min(t - 1, config.max_iters);

  if (config.max_iters > 0 && !(config.stop_on_verified && result.bound_certified < 0.0))
    certify(best_estimate_state, result.iterations);

  result.verified = result.bound_certified < 0.0;
  result.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

RobustnessReport verify_robustness(const Network& network, const Eigen::Ref<const Vector>& input,
                                   Index label, double eps, bool clip_to_unit,
                                   const SolverConfig& config, const AttackConfig& attack,
                                   int workers) {
  if (label < 0 || label >= network.output_dim())
    throw Error("verify_robustness: label " + std::to_string(label) + " out of range");
  std::vector<Index> targets;
  for (Index y = 0; y < network.output_dim(); ++y)
    if (y != label) targets.push_back(y);

  RobustnessReport report;
  report.targets.resize(targets.size());

  auto run_range = [&](size_t begin, size_t end, bool run_solves) {
    for (size_t i = begin; i < end; ++i) {
      const Index target = targets[i];
      TargetReport& entry = report.targets[i];
      entry.target = target;
      const VerificationInstance instance = make_robustness_instance(
          network, input, label, target, eps, clip_to_unit, "target-" + std::to_string(target));
      if (!run_solves) {
        AttackConfig attack_config = attack;
        attack_config.seed = attack.seed + static_cast<std::uint64_t>(1000 * target);
        entry.attack = pgd_lower_bound(instance, attack_config);
        entry.verdict = entry.attack.value > 0.0 ? "falsified" : "undecided";
      } else {
        const LayerBounds bounds = interval_propagate(network, instance.box);
        SolverConfig target_config = config;
        target_config.seed = config.seed + static_cast<std::uint64_t>(1000 * target);
        entry.result = solve(instance, bounds, target_config);
        entry.verdict = entry.result->verified ? "verified" : "undecided";
      }
    }
  };

  auto run_parallel = [&](bool run_solves) {
    const size_t count = targets.size();
    const size_t pool = std::min<size_t>(std::max(workers, 1), count);
    if (pool <= 1) {
      run_range(0, count, run_solves);
      return;
    }
    std::vector<std::thread> threads;
    const size_t chunk = (count + pool - 1) / pool;
    for (size_t w = 0; w < pool; ++w) {
      const size_t begin = w * chunk;
      const size_t end = std::min(begin + chunk, count);
      if (begin >= end) break;
      threads.emplace_back(run_range, begin, end, run_solves);
    }
    for (auto& thread : threads) thread.join();
  };

  run_parallel(false);  // PGD on every target first
  bool falsified = false;
  for (const TargetReport& entry : report.targets)
    if (entry.verdict == "falsified") falsified = true;

  if (falsified) {
    report.verdict = "falsified";
    return report;
  }

  run_parallel(true);
  bool all_verified = true;
  for (const TargetReport& entry : report.targets)
    if (entry.verdict != "verified") all_verified = false;
  report.verdict = all_verified ? "verified" : "undecided";
  return report;
}

}  // namespace certikit
