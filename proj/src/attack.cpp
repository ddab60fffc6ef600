#include "certikit/attack.hpp"

#include <cmath>
#include <random>

namespace certikit {

namespace {

/// Gradient of phi(network(x0)) with respect to x0; ReLU subgradient 1 at 0.
Vector objective_input_gradient(const VerificationInstance& instance, const ForwardTrace& trace) {
  const Network& net = instance.network;
  Vector grad = instance.objective.grad(trace.last_block());
  for (Index i = net.num_hidden_layers() - 1; i >= 0; --i) {
    const Vector pre = net.layer(i).forward(trace.blocks[static_cast<size_t>(i)]);
    const Vector gate = (pre.array() >= 0.0).cast<double>();
    grad = net.layer(i).adjoint(grad.cwiseProduct(gate));
  }
  return grad;
}

}  // namespace

AttackResult pgd_lower_bound(const VerificationInstance& instance, const AttackConfig& config) {
  if (config.steps < 1 || config.restarts < 1)
    throw Error("pgd: steps and restarts must be >= 1");
  if (config.step_size < 0.0) throw Error("pgd: step_size must be positive");
  const Vector& lo = instance.box.lower;
  const Vector& hi = instance.box.upper;
  const Vector half = 0.5 * (hi - lo);
  Vector step = config.step_size > 0.0
                    ? Vector::Constant(lo.size(), config.step_size)
                    : Vector(2.5 / config.steps * half);

  AttackResult best;
  best.restarts = config.restarts;
  best.steps = config.steps;
  best.value = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < config.restarts; ++r) {
    Vector x;
    if (r == 0) {
      x = 0.5 * (lo + hi);
    } else {
      std::mt19937_64 rng(config.seed + static_cast<std::uint64_t>(r));
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      x.resize(lo.size());
      for (Index i = 0; i < x.size(); ++i) x[i] = lo[i] + unit(rng) * (hi[i] - lo[i]);
    }
    for (int t = 0; t < config.steps; ++t) {
      const ForwardTrace trace = forward(instance.network, x);
      const Vector grad = objective_input_gradient(instance, trace);
      x += step.cwiseProduct(grad.unaryExpr([](double g) {
        return g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0);
      }));
      x = x.cwiseMax(lo).cwiseMin(hi);
    }
    const double value = instance.eval_objective(x);
    if (value > best.value) {
      best.value = value;
      best.witness = x;
    }
  }
  return best;
}

GridResult grid_search_opt(const VerificationInstance& instance, int points_per_dim) {
  const Index dim = instance.box.dim();
  if (dim > 3) throw Error("grid_search_opt: input dimension > 3 not supported");
  if (points_per_dim < 1) throw Error("grid_search_opt: need at least one point per dim");
  double total = std::pow(static_cast<double>(points_per_dim), static_cast<double>(dim));
  if (total > 1e7) throw Error("grid_search_opt: grid exceeds 1e7 points");

  const Vector& lo = instance.box.lower;
  const Vector& hi = instance.box.upper;
  auto coord = [&](Index d, int idx) {
    if (points_per_dim == 1) return 0.5 * (lo[d] + hi[d]);
    return lo[d] + (hi[d] - lo[d]) * idx / (points_per_dim - 1);
  };

  GridResult best;
  best.value = -std::numeric_limits<double>::infinity();
  Vector x(dim);
  std::vector<int> idx(static_cast<size_t>(dim), 0);
  while (true) {
    for (Index d = 0; d < dim; ++d) x[d] = coord(d, idx[static_cast<size_t>(d)]);
    const double value = instance.eval_objective(x);
    if (value > best.value) {
      best.value = value;
      best.argmax = x;
    }
    Index d = 0;
    while (d < dim && ++idx[static_cast<size_t>(d)] == points_per_dim) {
      idx[static_cast<size_t>(d)] = 0;
      ++d;
    }
    if (d == dim) break;
  }
  return best;
}

double fd_check(const std::function<double(const Vector&)>& f,
                const std::function<Vector(const Vector&)>& grad, const Vector& point,
                double h) {
  const Vector g = grad(point);
  double worst = 0.0;
  Vector x = point;
  for (Index j = 0; j < point.size(); ++j) {
    x[j] = point[j] + h;
    const double up = f(x);
    x[j] = point[j] - h;
    const double down = f(x);
    x[j] = point[j];
    const double fd = (up - down) / (2.0 * h);
    const double err = std::abs(fd - g[j]) / std::max(std::abs(fd), 1e-8);
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace certikit
