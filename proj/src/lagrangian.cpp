#include "certikit/lagrangian.hpp"

namespace certikit {

DualState DualState::zeros(const Network& network) {
  DualState state;
  const Index layers = network.num_hidden_layers();
  state.lambda_a.reserve(static_cast<size_t>(layers));
  for (Index i = 0; i < layers; ++i) {
    const Index out = network.block_dim(i + 1);
    state.lambda_a.push_back(Vector::Zero(out));
    state.lambda_b.push_back(Vector::Zero(out));
    state.lambda_c.push_back(Vector::Zero(out));
  }
  for (Index b = 0; b <= layers; ++b)
    state.lambda_d.push_back(Vector::Zero(network.block_dim(b)));
  state.kappa = Vector::Zero(1 + network.total_vars());
  return state;
}

bool DualState::nonnegative() const {
  auto ok = [](const std::vector<Vector>& family) {
    for (const Vector& v : family)
      if ((v.array() < 0.0).any()) return false;
    return true;
  };
  return ok(lambda_a) && ok(lambda_b) && ok(lambda_c) && ok(lambda_d) &&
         !(kappa.array() < 0.0).any();
}

DualLayout::DualLayout(const Network& network) {
  const Index layers = network.num_hidden_layers();
  Index nh = 0;
  for (Index i = 0; i < layers; ++i) {
    hidden_dims_.push_back(network.block_dim(i + 1));
    nh += hidden_dims_.back();
  }
  Index nd = 0;
  for (Index b = 0; b <= layers; ++b) {
    block_dims_.push_back(network.block_dim(b));
    nd += block_dims_.back();
  }
  c_begin_ = 2 * nh;
  d_begin_ = 3 * nh;
  kappa_begin_ = 3 * nh + nd;
  flat_size_ = kappa_begin_ + 1 + network.total_vars();
}

Vector DualLayout::flatten(const DualState& state) const {
  Vector flat(flat_size_);
  Index pos = 0;
  auto put = [&](const std::vector<Vector>& family) {
    for (const Vector& v : family) {
      flat.segment(pos, v.size()) = v;
      pos += v.size();
    }
  };
  put(state.lambda_a);
  put(state.lambda_b);
  put(state.lambda_c);
  put(state.lambda_d);
  flat.segment(pos, state.kappa.size()) = state.kappa;
  return flat;
}

DualState DualLayout::unflatten(const Eigen::Ref<const Vector>& flat) const {
  if (flat.size() != flat_size_)
    throw Error("dual layout: flat vector has size " + std::to_string(flat.size()) +
                ", expected " + std::to_string(flat_size_));
  DualState state;
  Index pos = 0;
  auto take = [&](std::vector<Vector>& family, const std::vector<Index>& dims) {
    for (Index d : dims) {
      family.push_back(flat.segment(pos, d));
      pos += d;
    }
  };
  take(state.lambda_a, hidden_dims_);
  take(state.lambda_b, hidden_dims_);
  take(state.lambda_c, hidden_dims_);
  take(state.lambda_d, block_dims_);
  state.kappa = flat.segment(pos, flat_size_ - pos);
  return state;
}

double evaluate_lagrangian(const Eigen::Ref<const Vector>& xbar, const DualState& duals,
                           const VerificationInstance& instance, const LayerBounds& bounds) {
  if (!duals.nonnegative()) throw Error("evaluate_lagrangian: negative multiplier");
  const Network& net = instance.network;
  const BlockLayout& layout = net.layout();
  if (xbar.size() != layout.total)
    throw Error("evaluate_lagrangian: point has size " + std::to_string(xbar.size()) +
                ", expected " + std::to_string(layout.total));
  const Normalization norm = Normalization::from_bounds(net, bounds);
  const Vector x = norm.denormalize(xbar);

  const Index layers = net.num_hidden_layers();
  double value = instance.objective.eval(layout.segment(x, layers));
  for (Index i = 0; i < layers; ++i) {
    const size_t k = static_cast<size_t>(i);
    const Vector xi = layout.segment(x, i);
    const Vector xo = layout.segment(x, i + 1);
    const Vector pre = net.layer(i).forward(xi);
    value += duals.lambda_a[k].dot(xo);
    value += duals.lambda_b[k].dot(xo - pre);
    value -= duals.lambda_c[k].dot(xo.cwiseProduct(xo - pre));
  }
  for (Index b = 0; b <= layers; ++b) {
    const Vector xb = layout.segment(x, b);
    const auto& lo = bounds.lower[static_cast<size_t>(b)];
    const auto& hi = bounds.upper[static_cast<size_t>(b)];
    value -= duals.lambda_d[static_cast<size_t>(b)].dot((xb - lo).cwiseProduct(xb - hi));
  }
  return value;
}

QuadCoeffs::QuadCoeffs(const VerificationInstance& instance, const LayerBounds& bounds,
                       const DualState& duals)
    : instance_(&instance),
      norm_(Normalization::from_bounds(instance.network, bounds)),
      lambda_c_(duals.lambda_c),
      lambda_d_(duals.lambda_d),
      n_(instance.network.total_vars()) {
  if (!duals.nonnegative()) throw Error("coeffs: negative multiplier");
  const Network& net = instance.network;
  const BlockLayout& layout = net.layout();
  const Index layers = net.num_hidden_layers();

  // Linear and constant terms in original coordinates.
  Vector g0 = Vector::Zero(n_);
  double c0 = instance.objective.constant();
  layout.segment(g0, layers) += instance.objective.linear();
  for (Index i = 0; i < layers; ++i) {
    const auto& la = duals.lambda_a[static_cast<size_t>(i)];
    const auto& lb = duals.lambda_b[static_cast<size_t>(i)];
    const auto& lc = duals.lambda_c[static_cast<size_t>(i)];
    const Vector bias = net.layer(i).bias_vector();
    layout.segment(g0, i + 1) += la + lb + lc.cwiseProduct(bias);
    layout.segment(g0, i) -= net.layer(i).adjoint(lb);
    c0 -= lb.dot(bias);
  }
  for (Index b = 0; b <= layers; ++b) {
    const auto& ld = duals.lambda_d[static_cast<size_t>(b)];
    const auto& lo = bounds.lower[static_cast<size_t>(b)];
    const auto& hi = bounds.upper[static_cast<size_t>(b)];
    layout.segment(g0, b) += ld.cwiseProduct(lo + hi);
    c0 -= ld.dot(lo.cwiseProduct(hi));
  }

  // Shift to normalized coordinates: g = s .* (g0 + H0 m), c = L(center).
  const Vector h0m = apply_H_original(norm_.center);
  c_ = c0 + g0.dot(norm_.center) + 0.5 * norm_.center.dot(h0m);
  g_ = norm_.half_width.cwiseProduct(g0 + h0m);
}

Vector QuadCoeffs::apply_H_original(const Eigen::Ref<const Vector>& w) const {
  const Network& net = instance_->network;
  const BlockLayout& layout = net.layout();
  const Index layers = net.num_hidden_layers();
  Vector out = Vector::Zero(n_);
  for (Index i = 0; i < layers; ++i) {
    const auto& lc = lambda_c_[static_cast<size_t>(i)];
    const Vector wi = layout.segment(w, i);
    const Vector wo = layout.segment(w, i + 1);
    layout.segment(out, i + 1) += lc.cwiseProduct(net.layer(i).linear(wi)) - 2.0 * lc.cwiseProduct(wo);
    layout.segment(out, i) += net.layer(i).adjoint(lc.cwiseProduct(wo));
  }
  for (Index b = 0; b <= layers; ++b)
    layout.segment(out, b) -= 2.0 * lambda_d_[static_cast<size_t>(b)]
                                        .cwiseProduct(layout.segment(w, b));
  layout.segment(out, layers) +=
      instance_->objective.apply_quadratic(layout.segment(w, layers));
  return out;
}

Vector QuadCoeffs::apply_H(const Eigen::Ref<const Vector>& v) const {
  return norm_.half_width.cwiseProduct(
      apply_H_original(norm_.half_width.cwiseProduct(v)));
}

Vector QuadCoeffs::apply_A(const Eigen::Ref<const Vector>& kappa,
                           const Eigen::Ref<const Vector>& v) const {
  if (kappa.size() != 1 + n_ || v.size() != 1 + n_)
    throw Error("apply_A: operand size mismatch");
  const double v0 = v[0];
  const auto vr = v.tail(n_);
  Vector out(1 + n_);
  out[0] = kappa[0] * v0 - g_.dot(vr);
  out.tail(n_) = kappa.tail(n_).cwiseProduct(vr) - v0 * g_ - apply_H(vr);
  return out;
}

DualState multiplier_gradient(const VerificationInstance& instance, const LayerBounds& bounds,
                              const Eigen::Ref<const Vector>& v, double gamma) {
  const Network& net = instance.network;
  const BlockLayout& layout = net.layout();
  const Index layers = net.num_hidden_layers();
  const Normalization norm = Normalization::from_bounds(net, bounds);
  const Index n = layout.total;
  if (v.size() != 1 + n)
    throw Error("multiplier_gradient: eigenvector has size " + std::to_string(v.size()) +
                ", expected " + std::to_string(1 + n));
  const double v0 = v[0];
  const double v0sq = v0 * v0;

  // Homogenized activations Xh_i = m_i v0 + s_i .* v_i; constraint values at
  // xbar = 0 come from the same expressions with v = (1, 0).
  const Vector xh = v0 * norm.center + norm.half_width.cwiseProduct(v.tail(n));

  DualState grad = DualState::zeros(net);
  auto combine = [&](const Vector& ck, const Vector& qk) -> Vector {
    return ck + gamma * (qk - v0sq * ck);
  };
  for (Index i = 0; i < layers; ++i) {
    const Vector mo = layout.segment(norm.center, i + 1);
    const Vector pre_m = net.layer(i).forward(layout.segment(norm.center, i));
    const Vector xo = layout.segment(xh, i + 1);
    Vector pre_h = net.layer(i).linear(layout.segment(xh, i));
    net.layer(i).add_bias(pre_h, v0);
    grad.lambda_a[static_cast<size_t>(i)] = combine(mo, v0 * xo);
    grad.lambda_b[static_cast<size_t>(i)] = combine(mo - pre_m, v0 * (xo - pre_h));
    grad.lambda_c[static_cast<size_t>(i)] =
        combine(-mo.cwiseProduct(mo - pre_m), -xo.cwiseProduct(xo - pre_h));
  }
  for (Index b = 0; b <= layers; ++b) {
    const auto& lo = bounds.lower[static_cast<size_t>(b)];
    const auto& hi = bounds.upper[static_cast<size_t>(b)];
    const Vector s = layout.segment(norm.half_width, b);
    const Vector xb = layout.segment(xh, b);
    grad.lambda_d[static_cast<size_t>(b)] =
        combine(s.cwiseProduct(s), -(xb - v0 * lo).cwiseProduct(xb - v0 * hi));
  }
  return grad;
}

}  // namespace certikit
