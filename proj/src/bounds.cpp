#include "certikit/bounds.hpp"

#include <sstream>

namespace certikit {

Normalization Normalization::from_bounds(const Network& network, const LayerBounds& bounds) {
  Normalization norm;
  norm.layout = network.layout();
  norm.center.resize(norm.layout.total);
  norm.half_width.resize(norm.layout.total);
  for (Index b = 0; b < norm.layout.blocks(); ++b) {
    const auto& lo = bounds.lower[static_cast<size_t>(b)];
    const auto& hi = bounds.upper[static_cast<size_t>(b)];
    norm.layout.segment(norm.center, b) = 0.5 * (lo + hi);
    norm.layout.segment(norm.half_width, b) = 0.5 * (hi - lo);
  }
  return norm;
}

Vector Normalization::normalize(const Eigen::Ref<const Vector>& x) const {
  Vector xbar = Vector::Zero(x.size());
  for (Index i = 0; i < x.size(); ++i)
    if (half_width[i] > 0.0) xbar[i] = (x[i] - center[i]) / half_width[i];
  return xbar;
}

LayerBounds interval_propagate(const Network& network, const InputBox& box) {
  if (box.dim() != network.input_dim())
    throw Error("interval_propagate: box dimension " + std::to_string(box.dim()) +
                " does not match input_dim " + std::to_string(network.input_dim()));
  LayerBounds bounds;
  bounds.lower.push_back(box.lower);
  bounds.upper.push_back(box.upper);
  for (Index i = 0; i < network.num_hidden_layers(); ++i) {
    const AffineMap& layer = network.layer(i);
    const Vector mid = 0.5 * (bounds.lower.back() + bounds.upper.back());
    const Vector rad = 0.5 * (bounds.upper.back() - bounds.lower.back());
    const Vector pre_mid = layer.forward(mid);
    const Vector pre_rad = layer.abs_linear(rad);
    bounds.pre_lower.push_back(pre_mid - pre_rad);
    bounds.pre_upper.push_back(pre_mid + pre_rad);
    bounds.lower.push_back(bounds.pre_lower.back().cwiseMax(0.0));
    bounds.upper.push_back(bounds.pre_upper.back().cwiseMax(0.0));
  }
  return bounds;
}

void output_interval(const Network& network, const LayerBounds& bounds, Vector& lower,
                     Vector& upper) {
  const AffineMap& readout = network.readout();
  const Vector mid = 0.5 * (bounds.lower.back() + bounds.upper.back());
  const Vector rad = 0.5 * (bounds.upper.back() - bounds.lower.back());
  const Vector out_mid = readout.forward(mid);
  const Vector out_rad = readout.abs_linear(rad);
  lower = out_mid - out_rad;
  upper = out_mid + out_rad;
}

LayerBounds import_bounds(const std::vector<Vector>& lower, const std::vector<Vector>& upper,
                          const Network& network) {
  const size_t want = static_cast<size_t>(network.num_hidden_layers()) + 1;
  if (lower.size() != want || upper.size() != want)
    throw Error("import_bounds: expected " + std::to_string(want) + " block pairs, got " +
                std::to_string(lower.size()) + "/" + std::to_string(upper.size()));
  LayerBounds bounds;
  for (size_t b = 0; b < want; ++b) {
    const Index dim = network.block_dim(static_cast<Index>(b));
    if (lower[b].size() != dim || upper[b].size() != dim) {
      std::ostringstream os;
      os << "import_bounds: block " << b << " has shape " << lower[b].size() << "/"
         << upper[b].size() << ", network expects " << dim;
      throw Error(os.str());
    }
    for (Index j = 0; j < dim; ++j)
      if (lower[b][j] > upper[b][j]) {
        std::ostringstream os;
        os << "import_bounds: lower > upper at block " << b << ", entry " << j << " ("
           << lower[b][j] << " > " << upper[b][j] << ")";
        throw Error(os.str());
      }
    if (b == 0) {
      bounds.lower.push_back(lower[b]);
      bounds.upper.push_back(upper[b]);
    } else {
      bounds.lower.push_back(lower[b].cwiseMax(0.0));
      bounds.upper.push_back(upper[b].cwiseMax(0.0));
    }
  }
  return bounds;
}

double ibp_quadratic_bound(const Eigen::Ref<const Vector>& lower,
                           const Eigen::Ref<const Vector>& upper,
                           const Eigen::Ref<const Vector>& target, double tau) {
  const Vector worst =
      (upper - target).cwiseAbs().cwiseMax((target - lower).cwiseAbs());
  return worst.squaredNorm() - tau;
}

}  // namespace certikit
