#include "certikit/model.hpp"

#include <cmath>
#include <sstream>

namespace certikit {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error(msg); }

void check_dim(const char* what, Index got, Index want) {
  if (got != want) {
    std::ostringstream os;
    os << what << ": got dimension " << got << ", expected " << want;
    fail(os.str());
  }
}

}  // namespace

AffineMap AffineMap::dense(Matrix weight, Vector bias) {
  if (weight.rows() != bias.size())
    fail("dense map: weight rows (" + std::to_string(weight.rows()) +
         ") do not match bias size (" + std::to_string(bias.size()) + ")");
  AffineMap map;
  map.kind_ = Kind::Dense;
  map.in_dim_ = weight.cols();
  map.out_dim_ = weight.rows();
  map.weight_ = std::move(weight);
  map.bias_ = std::move(bias);
  return map;
}

AffineMap AffineMap::conv2d(ConvSpec spec, Vector kernel, Vector bias) {
  if (spec.stride_h < 1 || spec.stride_w < 1) fail("conv2d: stride must be >= 1");
  if (spec.pad_h < 0 || spec.pad_w < 0) fail("conv2d: padding must be >= 0");
  if (spec.out_h() < 1 || spec.out_w() < 1) fail("conv2d: kernel larger than padded input");
  const Index want_kernel = spec.out_channels * spec.in_channels * spec.kernel_h * spec.kernel_w;
  check_dim("conv2d kernel", kernel.size(), want_kernel);
  check_dim("conv2d bias", bias.size(), spec.out_channels);
  AffineMap map;
  map.kind_ = Kind::Conv2D;
  map.in_dim_ = spec.in_channels * spec.in_h * spec.in_w;
  map.out_dim_ = spec.out_channels * spec.out_h() * spec.out_w();
  map.kernel_ = std::move(kernel);
  map.bias_ = std::move(bias);
  map.conv_ = spec;
  return map;
}

const Matrix& AffineMap::dense_weight() const {
  if (kind_ != Kind::Dense) fail("dense_weight() called on a conv2d map");
  return weight_;
}

const AffineMap::ConvSpec& AffineMap::conv_spec() const {
  if (kind_ != Kind::Conv2D) fail("conv_spec() called on a dense map");
  return conv_;
}

const Vector& AffineMap::conv_kernel() const {
  if (kind_ != Kind::Conv2D) fail("conv_kernel() called on a dense map");
  return kernel_;
}

namespace {

// Kernel layout [oc][ic][kh][kw]; activations laid out [channel][row][col].
template <bool Abs>
Vector conv_forward(const AffineMap::ConvSpec& c, const Vector& kernel,
                    const Eigen::Ref<const Vector>& x) {
  const Index ho = c.out_h(), wo = c.out_w();
  Vector out = Vector::Zero(c.out_channels * ho * wo);
  for (Index oc = 0; oc < c.out_channels; ++oc) {
    for (Index oh = 0; oh < ho; ++oh) {
      for (Index ow = 0; ow < wo; ++ow) {
        double acc = 0.0;
        for (Index ic = 0; ic < c.in_channels; ++ic) {
          for (Index r = 0; r < c.kernel_h; ++r) {
            const Index ih = oh * c.stride_h - c.pad_h + r;
            if (ih < 0 || ih >= c.in_h) continue;
            for (Index t = 0; t < c.kernel_w; ++t) {
              const Index iw = ow * c.stride_w - c.pad_w + t;
              if (iw < 0 || iw >= c.in_w) continue;
              double k = kernel[((oc * c.in_channels + ic) * c.kernel_h + r) * c.kernel_w + t];
              if constexpr (Abs) k = std::abs(k);
              acc += k * x[(ic * c.in_h + ih) * c.in_w + iw];
            }
          }
        }
        out[(oc * ho + oh) * wo + ow] = acc;
      }
    }
  }
  return out;
}

Vector conv_adjoint(const AffineMap::ConvSpec& c, const Vector& kernel,
                    const Eigen::Ref<const Vector>& y) {
  const Index ho = c.out_h(), wo = c.out_w();
  Vector out = Vector::Zero(c.in_channels * c.in_h * c.in_w);
  for (Index oc = 0; oc < c.out_channels; ++oc) {
    for (Index oh = 0; oh < ho; ++oh) {
      for (Index ow = 0; ow < wo; ++ow) {
        const double v = y[(oc * ho + oh) * wo + ow];
        if (v == 0.0) continue;
        for (Index ic = 0; ic < c.in_channels; ++ic) {
          for (Index r = 0; r < c.kernel_h; ++r) {
            const Index ih = oh * c.stride_h - c.pad_h + r;
            if (ih < 0 || ih >= c.in_h) continue;
            for (Index t = 0; t < c.kernel_w; ++t) {
              const Index iw = ow * c.stride_w - c.pad_w + t;
              if (iw < 0 || iw >= c.in_w) continue;
              out[(ic * c.in_h + ih) * c.in_w + iw] +=
                  kernel[((oc * c.in_channels + ic) * c.kernel_h + r) * c.kernel_w + t] * v;
            }
          }
        }
      }
    }
  }
  return out;
}

}  // namespace

Vector AffineMap::forward(const Eigen::Ref<const Vector>& x) const {
  Vector out = linear(x);
  add_bias(out);
  return out;
}

void AffineMap::add_bias(Vector& out, double scale) const {
  if (kind_ == Kind::Dense) {
    out += scale * bias_;
    return;
  }
  // Conv bias is per output channel, broadcast over spatial positions.
  const Index spatial = conv_.out_h() * conv_.out_w();
  for (Index oc = 0; oc < conv_.out_channels; ++oc)
    out.segment(oc * spatial, spatial).array() += scale * bias_[oc];
}

Vector AffineMap::bias_vector() const {
  Vector out = Vector::Zero(out_dim_);
  add_bias(out);
  return out;
}

Vector AffineMap::linear(const Eigen::Ref<const Vector>& x) const {
  check_dim("affine forward input", x.size(), in_dim_);
  if (kind_ == Kind::Dense) return weight_ * x;
  return conv_forward<false>(conv_, kernel_, x);
}

Vector AffineMap::adjoint(const Eigen::Ref<const Vector>& y) const {
  check_dim("affine adjoint input", y.size(), out_dim_);
  if (kind_ == Kind::Dense) return weight_.transpose() * y;
  return conv_adjoint(conv_, kernel_, y);
}

Vector AffineMap::abs_linear(const Eigen::Ref<const Vector>& x) const {
  check_dim("affine abs input", x.size(), in_dim_);
  if (kind_ == Kind::Dense) return weight_.cwiseAbs() * x;
  return conv_forward<true>(conv_, kernel_, x);
}

Network::Network(Index input_dim, std::vector<AffineMap> hidden, AffineMap readout)
    : input_dim_(input_dim), hidden_(std::move(hidden)), readout_(std::move(readout)) {
  if (input_dim_ <= 0) fail("network: input_dim must be positive");
  Index cur = input_dim_;
  for (size_t i = 0; i < hidden_.size(); ++i) {
    if (hidden_[i].in_dim() != cur) {
      std::ostringstream os;
      os << "network: hidden layer " << i << " expects input " << hidden_[i].in_dim()
         << " but previous block has " << cur;
      fail(os.str());
    }
    cur = hidden_[i].out_dim();
  }
  if (readout_.in_dim() != cur) {
    std::ostringstream os;
    os << "network: readout expects input " << readout_.in_dim()
       << " but last hidden block has " << cur;
    fail(os.str());
  }
  std::vector<Index> sizes;
  sizes.push_back(input_dim_);
  for (const auto& layer : hidden_) sizes.push_back(layer.out_dim());
  layout_ = BlockLayout::from_sizes(sizes);
}

Index Network::block_dim(Index block) const {
  return layout_.size[static_cast<size_t>(block)];
}

Vector ForwardTrace::flattened(const BlockLayout& layout) const {
  Vector x(layout.total);
  for (Index b = 0; b < layout.blocks(); ++b)
    layout.segment(x, b) = blocks[static_cast<size_t>(b)];
  return x;
}

ForwardTrace forward(const Network& network, const Eigen::Ref<const Vector>& x0) {
  if (x0.size() != network.input_dim()) {
    std::ostringstream os;
    os << "forward: input has " << x0.size() << " entries, network expects "
       << network.input_dim();
    fail(os.str());
  }
  ForwardTrace trace;
  trace.blocks.reserve(static_cast<size_t>(network.num_hidden_layers()) + 1);
  trace.blocks.emplace_back(x0);
  for (Index i = 0; i < network.num_hidden_layers(); ++i) {
    Vector pre = network.layer(i).forward(trace.blocks.back());
    trace.blocks.push_back(pre.cwiseMax(0.0));
  }
  trace.output = network.readout().forward(trace.blocks.back());
  return trace;
}

InputBox::InputBox(Vector lo, Vector hi) : lower(std::move(lo)), upper(std::move(hi)) {
  check_dim("input box upper", upper.size(), lower.size());
  for (Index i = 0; i < lower.size(); ++i)
    if (lower[i] > upper[i]) {
      std::ostringstream os;
      os << "input box: lower > upper at coordinate " << i << " (" << lower[i] << " > "
         << upper[i] << ")";
      fail(os.str());
    }
}

double Objective::eval(const Eigen::Ref<const Vector>& y) const {
  double value = constant + q.dot(y);
  if (!is_linear()) value += 0.5 * y.dot(Q * y);
  return value;
}

Vector Objective::grad(const Eigen::Ref<const Vector>& y) const {
  if (is_linear()) return q;
  return Q * y + q;
}

Objective Objective::linear(Vector coeffs, double constant) {
  Objective obj;
  obj.q = std::move(coeffs);
  obj.constant = constant;
  return obj;
}

Objective Objective::quadratic(Matrix Q, Vector q, double constant) {
  check_dim("objective q", q.size(), Q.rows());
  if (Q.rows() != Q.cols() || !Q.isApprox(Q.transpose(), 1e-12))
    fail("objective: Q must be symmetric");
  Objective obj;
  obj.Q = std::move(Q);
  obj.q = std::move(q);
  obj.constant = constant;
  return obj;
}

Objective Objective::squared_distance(const Vector& target, double tau) {
  return quadratic(2.0 * Matrix::Identity(target.size(), target.size()), -2.0 * target,
                   target.squaredNorm() - tau);
}

FoldedObjective::FoldedObjective(const Objective& objective, AffineMap readout)
    : readout_(std::move(readout)), Q_(objective.Q) {
  check_dim("folded objective", objective.q.size(), readout_.out_dim());
  if (!objective.is_linear() && !objective.Q.isApprox(objective.Q.transpose(), 1e-12))
    fail("folded objective: Q must be symmetric");
  const Vector b = readout_.bias_vector();
  // c = 1/2 b^T Q b + q^T b + const;  g = W^T (Q b + q)
  c_ = objective.constant + objective.q.dot(b);
  Vector gy = objective.q;
  if (!objective.is_linear()) {
    c_ += 0.5 * b.dot(Q_ * b);
    gy += Q_ * b;
  }
  g_ = readout_.adjoint(gy);
}

Vector FoldedObjective::apply_quadratic(const Eigen::Ref<const Vector>& v) const {
  if (Q_.size() == 0) return Vector::Zero(dim());
  return readout_.adjoint(Q_ * readout_.linear(v));
}

Matrix FoldedObjective::materialize_quadratic() const {
  const Index n = dim();
  Matrix H = Matrix::Zero(n, n);
  if (Q_.size() == 0) return H;
  Vector e = Vector::Zero(n);
  for (Index j = 0; j < n; ++j) {
    e[j] = 1.0;
    H.col(j) = apply_quadratic(e);
    e[j] = 0.0;
  }
  return 0.5 * (H + H.transpose());
}

double FoldedObjective::eval(const Eigen::Ref<const Vector>& x_last) const {
  double value = c_ + g_.dot(x_last);
  if (Q_.size() != 0) value += 0.5 * x_last.dot(apply_quadratic(x_last));
  return value;
}

Vector FoldedObjective::grad(const Eigen::Ref<const Vector>& x_last) const {
  Vector g = g_;
  if (Q_.size() != 0) g += apply_quadratic(x_last);
  return g;
}

VerificationInstance::VerificationInstance(Network net, InputBox input_box,
                                           Objective objective_over_output,
                                           std::string instance_id, std::string kind)
    : network(std::move(net)),
      box(std::move(input_box)),
      raw_objective(std::move(objective_over_output)),
      objective(raw_objective, network.readout()),
      id(std::move(instance_id)),
      spec_kind(std::move(kind)) {
  check_dim("instance box", box.dim(), network.input_dim());
  const Index last = network.block_dim(network.num_hidden_layers());
  check_dim("instance folded objective", objective.dim(), last);
}

double VerificationInstance::eval_objective(const Eigen::Ref<const Vector>& x0) const {
  return objective.eval(forward(network, x0).last_block());
}

VerificationInstance make_robustness_instance(const Network& network,
                                              const Eigen::Ref<const Vector>& input,
                                              Index label, Index target, double eps,
                                              bool clip_to_unit, std::string instance_id) {
  const Index classes = network.output_dim();
  if (label < 0 || label >= classes)
    fail("robustness instance: label " + std::to_string(label) + " out of range [0, " +
         std::to_string(classes) + ")");
  if (target < 0 || target >= classes)
    fail("robustness instance: target " + std::to_string(target) + " out of range [0, " +
         std::to_string(classes) + ")");
  if (target == label) fail("robustness instance: target equals true label");
  if (eps <= 0.0) fail("robustness instance: eps must be positive");

  Vector c = Vector::Zero(classes);
  c[target] = 1.0;
  c[label] = -1.0;

  Vector lo = input.array() - eps;
  Vector hi = input.array() + eps;
  if (clip_to_unit) {
    lo = lo.cwiseMax(0.0).cwiseMin(1.0);
    hi = hi.cwiseMax(0.0).cwiseMin(1.0);
  }
  return VerificationInstance(network, InputBox(std::move(lo), std::move(hi)),
                              Objective::linear(std::move(c)), std::move(instance_id),
                              "robustness");
}

VerificationInstance make_latent_instance(const Network& decoder,
                                          const Eigen::Ref<const Vector>& target,
                                          const Eigen::Ref<const Vector>& latent_center,
                                          const Eigen::Ref<const Vector>& latent_scale,
                                          double radius, double tau, std::string instance_id) {
  check_dim("latent instance target", target.size(), decoder.output_dim());
  check_dim("latent instance center", latent_center.size(), decoder.input_dim());
  check_dim("latent instance scale", latent_scale.size(), decoder.input_dim());
  if (radius <= 0.0) fail("latent instance: radius must be positive");
  if ((latent_scale.array() <= 0.0).any()) fail("latent instance: scale must be positive");

  Vector lo = latent_center - radius * latent_scale;
  Vector hi = latent_center + radius * latent_scale;
  return VerificationInstance(decoder, InputBox(std::move(lo), std::move(hi)),
                              Objective::squared_distance(target, tau), std::move(instance_id),
                              "latent");
}

}  // namespace certikit
