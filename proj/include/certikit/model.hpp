#pragma once

#include <string>
#include <vector>

#include "certikit/types.hpp"

namespace certikit {

/// Affine map y = W x + b, stored either densely or as an implicit 2-D
/// convolution (the kernel is never expanded to a dense matrix here).
class AffineMap {
 public:
  enum class Kind { Dense, Conv2D };

  struct ConvSpec {
    Index out_channels = 0;
    Index in_channels = 0;
    Index kernel_h = 0;
    Index kernel_w = 0;
    Index stride_h = 1, stride_w = 1;
    Index pad_h = 0, pad_w = 0;
    Index in_h = 0, in_w = 0;  // spatial shape of the input (channels = in_channels)

    Index out_h() const { return (in_h + 2 * pad_h - kernel_h) / stride_h + 1; }
    Index out_w() const { return (in_w + 2 * pad_w - kernel_w) / stride_w + 1; }
  };

  static AffineMap dense(Matrix weight, Vector bias);
  static AffineMap conv2d(ConvSpec spec, Vector kernel, Vector bias);

  Kind kind() const { return kind_; }
  Index in_dim() const { return in_dim_; }
  Index out_dim() const { return out_dim_; }
  const Vector& bias() const { return bias_; }

  /// W x + b
  Vector forward(const Eigen::Ref<const Vector>& x) const;
  /// out += scale * b, broadcasting conv biases over spatial positions.
  void add_bias(Vector& out, double scale = 1.0) const;
  /// The bias as a full out_dim vector (conv biases broadcast).
  Vector bias_vector() const;
  /// W x  (no bias)
  Vector linear(const Eigen::Ref<const Vector>& x) const;
  /// W^T y
  Vector adjoint(const Eigen::Ref<const Vector>& y) const;
  /// |W| x  (element-wise absolute weights, no bias); used by interval propagation
  Vector abs_linear(const Eigen::Ref<const Vector>& x) const;

  const Matrix& dense_weight() const;
  const ConvSpec& conv_spec() const;
  const Vector& conv_kernel() const;

 private:
  AffineMap() = default;

  Kind kind_ = Kind::Dense;
  Index in_dim_ = 0;
  Index out_dim_ = 0;
  Matrix weight_;   // Dense only
  Vector kernel_;   // Conv2D only, laid out [oc][ic][kh][kw]
  Vector bias_;
  ConvSpec conv_;
};

/// Feedforward ReLU network: hidden affine maps each followed by an
/// element-wise ReLU, then an affine readout with no activation.
class Network {
 public:
  Network(Index input_dim, std::vector<AffineMap> hidden, AffineMap readout);

  Index input_dim() const { return input_dim_; }
  Index num_hidden_layers() const { return static_cast<Index>(hidden_.size()); }
  const std::vector<AffineMap>& hidden() const { return hidden_; }
  const AffineMap& layer(Index i) const { return hidden_[static_cast<size_t>(i)]; }
  const AffineMap& readout() const { return readout_; }
  Index output_dim() const { return readout_.out_dim(); }

  /// Size of activation block i (0 = input, i>=1 = hidden layer i output).
  Index block_dim(Index block) const;
  /// Layout of [input, hidden...] inside the flattened variable vector.
  const BlockLayout& layout() const { return layout_; }
  /// Total variable count N = input_dim + sum of hidden dims.
  Index total_vars() const { return layout_.total; }

 private:
  Index input_dim_;
  std::vector<AffineMap> hidden_;
  AffineMap readout_;
  BlockLayout layout_;
};

struct ForwardTrace {
  std::vector<Vector> blocks;  // x0 .. xL (input + post-ReLU hidden activations)
  Vector output;               // readout output, no activation

  const Vector& last_block() const { return blocks.back(); }
  /// Flattened [x0; x1; ...; xL].
  Vector flattened(const BlockLayout& layout) const;
};

ForwardTrace forward(const Network& network, const Eigen::Ref<const Vector>& x0);

struct InputBox {
  Vector lower;
  Vector upper;

  InputBox(Vector lo, Vector hi);
  Index dim() const { return lower.size(); }
};

/// phi(y) = 1/2 y^T Q y + q^T y + constant over the readout output y.
/// Q has size 0 for linear objectives.
struct Objective {
  Matrix Q;
  Vector q;
  double constant = 0.0;

  bool is_linear() const { return Q.size() == 0; }
  double eval(const Eigen::Ref<const Vector>& y) const;
  Vector grad(const Eigen::Ref<const Vector>& y) const;

  static Objective linear(Vector coeffs, double constant = 0.0);
  static Objective quadratic(Matrix Q, Vector q, double constant = 0.0);
  /// ||target - y||^2 - tau, i.e. Q = 2I, q = -2 target, const = ||target||^2 - tau.
  static Objective squared_distance(const Vector& target, double tau);
};

/// Objective composed with the readout: phi(readout(x)) = c + g^T x + 1/2 x^T H x
/// over the last hidden block x (or the input when there are no hidden layers).
/// H = W^T Q W stays implicit; Conv2D readouts are never densified here.
class FoldedObjective {
 public:
  FoldedObjective(const Objective& objective, AffineMap readout);

  Index dim() const { return readout_.in_dim(); }
  double constant() const { return c_; }
  const Vector& linear() const { return g_; }
  bool has_quadratic() const { return Q_.size() != 0; }

  /// H v = W^T (Q (W v)); zero for linear objectives.
  Vector apply_quadratic(const Eigen::Ref<const Vector>& v) const;
  /// Dense H over the last block (used for Gershgorin init and oracles only).
  Matrix materialize_quadratic() const;

  double eval(const Eigen::Ref<const Vector>& x_last) const;
  Vector grad(const Eigen::Ref<const Vector>& x_last) const;

  const AffineMap& readout() const { return readout_; }

 private:
  AffineMap readout_;
  Matrix Q_;  // original objective Q (size 0 when linear)
  double c_ = 0.0;
  Vector g_;
};

/// Compose an objective with the readout map; see FoldedObjective.
inline FoldedObjective fold_readout(const Objective& objective, const AffineMap& readout) {
  return FoldedObjective(objective, readout);
}

struct VerificationInstance {
  Network network;
  InputBox box;
  Objective raw_objective;    // over the readout output
  FoldedObjective objective;  // raw objective folded through the readout
  std::string id;
  std::string spec_kind;  // "robustness", "latent", or "custom"

  VerificationInstance(Network net, InputBox input_box, Objective objective_over_output,
                       std::string instance_id = "", std::string kind = "custom");

  Index total_vars() const { return network.total_vars(); }
  /// phi evaluated through an exact forward pass from x0.
  double eval_objective(const Eigen::Ref<const Vector>& x0) const;
};

VerificationInstance make_robustness_instance(const Network& network,
                                              const Eigen::Ref<const Vector>& input,
                                              Index label, Index target, double eps,
                                              bool clip_to_unit,
                                              std::string instance_id = "");

VerificationInstance make_latent_instance(const Network& decoder,
                                          const Eigen::Ref<const Vector>& target,
                                          const Eigen::Ref<const Vector>& latent_center,
                                          const Eigen::Ref<const Vector>& latent_scale,
                                          double radius, double tau,
                                          std::string instance_id = "");

/// Default reconstruction-error threshold for the latent-spec preset.
inline constexpr double kDefaultLatentTau = 40.97;

}  // namespace certikit
