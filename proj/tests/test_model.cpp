#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "certikit/model.hpp"
#include "oracles.hpp"

using namespace certikit;

namespace {

Network relu_then_identity() {
  std::vector<AffineMap> hidden;
  hidden.push_back(AffineMap::dense((Matrix(1, 1) << 2.0).finished(), Vector::Ones(1)));
  AffineMap readout = AffineMap::dense(Matrix::Identity(1, 1), Vector::Zero(1));
  return Network(1, std::move(hidden), std::move(readout));
}

}  // namespace

TEST_CASE("forward clamps and chains") {
  const Network net = relu_then_identity();
  const ForwardTrace neg = forward(net, Vector::Constant(1, -1.0));
  CHECK(neg.blocks[1][0] == doctest::Approx(0.0));
  CHECK(neg.output[0] == doctest::Approx(0.0));
  const ForwardTrace pos = forward(net, Vector::Constant(1, 1.0));
  CHECK(pos.blocks[1][0] == doctest::Approx(3.0));
  CHECK(pos.output[0] == doctest::Approx(3.0));
}

TEST_CASE("forward matches naive evaluator") {
  const Network net = testgen::random_dense_network(7, {4, 6, 5, 3});
  std::mt19937_64 rng(11);
  // Summation order differs between Eigen's matvec and the plain loops, so
  // agreement is checked at accumulation rounding scale.
  for (int trial = 0; trial < 20; ++trial) {
    const Vector x0 = testgen::random_vector(4, rng);
    const ForwardTrace trace = forward(net, x0);
    const Vector expected = oracle::naive_forward_output(net, x0);
    CHECK((trace.output - expected).cwiseAbs().maxCoeff() < 1e-13);
    const auto blocks = oracle::naive_forward_blocks(net, x0);
    for (size_t b = 0; b < blocks.size(); ++b)
      CHECK((trace.blocks[b] - blocks[b]).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("forward rejects dimension mismatch naming the layer") {
  const Network net = relu_then_identity();
  CHECK_THROWS_WITH_AS(forward(net, Vector::Zero(3)), doctest::Contains("network expects 1"),
                       Error);
  std::vector<AffineMap> bad;
  bad.push_back(AffineMap::dense(Matrix::Identity(2, 2), Vector::Zero(2)));
  bad.push_back(AffineMap::dense(Matrix::Identity(3, 3), Vector::Zero(3)));
  CHECK_THROWS_WITH_AS(
      Network(2, std::move(bad), AffineMap::dense(Matrix::Identity(3, 3), Vector::Zero(3))),
      doctest::Contains("hidden layer 1"), Error);
}

TEST_CASE("adjoint is the exact transpose") {
  std::mt19937_64 rng(3);
  const Network dense_net = testgen::random_dense_network(5, {6, 8, 4});
  const Network conv_net = testgen::random_conv_network(9);
  std::vector<const AffineMap*> maps;
  for (const auto& l : dense_net.hidden()) maps.push_back(&l);
  maps.push_back(&dense_net.readout());
  for (const auto& l : conv_net.hidden()) maps.push_back(&l);
  maps.push_back(&conv_net.readout());
  for (const AffineMap* map : maps) {
    for (int trial = 0; trial < 5; ++trial) {
      const Vector x = testgen::random_vector(map->in_dim(), rng);
      const Vector y = testgen::random_vector(map->out_dim(), rng);
      const double lhs = (map->forward(x) - map->forward(Vector::Zero(map->in_dim()))).dot(y);
      const double rhs = x.dot(map->adjoint(y));
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
    }
  }
}

TEST_CASE("conv2d forward matches densified kernel") {
  for (std::uint64_t seed : {21, 22}) {
    const Network net = seed == 21 ? testgen::random_conv_network(seed)
                                   : testgen::strided_conv_network(seed);
    const AffineMap& conv = net.layer(0);
    const Matrix W = oracle::dense_matrix(conv);
    std::mt19937_64 rng(5 + seed);
    for (int trial = 0; trial < 10; ++trial) {
      const Vector x = testgen::random_vector(conv.in_dim(), rng);
      CHECK((conv.linear(x) - W * x).cwiseAbs().maxCoeff() < 1e-12);
      const Vector y = testgen::random_vector(conv.out_dim(), rng);
      CHECK((conv.adjoint(y) - W.transpose() * y).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((conv.abs_linear(x) - W.cwiseAbs() * x).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((conv.forward(x) - (W * x + oracle::dense_bias(conv))).cwiseAbs().maxCoeff() <
            1e-12);
    }
  }
}

TEST_CASE("fold_readout identity and quadratic expansions") {
  SUBCASE("linear objective through identity readout") {
    AffineMap readout = AffineMap::dense(Matrix::Identity(2, 2), Vector::Zero(2));
    const FoldedObjective folded =
        fold_readout(Objective::linear((Vector(2) << 1.0, -1.0).finished()), readout);
    CHECK(folded.constant() == doctest::Approx(0.0));
    CHECK(folded.linear()[0] == doctest::Approx(1.0));
    CHECK(folded.linear()[1] == doctest::Approx(-1.0));
    CHECK(!folded.has_quadratic());
  }
  SUBCASE("squared distance expands to 2W^TW") {
    const Matrix W = (Matrix(3, 2) << 1.0, 2.0, -1.0, 0.5, 0.0, 1.5).finished();
    const Vector b = (Vector(3) << 0.2, -0.1, 0.4).finished();
    const Vector s = (Vector(3) << 1.0, 0.0, -1.0).finished();
    const double tau = 2.5;
    const FoldedObjective folded(Objective::squared_distance(s, tau), AffineMap::dense(W, b));
    CHECK((folded.materialize_quadratic() - 2.0 * W.transpose() * W).cwiseAbs().maxCoeff() <
          1e-12);
    CHECK((folded.linear() - 2.0 * W.transpose() * (b - s)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(folded.constant() == doctest::Approx((b - s).squaredNorm() - tau));
  }
}

TEST_CASE("fold_readout preserves values on random data") {
  std::mt19937_64 rng(17);
  Matrix W(4, 3);
  for (Index r = 0; r < 4; ++r)
    for (Index c = 0; c < 3; ++c) W(r, c) = testgen::random_vector(1, rng)[0];
  const Vector b = testgen::random_vector(4, rng);
  Matrix Q(4, 4);
  for (Index r = 0; r < 4; ++r)
    for (Index c = 0; c < 4; ++c) Q(r, c) = testgen::random_vector(1, rng)[0];
  Q = (0.5 * (Q + Q.transpose())).eval();
  const Vector q = testgen::random_vector(4, rng);
  const Objective obj = Objective::quadratic(Q, q, 0.7);
  const FoldedObjective folded(obj, AffineMap::dense(W, b));
  for (int trial = 0; trial < 30; ++trial) {
    const Vector x = testgen::random_vector(3, rng);
    const double direct = obj.eval(W * x + b);
    CHECK(folded.eval(x) == doctest::Approx(direct).epsilon(1e-10));
  }
}

TEST_CASE("asymmetric Q is rejected") {
  Matrix Q(2, 2);
  Q << 1.0, 2.0, 0.0, 1.0;
  CHECK_THROWS_AS(Objective::quadratic(Q, Vector::Zero(2), 0.0), Error);
}

TEST_CASE("make_robustness_instance builds the margin objective and box") {
  const Network net = testgen::random_dense_network(23, {2, 4, 3});
  SUBCASE("logit difference coefficients") {
    const auto instance = make_robustness_instance(net, Vector::Zero(2), 0, 2, 0.1, false);
    CHECK(instance.raw_objective.q[0] == doctest::Approx(-1.0));
    CHECK(instance.raw_objective.q[1] == doctest::Approx(0.0));
    CHECK(instance.raw_objective.q[2] == doctest::Approx(1.0));
  }
  SUBCASE("clip flag clamps the box at 0") {
    const Vector x0 = Vector::Constant(2, 0.05);
    const auto clipped = make_robustness_instance(net, x0, 0, 1, 0.1, true);
    CHECK(clipped.box.lower[0] == doctest::Approx(0.0));
    CHECK(clipped.box.upper[0] == doctest::Approx(0.15));
    const auto open = make_robustness_instance(net, x0, 0, 1, 0.1, false);
    CHECK(open.box.lower[0] == doctest::Approx(-0.05));
    CHECK(open.box.upper[0] == doctest::Approx(0.15));
  }
  SUBCASE("label validation") {
    CHECK_THROWS_WITH_AS(make_robustness_instance(net, Vector::Zero(2), 5, 1, 0.1, false),
                         doctest::Contains("out of range"), Error);
    CHECK_THROWS_AS(make_robustness_instance(net, Vector::Zero(2), 1, 1, 0.1, false), Error);
  }
}

TEST_CASE("make_latent_instance box and objective") {
  // 1-D decoder y = 2z with no hidden layers.
  AffineMap readout = AffineMap::dense((Matrix(1, 1) << 2.0).finished(), Vector::Zero(1));
  const Network decoder(1, {}, std::move(readout));
  const auto instance =
      make_latent_instance(decoder, Vector::Zero(1), Vector::Ones(1), Vector::Ones(1), 0.5, 1.0);
  CHECK(instance.box.lower[0] == doctest::Approx(0.5));
  CHECK(instance.box.upper[0] == doctest::Approx(1.5));
  // max over z in [0.5, 1.5] of 4z^2 - 1 = 8 at z = 1.5
  CHECK(instance.eval_objective(Vector::Constant(1, 1.5)) == doctest::Approx(8.0));
  CHECK_THROWS_AS(
      make_latent_instance(decoder, Vector::Zero(2), Vector::Ones(1), Vector::Ones(1), 0.5, 1.0),
      Error);
  CHECK_THROWS_AS(
      make_latent_instance(decoder, Vector::Zero(1), Vector::Ones(1), Vector::Zero(1), 0.5, 1.0),
      Error);
}

TEST_CASE("latent-spec preset threshold") {
  CHECK(kDefaultLatentTau == 40.97);
}

TEST_CASE("identity decoder at vanishing radius is trivially verified") {
  AffineMap readout = AffineMap::dense(Matrix::Identity(2, 2), Vector::Zero(2));
  const Network decoder(2, {}, std::move(readout));
  const Vector mu = (Vector(2) << 0.3, -0.8).finished();
  const double tau = 5.0;
  const auto instance = make_latent_instance(decoder, mu, mu, Vector::Ones(2), 1e-12, tau);
  CHECK(instance.eval_objective(mu) == doctest::Approx(-tau));
}

TEST_CASE("forward pass satisfies the four constraint families") {
  const Network net = testgen::random_dense_network(31, {3, 5, 4, 2});
  const InputBox box(Vector::Constant(3, -0.5), Vector::Constant(3, 0.7));
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector x0 = testgen::random_point_in_box(box, rng);
    const ForwardTrace trace = forward(net, x0);
    for (Index i = 0; i < net.num_hidden_layers(); ++i) {
      const Vector& out = trace.blocks[static_cast<size_t>(i) + 1];
      const Vector pre = net.layer(i).forward(trace.blocks[static_cast<size_t>(i)]);
      CHECK(out.minCoeff() >= 0.0);
      CHECK((out - pre).minCoeff() >= -1e-12);
      CHECK(out.cwiseProduct(out - pre).cwiseAbs().maxCoeff() < 1e-12);
    }
    CHECK(((x0 - box.lower).cwiseProduct(x0 - box.upper)).maxCoeff() <= 0.0);
  }
}
