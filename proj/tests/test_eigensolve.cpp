#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Eigenvalues>

#include <random>

#include "certikit/eigensolve.hpp"
#include "certikit/lagrangian.hpp"
#include "oracles.hpp"

using namespace certikit;

namespace {

LinearOperator matrix_op(const Matrix& A) {
  return LinearOperator{A.rows(),
                        [A](const Eigen::Ref<const Vector>& v) -> Vector { return A * v; }};
}

Matrix random_symmetric(Index dim, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix A(dim, dim);
  for (Index r = 0; r < dim; ++r)
    for (Index c = 0; c < dim; ++c) A(r, c) = scale * gauss(rng);
  return 0.5 * (A + A.transpose());
}

}  // namespace

TEST_CASE("lanczos and dense agree on diag(5,-2,1)") {
  Matrix D = Matrix::Zero(3, 3);
  D.diagonal() << 5.0, -2.0, 1.0;
  const auto op = matrix_op(D);
  const EigenEstimate lz = lanczos_min_eig(op, 10, 1);
  CHECK(lz.value == doctest::Approx(-2.0).epsilon(1e-10));
  CHECK(std::abs(lz.vector[1]) == doctest::Approx(1.0).epsilon(1e-8));
  const EigenEstimate dn = dense_min_eig(op);
  CHECK(dn.value == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(std::abs(dn.vector[1]) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("identity operator") {
  const auto op = matrix_op(Matrix::Identity(6, 6));
  const EigenEstimate lz = lanczos_min_eig(op, 10, 7);
  CHECK(lz.value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(lz.vector.norm() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(lz.converged);
}

TEST_CASE("lanczos matches the dense eigensolver on a dim-200 operator") {
  const Matrix A = random_symmetric(200, 11);
  const auto op = matrix_op(A);
  const EigenEstimate lz = lanczos_min_eig(op, 200, 3);
  const EigenEstimate dn = dense_min_eig(op);
  const double norm2 = std::max(std::abs(dn.value), A.cwiseAbs().rowwise().sum().maxCoeff());
  CHECK(std::abs(lz.value - dn.value) <= 1e-8 * norm2);
}

TEST_CASE("dense eigenvalues match the Jacobi oracle") {
  const Matrix A = random_symmetric(50, 13);
  const Vector via_jacobi = oracle::jacobi_eigenvalues(A);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(A);
  for (Index i = 0; i < A.rows(); ++i)
    CHECK(solver.eigenvalues()[i] == doctest::Approx(via_jacobi[i]).epsilon(1e-10));
  const EigenEstimate dn = dense_min_eig(matrix_op(A));
  CHECK(dn.value == doctest::Approx(via_jacobi[0]).epsilon(1e-10));
}

TEST_CASE("PSD operators have nonnegative minimum eigenvalue estimates") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix B(30, 20);
  for (Index r = 0; r < B.rows(); ++r)
    for (Index c = 0; c < B.cols(); ++c) B(r, c) = gauss(rng);
  const Matrix A = B.transpose() * B;
  CHECK(dense_min_eig(matrix_op(A)).value >= -1e-9);
  CHECK(lanczos_min_eig(matrix_op(A), 60, 19).value >= -1e-9);
}

TEST_CASE("materialize") {
  SUBCASE("diagonal scaling materializes to diag(kappa)") {
    const Vector kappa = (Vector(4) << 1.0, 2.0, 3.0, 4.0).finished();
    LinearOperator op{4, [kappa](const Eigen::Ref<const Vector>& v) -> Vector {
                        return kappa.cwiseProduct(v);
                      }};
    double defect = -1.0;
    const Matrix A = materialize(op, &defect);
    CHECK((A - Matrix(kappa.asDiagonal())).cwiseAbs().maxCoeff() == 0.0);
    CHECK(defect == 0.0);
  }
  SUBCASE("symmetry defect on a seeded suite") {
    for (int trial = 0; trial < 10; ++trial) {
      const Matrix A = random_symmetric(25, 100 + trial);
      double defect = -1.0;
      materialize(matrix_op(A), &defect);
      CHECK(defect <= 1e-9);
    }
  }
}

TEST_CASE("materialized A matches a hand-expanded M on a one-neuron net") {
  // Net: 1 input, hidden W=[2], b=[0], identity readout, objective y, box
  // [-1,1]. IBP gives hidden bounds [0,2], so centers m=(0,1), widths s=(1,1).
  // With lambda_a=0.3, lambda_b=0.7, lambda_c=0.2, lambda_d=(0.4, 0.6):
  //   g = (-1.0, 1.6), H = [[-0.8, 0.4], [0.4, -1.6]], c = 2.8 by hand.
  std::vector<AffineMap> hidden;
  hidden.push_back(AffineMap::dense((Matrix(1, 1) << 2.0).finished(), Vector::Zero(1)));
  const Network net(1, std::move(hidden),
                    AffineMap::dense(Matrix::Identity(1, 1), Vector::Zero(1)));
  const VerificationInstance instance(net, InputBox(-Vector::Ones(1), Vector::Ones(1)),
                                      Objective::linear(Vector::Ones(1)));
  const LayerBounds bounds = interval_propagate(net, instance.box);
  DualState duals = DualState::zeros(net);
  duals.lambda_a[0][0] = 0.3;
  duals.lambda_b[0][0] = 0.7;
  duals.lambda_c[0][0] = 0.2;
  duals.lambda_d[0][0] = 0.4;
  duals.lambda_d[1][0] = 0.6;
  const QuadCoeffs coeffs(instance, bounds, duals);
  const Vector zero_kappa = Vector::Zero(3);
  LinearOperator op{3, [&](const Eigen::Ref<const Vector>& v) -> Vector {
                      return coeffs.apply_A(zero_kappa, v);
                    }};
  Matrix minus_M(3, 3);
  minus_M << 0.0, -1.0, 1.6,  //
      -1.0, -0.8, 0.4,        //
      1.6, 0.4, -1.6;
  minus_M = (-minus_M).eval();  // A = diag(0) - M
  double defect = -1.0;
  const Matrix A = materialize(op, &defect);
  CHECK((A - minus_M).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(defect <= 1e-12);
  CHECK(coeffs.c() == doctest::Approx(2.8).epsilon(1e-12));
}

TEST_CASE("Ritz one-sidedness and residual reporting") {
  for (int trial = 0; trial < 20; ++trial) {
    const Index dim = 20 + 7 * trial;
    const Matrix A = random_symmetric(dim, 200 + trial);
    const auto op = matrix_op(A);
    const EigenEstimate dn = dense_min_eig(op);
    const EigenEstimate lz = lanczos_min_eig(op, 30, 300 + trial);
    CHECK(lz.value >= dn.value - 1e-9);
    CHECK((A * lz.vector - lz.value * lz.vector).norm() <= lz.residual + 1e-12);
    CHECK(lz.vector.norm() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("identical seeds give bit-identical estimates") {
  const Matrix A = random_symmetric(40, 23);
  const auto op = matrix_op(A);
  const EigenEstimate a = lanczos_min_eig(op, 25, 99);
  const EigenEstimate b = lanczos_min_eig(op, 25, 99);
  CHECK(a.value == b.value);
  CHECK((a.vector - b.vector).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.residual == b.residual);
  const EigenEstimate c = lanczos_min_eig(op, 25, 100);
  CHECK(a.value == doctest::Approx(c.value).epsilon(1e-6));  // different path, same answer
}

TEST_CASE("breakdown on invariant subspaces returns a converged pair") {
  // Krylov space exhausts after two steps regardless of start vector.
  Matrix A = Matrix::Zero(5, 5);
  A.diagonal() << 3.0, 3.0, 3.0, 3.0, -1.0;
  const EigenEstimate est = lanczos_min_eig(matrix_op(A), 40, 5);
  CHECK(est.converged);
  CHECK(est.value == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("k larger than the dimension is capped") {
  const Matrix A = random_symmetric(8, 31);
  const EigenEstimate est = lanczos_min_eig(matrix_op(A), 200, 37);
  CHECK(est.iterations <= 8);
  const EigenEstimate dn = dense_min_eig(matrix_op(A));
  CHECK(est.value == doctest::Approx(dn.value).epsilon(1e-10));
}

TEST_CASE("dense cap is enforced with an explicit error") {
  LinearOperator op{100, [](const Eigen::Ref<const Vector>& v) -> Vector { return v; }};
  CHECK_THROWS_WITH_AS(dense_min_eig(op, 50), doctest::Contains("Lanczos-only"), Error);
}
