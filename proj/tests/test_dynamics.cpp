#include "eae/dynamics.hpp"
#include "eae/mlp.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <numbers>

using namespace eae;
using eae::test::random_batch;
using eae::test::random_vector;
using eae::test::rel_err;

namespace {

const BasisLibrary& default_library() {
  static const BasisLibrary lib = BasisLibrary::polynomial_sine(2);
  return lib;
}

// ż₁ = ω z₂, ż₂ = −ω z₁ in the default library.
CoefficientMatrix rotation(double omega) {
  CoefficientMatrix xi = CoefficientMatrix::Zero(default_library().size(), 2);
  xi(1, 0) = omega;
  xi(0, 1) = -omega;
  return xi;
}

// Points on five concentric orbits; a single circle would make z₁³ + z₁z₂²
// collinear with z₁.
LatentTrajectory rotation_samples(double omega) {
  const BasisLibrary& lib = default_library();
  const CoefficientMatrix xi = rotation(omega);
  BatchXd z(500, 2);
  for (int orbit = 0; orbit < 5; ++orbit) {
    VectorXd z0(2);
    z0 << 0.3 + 0.25 * orbit, 0.1 * orbit;
    z.middleRows(orbit * 100, 100) = integrate_latent_ode(lib, xi, z0, 0.02, 99);
  }
  return {z, eval_theta(lib, z) * xi};
}

AutoencoderModel smooth_model(Index ny, Index nz) {
  return {make_mlp({ny, 5, nz}, Activation::sigmoid, Activation::linear),
          make_mlp({nz, 5, ny}, Activation::sigmoid, Activation::linear), nz};
}

std::vector<CoefficientMatrix> scalar_samples(const std::vector<double>& values) {
  std::vector<CoefficientMatrix> out;
  for (double v : values) out.push_back(CoefficientMatrix::Constant(1, 1, v));
  return out;
}

}  // namespace

TEST_CASE("default library evaluation") {
  const BasisLibrary& lib = default_library();
  REQUIRE(lib.size() == 11);
  CHECK(lib.names().front() == "z1");

  BatchXd z(3, 2);
  z << 1, 0, 0, 0, 0, std::numbers::pi;
  const BatchXd theta = eval_theta(lib, z);
  Eigen::RowVectorXd expected(11);
  expected << 1, 0, 1, 0, 0, 1, 0, 0, 0, std::sin(1.0), 0;
  CHECK(theta.row(0) == BatchXd(expected));
  CHECK(theta.row(1).isZero(0.0));
  CHECK(std::abs(theta(2, 10)) <= 1e-15);
  CHECK(theta(2, 4) == doctest::Approx(std::numbers::pi * std::numbers::pi));
  CHECK_THROWS_AS(eval_theta(lib, BatchXd(BatchXd::Zero(1, 3))), DimensionError);
}

TEST_CASE("theta vjp matches finite differences") {
  const BasisLibrary& lib = default_library();
  std::mt19937_64 rng(3);
  const BatchXd z = random_batch(4, 2, rng);
  const BatchXd bar = random_batch(4, lib.size(), rng);
  const BatchXd g = theta_vjp(lib, z, bar);
  const double h = 1e-6;
  for (Index i = 0; i < z.size(); ++i) {
    BatchXd up = z, down = z;
    up.data()[i] += h;
    down.data()[i] -= h;
    const double fd = (eval_theta(lib, up).cwiseProduct(bar).sum() -
                       eval_theta(lib, down).cwiseProduct(bar).sum()) / (2 * h);
    CHECK(rel_err(g.data()[i], fd) <= 1e-7);
  }
}

TEST_CASE("estimate_xi on closed-form cases") {
  SUBCASE("orthonormal columns give the projection") {
    // Θ's columns [z₁, z₂] are orthonormal when the samples are the basis vectors.
    const BasisLibrary lib = BasisLibrary::polynomial_sine(2, 1, false);
    const BatchXd z = BatchXd::Identity(2, 2);
    BatchXd zdot(2, 2);
    zdot << 0.5, -1.0, 2.0, 3.0;
    const CoefficientMatrix xi = estimate_xi(lib, z, zdot);
    CHECK((xi - eval_theta(lib, z).transpose() * zdot).cwiseAbs().maxCoeff() <= 1e-14);
  }
  SUBCASE("exact rotation is recovered") {
    const LatentTrajectory t = rotation_samples(2.0);
    const CoefficientMatrix xi = estimate_xi(default_library(), t.z, t.z_dot);
    CHECK((xi - rotation(2.0)).cwiseAbs().maxCoeff() <= 1e-8);
  }
  SUBCASE("duplicating every row leaves the solution unchanged") {
    std::mt19937_64 rng(9);
    const BatchXd z = random_batch(40, 2, rng);
    const BatchXd zdot = random_batch(40, 2, rng);
    BatchXd z2(80, 2), zdot2(80, 2);
    z2 << z, z;
    zdot2 << zdot, zdot;
    const CoefficientMatrix a = estimate_xi(default_library(), z, zdot);
    const CoefficientMatrix b = estimate_xi(default_library(), z2, zdot2);
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-9 * std::max(1.0, a.cwiseAbs().maxCoeff()));
  }
  SUBCASE("degenerate inputs raise") {
    BatchXd line(30, 2);
    line.col(0) = VectorXd::LinSpaced(30, -1, 1);
    line.col(1) = 2.0 * line.col(0);
    CHECK_THROWS_AS(estimate_xi(default_library(), line, line), SingularityError);
    CHECK_THROWS_AS(estimate_xi(default_library(), BatchXd(BatchXd::Ones(5, 2)), BatchXd(BatchXd::Ones(5, 2))),
                    PreconditionError);
  }
}

TEST_CASE("coordinate permutation permutes the coefficients consistently") {
  const BasisLibrary lib = BasisLibrary::polynomial_sine(3, 2, true);
  std::mt19937_64 rng(21);
  const BatchXd z = random_batch(60, 3, rng);
  const BatchXd zdot = random_batch(60, 3, rng);
  const std::vector<Index> perm{2, 0, 1};
  BatchXd zp(60, 3), zdotp(60, 3);
  for (Index k = 0; k < 3; ++k) {
    zp.col(perm[k]) = z.col(k);
    zdotp.col(perm[k]) = zdot.col(k);
  }
  const CoefficientMatrix xi = estimate_xi(lib, z, zdot);
  const CoefficientMatrix xip = estimate_xi(lib, zp, zdotp);
  double worst = 0.0;
  for (Index j = 0; j < lib.size(); ++j) {
    for (Index k = 0; k < 3; ++k) {
      worst = std::max(worst, std::abs(xip(lib.permuted_term(j, perm), perm[k]) - xi(j, k)));
    }
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("predicted time derivative of the reconstruction") {
  std::mt19937_64 rng(5);
  const BasisLibrary& lib = default_library();
  SUBCASE("zero coefficients predict no motion") {
    const AutoencoderModel m = smooth_model(4, 2);
    const AutoencoderParams p{random_vector(m.encoder.param_count(), rng),
                              random_vector(m.decoder.param_count(), rng)};
    const BatchXd x = random_batch(6, 4, rng);
    CHECK(predicted_xdot(m, p, x, lib, CoefficientMatrix::Zero(lib.size(), 2)).isZero(0.0));
  }
  SUBCASE("a linear decoder applies its weights") {
    const AutoencoderModel m{make_mlp({4, 5, 2}, Activation::sigmoid, Activation::linear),
                             make_mlp({2, 4}, Activation::linear, Activation::linear), 2};
    const AutoencoderParams p{random_vector(m.encoder.param_count(), rng),
                              random_vector(m.decoder.param_count(), rng)};
    const BatchXd x = random_batch(6, 4, rng);
    const CoefficientMatrix xi = random_batch(lib.size(), 2, rng);
    const BatchXd z = forward(m.encoder, p.encoder, x);
    const auto w = unflatten(m.decoder, p.decoder).front().weight;
    const BatchXd expected = eval_theta(lib, z) * xi * w.transpose();
    CHECK((predicted_xdot(m, p, x, lib, xi) - expected).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("a random model agrees with finite differences") {
    const AutoencoderModel m = smooth_model(4, 2);
    const AutoencoderParams p{random_vector(m.encoder.param_count(), rng),
                              random_vector(m.decoder.param_count(), rng)};
    const BatchXd x = random_batch(6, 4, rng);
    const CoefficientMatrix xi = random_batch(lib.size(), 2, rng, 0.3);
    const BatchXd z = forward(m.encoder, p.encoder, x);
    const BatchXd v = eval_theta(lib, z) * xi;
    const double h = 1e-6;
    const BatchXd fd = (forward(m.decoder, p.decoder, BatchXd(z + h * v)) -
                        forward(m.decoder, p.decoder, BatchXd(z - h * v))) / (2 * h);
    const BatchXd got = predicted_xdot(m, p, x, lib, xi);
    double worst = 0.0;
    for (Index i = 0; i < got.size(); ++i) worst = std::max(worst, rel_err(got.data()[i], fd.data()[i], 1e-3));
    CHECK(worst <= 1e-6);
  }
}

TEST_CASE("dynamics loss") {
  std::mt19937_64 rng(17);
  const BasisLibrary lib = BasisLibrary::polynomial_sine(2, 2, false);
  const AutoencoderModel m = smooth_model(4, 2);
  const AutoencoderParams p{random_vector(m.encoder.param_count(), rng),
                            random_vector(m.decoder.param_count(), rng)};
  const BatchXd x = random_batch(12, 4, rng);
  const BatchXd xdot = random_batch(12, 4, rng);

  SUBCASE("without the derivative term it is the scaled reconstruction loss") {
    const DynamicsWeights w{2.5, 0.0};
    const double expected = 2.5 * recon_loss(m, p.encoder, p.decoder, x, LossKind::squared_error);
    CHECK(std::abs(dynamics_loss(m, p, x, xdot, lib, w) - expected) <= 1e-12);
  }
  SUBCASE("a realizable linear system has zero loss") {
    // Identity encoder and decoder on data that follows a linear field exactly.
    const BasisLibrary lin = BasisLibrary::polynomial_sine(2, 1, false);
    const AutoencoderModel id{make_mlp({2, 2}, Activation::linear, Activation::linear),
                              make_mlp({2, 2}, Activation::linear, Activation::linear), 2};
    ParamVector eye(6);
    eye << 1, 0, 0, 1, 0, 0;
    CoefficientMatrix a(2, 2);
    a << 0.0, -2.0, 2.0, -0.1;
    const BatchXd z = random_batch(10, 2, rng);
    const BatchXd zdot = z * a;
    CHECK(dynamics_loss(id, {eye, eye}, z, zdot, lin, {}) <= 1e-20);
  }
  SUBCASE("gradients match finite differences") {
    const DynamicsWeights w{1.0, 20.0};
    const LossGrad g = dynamics_loss_grad(m, p, x, xdot, lib, w);
    CHECK(g.value == doctest::Approx(dynamics_loss(m, p, x, xdot, lib, w)).epsilon(1e-12));
    const double h = 1e-6;
    for (Index i = 0; i < p.encoder.size(); ++i) {
      AutoencoderParams up = p, down = p;
      up.encoder(i) += h;
      down.encoder(i) -= h;
      const double fd = (dynamics_loss(m, up, x, xdot, lib, w) - dynamics_loss(m, down, x, xdot, lib, w)) / (2 * h);
      CHECK(rel_err(g.grad_encoder(i), fd, 1e-4) <= 1e-4);
    }
    for (Index i = 0; i < p.decoder.size(); ++i) {
      AutoencoderParams up = p, down = p;
      up.decoder(i) += h;
      down.decoder(i) -= h;
      const double fd = (dynamics_loss(m, up, x, xdot, lib, w) - dynamics_loss(m, down, x, xdot, lib, w)) / (2 * h);
      CHECK(rel_err(g.grad_decoder(i), fd, 1e-4) <= 1e-4);
    }
  }
  SUBCASE("weights are validated") {
    CHECK_THROWS_AS((DynamicsWeights{0.0, 0.0}.validate()), ConfigError);
    CHECK_THROWS_AS((DynamicsWeights{-1.0, 1.0}.validate()), ConfigError);
  }
}

TEST_CASE("coefficient statistics") {
  SUBCASE("identical samples") {
    const CoefficientStats s = coefficient_stats(scalar_samples({0.7, 0.7, 0.7}));
    CHECK(s.mean(0, 0) == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(s.mode(0, 0) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(s.significant(0, 0));
  }
  SUBCASE("the mode follows the heavier cluster") {
    std::vector<double> v(100, -1.0);
    v.insert(v.end(), 300, 3.0);
    const CoefficientStats s = coefficient_stats(scalar_samples(v));
    CHECK(s.mean(0, 0) == doctest::Approx(2.0));
    CHECK(std::abs(s.mode(0, 0) - 3.0) <= 0.05);
  }
  SUBCASE("significance needs both mean and mode above 0.1") {
    CHECK_FALSE(coefficient_stats(scalar_samples({0.05, 0.05})).significant(0, 0));
    CHECK(coefficient_stats(scalar_samples({-0.2, -0.2})).significant(0, 0));
    // Mean 0.2 but most mass sits at 0.
    std::vector<double> v(90, 0.0);
    v.insert(v.end(), 10, 2.0);
    CHECK_FALSE(coefficient_stats(scalar_samples(v)).significant(0, 0));
  }
  CHECK_THROWS_AS(coefficient_stats(scalar_samples({1.0})), PreconditionError);
}

TEST_CASE("pearson correlation") {
  std::mt19937_64 rng(44);
  const Index n = 10'000;
  Eigen::MatrixXd obs(n, 4);
  obs.col(0) = random_vector(n, rng);
  obs.col(1) = -obs.col(0);
  obs.col(2) = random_vector(n, rng);
  obs.col(3).setConstant(1.5);
  const CorrelationReport r = correlation_matrix(obs);
  CHECK(r.rho(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(r.rho(0, 1) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(std::abs(r.rho(0, 2)) < 0.1);
  CHECK(r.zero_variance[3]);
  CHECK(r.rho(3, 0) == 0.0);
  CHECK((r.rho - r.rho.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("coefficient correlation selects masked entries") {
  const BasisLibrary lib = BasisLibrary::polynomial_sine(2, 1, false);
  std::mt19937_64 rng(2);
  std::vector<CoefficientMatrix> samples;
  for (int i = 0; i < 50; ++i) {
    const double a = random_vector(1, rng)(0);
    CoefficientMatrix xi(2, 2);
    xi << 0.0, -2.0 + a, 2.0 - a, 0.0;
    samples.push_back(xi);
  }
  CoefficientMask mask = CoefficientMask::Constant(2, 2, false);
  mask(1, 0) = true;
  mask(0, 1) = true;
  const CorrelationReport r = coefficient_correlation(samples, lib, mask);
  REQUIRE(r.rho.rows() == 2);
  CHECK(r.labels.size() == 2);
  CHECK(r.rho(0, 1) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(coefficient_correlation(samples, lib).rho.rows() == 4);
}

TEST_CASE("latent ODE integration") {
  const BasisLibrary& lib = default_library();
  VectorXd z0(2);
  z0 << 0.6, -0.8;
  SUBCASE("zero field") {
    const BatchXd t = integrate_latent_ode(lib, CoefficientMatrix::Zero(lib.size(), 2), z0, 0.1, 20);
    REQUIRE(t.rows() == 21);
    for (Index i = 0; i < t.rows(); ++i) CHECK(t.row(i) == z0.transpose());
  }
  SUBCASE("rotation conserves the radius") {
    const BatchXd t = integrate_latent_ode(lib, rotation(2.0), z0, 1e-3, 1000);
    CHECK((t.rowwise().norm().array() - 1.0).abs().maxCoeff() <= 1e-6);
  }
  SUBCASE("half a period reverses the state") {
    const Index steps = 1000;
    const double dt = (std::numbers::pi / 2.0) / static_cast<double>(steps);
    const BatchXd t = integrate_latent_ode(lib, rotation(2.0), z0, dt, steps);
    CHECK((t.row(steps).transpose() + z0).norm() <= 1e-4);
  }
  SUBCASE("blow-up is reported with its step") {
    CoefficientMatrix xi = CoefficientMatrix::Zero(lib.size(), 2);
    xi(5, 0) = 1.0;  // ż₁ = z₁³ escapes in finite time
    VectorXd big(2);
    big << 10.0, 0.0;
    try {
      integrate_latent_ode(lib, xi, big, 0.1, 1000);
      FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
      CHECK(e.step() > 0);
    }
  }
  CHECK_THROWS_AS(integrate_latent_ode(lib, rotation(2.0), z0, 0.0, 5), PreconditionError);
}

TEST_CASE("linearization at the origin") {
  const BasisLibrary& lib = default_library();
  CoefficientMatrix xi = rotation(2.0);
  xi(9, 0) = 0.5;   // sin z₁ contributes to ż₁ at first order
  xi(2, 1) = 3.0;   // z₁² does not
  const Eigen::MatrixXd j = linearize_at_origin(lib, xi);
  Eigen::MatrixXd expected(2, 2);
  expected << 0.5, 2.0, -2.0, 0.0;
  CHECK((j - expected).cwiseAbs().maxCoeff() <= 1e-15);

  CoefficientMask mask = CoefficientMask::Constant(lib.size(), 2, true);
  mask(9, 0) = false;
  CHECK(linearize_at_origin(lib, xi, mask)(0, 0) == 0.0);
}
