#include "eae/mlp.hpp"
#include "eae/model.hpp"
#include "test_util.hpp"

#include <doctest.h>

using namespace eae;
using eae::test::random_batch;
using eae::test::random_vector;
using eae::test::rel_err;

namespace {

AutoencoderModel tiny_model(Index ny, Index nz) {
  return {make_mlp({ny, 5, nz}, Activation::elu, Activation::linear),
          make_mlp({nz, 4, ny}, Activation::sigmoid, Activation::linear), nz};
}

VaeModel tiny_vae(Index ny, Index nz) {
  return {make_mlp({ny, 6, 2 * nz}, Activation::elu, Activation::linear),
          make_mlp({nz, 5, ny}, Activation::elu, Activation::linear), nz};
}

// Straight-line loops over the documented layout, no Eigen expressions.
void dense_by_hand(const NetworkSpec& spec, const ParamVector& p, const std::vector<double>& x,
                   std::vector<double>& out) {
  std::vector<double> h = x;
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < spec.layer_widths.size(); ++l) {
    const auto n_in = static_cast<std::size_t>(spec.layer_widths[l]);
    const auto n_out = static_cast<std::size_t>(spec.layer_widths[l + 1]);
    std::vector<double> next(n_out);
    for (std::size_t o = 0; o < n_out; ++o) {
      double a = p(static_cast<Index>(offset + n_in * n_out + o));
      for (std::size_t i = 0; i < n_in; ++i) a += p(static_cast<Index>(offset + o * n_in + i)) * h[i];
      switch (spec.activations[l]) {
        case Activation::linear: next[o] = a; break;
        case Activation::relu: next[o] = a > 0 ? a : 0; break;
        case Activation::elu: next[o] = a > 0 ? a : std::expm1(a); break;
        case Activation::sigmoid: next[o] = 1.0 / (1.0 + std::exp(-a)); break;
      }
    }
    offset += (n_in + 1) * n_out;
    h = std::move(next);
  }
  out = h;
}

template <typename F>
VectorXd central_difference(F f, VectorXd x, double h = 1e-6) {
  VectorXd g(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    const double keep = x(i);
    x(i) = keep + h;
    const double up = f(x);
    x(i) = keep - h;
    const double down = f(x);
    x(i) = keep;
    g(i) = (up - down) / (2 * h);
  }
  return g;
}

double worst_rel(const VectorXd& a, const VectorXd& b) {
  double w = 0.0;
  for (Index i = 0; i < a.size(); ++i) w = std::max(w, rel_err(a(i), b(i), 1e-4));
  return w;
}

}  // namespace

TEST_CASE("reconstruction loss values") {
  BatchXd target(1, 2);
  target << 1, 0;
  CHECK(reconstruction_loss(target, target, LossKind::squared_error) == 0.0);
  BatchXd recon(1, 2);
  recon << 0, 1;
  CHECK(reconstruction_loss(recon, target, LossKind::squared_error) == 1.0);

  // Logit 0 is probability ½: cross-entropy log 2 per pixel, summed over pixels.
  const BatchXd logits = BatchXd::Zero(3, 4);
  const BatchXd bits = (BatchXd(3, 4) << 1, 0, 1, 0, 0, 0, 1, 1, 1, 1, 1, 0).finished();
  CHECK(reconstruction_loss(logits, bits, LossKind::bernoulli_cross_entropy_with_sigmoid) ==
        doctest::Approx(4 * std::log(2.0)).epsilon(1e-14));
  CHECK(to_data_space(logits, LossKind::bernoulli_cross_entropy_with_sigmoid).isConstant(0.5));
  // Large logits stay finite.
  const BatchXd extreme = BatchXd::Constant(1, 2, 800.0);
  CHECK(std::isfinite(reconstruction_loss(extreme, BatchXd::Zero(1, 2),
                                          LossKind::bernoulli_cross_entropy_with_sigmoid)));
}

TEST_CASE("recon loss matches a by-hand evaluation") {
  std::mt19937_64 rng(4);
  const AutoencoderModel m = tiny_model(3, 2);
  const ParamVector enc = random_vector(m.encoder.param_count(), rng);
  const ParamVector dec = random_vector(m.decoder.param_count(), rng);
  const BatchXd y = random_batch(6, 3, rng);
  double total = 0.0;
  for (Index r = 0; r < y.rows(); ++r) {
    std::vector<double> row(y.row(r).data(), y.row(r).data() + 3), z, out;
    dense_by_hand(m.encoder, enc, row, z);
    dense_by_hand(m.decoder, dec, z, out);
    for (std::size_t j = 0; j < out.size(); ++j) total += (out[j] - row[j]) * (out[j] - row[j]);
  }
  const double expected = total / 18.0;
  CHECK(std::abs(recon_loss(m, enc, dec, y, LossKind::squared_error) - expected) <= 1e-12);
}

TEST_CASE("recon loss is nonnegative and zero only at a perfect reconstruction") {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 20; ++i) {
    const BatchXd a = random_batch(4, 3, rng);
    const BatchXd b = random_batch(4, 3, rng);
    CHECK(reconstruction_loss(a, b, LossKind::squared_error) > 0.0);
    CHECK(reconstruction_loss(a, a, LossKind::squared_error) == 0.0);
  }
}

TEST_CASE("reparameterize") {
  const BatchXd mu = (BatchXd(1, 2) << 0.3, -1.0).finished();
  CHECK(reparameterize(mu, BatchXd::Constant(1, 2, 0.7), BatchXd::Zero(1, 2)) == mu);
  const BatchXd eps = (BatchXd(1, 2) << 0.5, 2.0).finished();
  CHECK(reparameterize(mu, BatchXd::Zero(1, 2), eps) == mu + eps);
  const BatchXd three = reparameterize(BatchXd::Zero(1, 1), BatchXd::Constant(1, 1, 2 * std::log(3.0)),
                                       BatchXd::Ones(1, 1));
  CHECK(three(0, 0) == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("KL to the standard normal") {
  CHECK(kl_to_standard_normal(BatchXd::Zero(2, 3), BatchXd::Zero(2, 3)) == 0.0);
  CHECK(kl_to_standard_normal(BatchXd::Ones(1, 1), BatchXd::Zero(1, 1)) == doctest::Approx(0.5));

  std::mt19937_64 rng(12);
  for (int i = 0; i < 50; ++i) {
    CHECK(kl_to_standard_normal(random_batch(3, 2, rng), random_batch(3, 2, rng)) > 0.0);
  }

  SUBCASE("agrees with a Monte-Carlo estimate") {
    const double mu = 0.8, logvar = -0.6;
    const double sigma = std::exp(0.5 * logvar);
    std::normal_distribution<double> n(0.0, 1.0);
    double acc = 0.0;
    const int samples = 1'000'000;
    for (int s = 0; s < samples; ++s) {
      const double e = n(rng);
      const double z = mu + sigma * e;
      // log q(z) − log p(z)
      acc += -0.5 * e * e - std::log(sigma) + 0.5 * z * z;
    }
    const double mc = acc / samples;
    const double exact = kl_to_standard_normal(BatchXd::Constant(1, 1, mu), BatchXd::Constant(1, 1, logvar));
    CHECK(std::abs(mc - exact) <= 0.01 * exact);
  }
}

TEST_CASE("collapsed VAE reduces to its reconstruction term") {
  const VaeModel vae = tiny_vae(3, 2);
  // Zero encoder parameters give μ = 0 and log σ² = 0; the KL term vanishes.
  std::mt19937_64 rng(6);
  const AutoencoderParams params{ParamVector::Zero(vae.encoder.param_count()),
                                 random_vector(vae.decoder.param_count(), rng)};
  const BatchXd y = random_batch(5, 3, rng);
  const ElboTerms t = elbo_loss(vae, params, y, random_batch(5, 2, rng), LossKind::squared_error);
  CHECK(t.kl == 0.0);
  CHECK(t.total() == t.reconstruction);
}

TEST_CASE("loss gradients match finite differences") {
  std::mt19937_64 rng(15);
  for (LossKind kind : {LossKind::squared_error, LossKind::bernoulli_cross_entropy_with_sigmoid}) {
    CAPTURE(to_string(kind));
    const AutoencoderModel m = tiny_model(4, 2);
    const ParamVector enc = random_vector(m.encoder.param_count(), rng, 0.5);
    const ParamVector dec = random_vector(m.decoder.param_count(), rng, 0.5);
    BatchXd y = random_batch(5, 4, rng);
    if (kind != LossKind::squared_error) y = (y.array() > 0).cast<double>();
    const LossGrad g = recon_loss_grad(m, enc, dec, y, kind);
    CHECK(g.value == doctest::Approx(recon_loss(m, enc, dec, y, kind)).epsilon(1e-14));
    CHECK(worst_rel(g.grad_encoder, central_difference([&](const VectorXd& e) {
            return recon_loss(m, e, dec, y, kind);
          }, enc)) <= 1e-5);
    CHECK(worst_rel(g.grad_decoder, central_difference([&](const VectorXd& d) {
            return recon_loss(m, enc, d, y, kind);
          }, dec)) <= 1e-5);

    const VaeModel vae = tiny_vae(4, 2);
    const AutoencoderParams p{random_vector(vae.encoder.param_count(), rng, 0.5),
                              random_vector(vae.decoder.param_count(), rng, 0.5)};
    const BatchXd noise = random_batch(5, 2, rng);
    const LossGrad ge = elbo_loss_grad(vae, p, y, noise, kind);
    CHECK(ge.value == doctest::Approx(elbo_loss(vae, p, y, noise, kind).total()).epsilon(1e-14));
    CHECK(worst_rel(ge.grad_encoder, central_difference([&](const VectorXd& e) {
            return elbo_loss(vae, {e, p.decoder}, y, noise, kind).total();
          }, p.encoder)) <= 1e-5);
    CHECK(worst_rel(ge.grad_decoder, central_difference([&](const VectorXd& d) {
            return elbo_loss(vae, {p.encoder, d}, y, noise, kind).total();
          }, p.decoder)) <= 1e-5);
  }
}

TEST_CASE("model shape invariants") {
  AutoencoderModel ok = tiny_model(4, 2);
  CHECK_NOTHROW(ok.validate());
  AutoencoderModel wrong_latent{make_mlp({4, 3}, Activation::linear, Activation::linear),
                                make_mlp({2, 4}, Activation::linear, Activation::linear), 2};
  CHECK_THROWS_AS(wrong_latent.validate(), DimensionError);
  AutoencoderModel wrong_output{make_mlp({4, 2}, Activation::linear, Activation::linear),
                                make_mlp({2, 5}, Activation::linear, Activation::linear), 2};
  CHECK_THROWS_AS(wrong_output.validate(), DimensionError);
  VaeModel vae_bad{make_mlp({4, 2}, Activation::linear, Activation::linear),
                   make_mlp({2, 4}, Activation::linear, Activation::linear), 2};
  CHECK_THROWS_AS(vae_bad.validate(), DimensionError);
  CHECK(loss_kind_from_string("bce") == LossKind::bernoulli_cross_entropy_with_sigmoid);
  CHECK_THROWS_AS(loss_kind_from_string("hinge"), DomainError);
}
