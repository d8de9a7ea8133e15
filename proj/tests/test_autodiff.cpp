#include "eae/mlp.hpp"
#include "test_util.hpp"

#include <doctest.h>

using namespace eae;
using eae::test::random_batch;
using eae::test::random_vector;
using eae::test::rel_err;

namespace {

NetworkSpec one_layer(Index in, Index out, Activation act) { return make_mlp({in, out}, act, act); }

struct Probe {
  NetworkSpec spec;
  ParamVector params;
  BatchXd x;
};

bool near_kink(const Probe& p) {
  const auto trace = forward_trace(p.spec, p.params, p.x);
  for (std::size_t l = 0; l < trace.preactivations.size(); ++l) {
    const Activation a = p.spec.activations[l];
    if (a != Activation::relu && a != Activation::elu) continue;
    if (trace.preactivations[l].cwiseAbs().minCoeff() < 1e-3) return true;
  }
  return false;
}

// Random net with 1-3 layers, widths up to 16, every activation in play.
Probe random_probe(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> layers(1, 3);
  std::uniform_int_distribution<int> width(1, 16);
  std::uniform_int_distribution<int> act(0, 3);
  for (;;) {
    Probe p;
    const int n = layers(rng);
    p.spec.layer_widths.push_back(width(rng));
    for (int l = 0; l < n; ++l) {
      p.spec.layer_widths.push_back(width(rng));
      p.spec.activations.push_back(static_cast<Activation>(act(rng)));
    }
    p.params = random_vector(p.spec.param_count(), rng, 0.7);
    p.x = random_batch(3, p.spec.input_width(), rng);
    if (!near_kink(p)) return p;
  }
}

Vector<long double> widen(const VectorXd& v) { return v.cast<long double>(); }
Batch<long double> widen(const BatchXd& b) { return b.cast<long double>(); }

}  // namespace

TEST_CASE("forward on hand-built nets") {
  SUBCASE("identity weights, zero bias") {
    const NetworkSpec spec = one_layer(2, 2, Activation::linear);
    ParamVector p(6);
    p << 1, 0, 0, 1, 0, 0;
    BatchXd x(1, 2);
    x << 1, 2;
    CHECK(forward(spec, p, x) == x);
  }
  SUBCASE("zero weights broadcast the bias") {
    const NetworkSpec spec = one_layer(3, 2, Activation::linear);
    ParamVector p = ParamVector::Zero(8);
    p.tail(2) << 0.5, -1.5;
    std::mt19937_64 rng(1);
    const BatchXd y = forward(spec, p, random_batch(4, 3, rng));
    for (Index i = 0; i < 4; ++i) {
      CHECK(y(i, 0) == 0.5);
      CHECK(y(i, 1) == -1.5);
    }
  }
  SUBCASE("relu clips negative preactivations") {
    const NetworkSpec spec = one_layer(2, 2, Activation::relu);
    ParamVector p(6);
    p << 1, 0, 0, 1, 0, 0;
    BatchXd x(1, 2);
    x << -1, 3;
    const BatchXd y = forward(spec, p, x);
    CHECK(y(0, 0) == 0.0);
    CHECK(y(0, 1) == 3.0);
  }
  SUBCASE("elu uses alpha one") {
    const NetworkSpec spec = one_layer(1, 1, Activation::elu);
    ParamVector p(2);
    p << 1, 0;
    BatchXd x(1, 1);
    x << -2.0;
    CHECK(forward(spec, p, x)(0, 0) == doctest::Approx(std::exp(-2.0) - 1.0).epsilon(1e-15));
  }
}

TEST_CASE("vjp on closed-form cases") {
  SUBCASE("f(w) = w x at x = 3") {
    const NetworkSpec spec = one_layer(1, 1, Activation::linear);
    ParamVector p(2);
    p << 0.7, 0.0;
    BatchXd x(1, 1);
    x << 3.0;
    const auto r = vjp(spec, p, x, BatchXd(BatchXd::Ones(1, 1)));
    CHECK(r.grad_params(0) == 3.0);
    CHECK(r.grad_params(1) == 1.0);
  }
  SUBCASE("half squared norm through the identity") {
    const NetworkSpec spec = one_layer(2, 2, Activation::linear);
    ParamVector p(6);
    p << 1, 0, 0, 1, 0, 0;
    BatchXd x(1, 2);
    x << 2, -1;
    const BatchXd y = forward(spec, p, x);
    const auto r = vjp(spec, p, x, y);  // d(½‖y‖²)/dy = y
    CHECK(r.grad_input(0, 0) == 2.0);
    CHECK(r.grad_input(0, 1) == -1.0);
  }
}

TEST_CASE("jvp on closed-form cases") {
  std::mt19937_64 rng(2);
  const NetworkSpec spec = one_layer(3, 2, Activation::linear);
  const ParamVector p = random_vector(spec.param_count(), rng);
  const BatchXd x = random_batch(2, 3, rng);
  const BatchXd v = random_batch(2, 3, rng);
  const auto w = unflatten(spec, p).front().weight;
  const BatchXd expected = v * w.transpose();
  CHECK((jvp(spec, p, x, v) - expected).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(jvp(spec, p, x, BatchXd(BatchXd::Zero(2, 3))).isZero(0.0));
}

TEST_CASE("parameter layout") {
  const NetworkSpec spec = make_mlp({5, 7, 3}, Activation::elu, Activation::linear);
  CHECK(spec.param_count() == (5 + 1) * 7 + (7 + 1) * 3);
  std::mt19937_64 rng(3);
  const ParamVector v = random_vector(spec.param_count(), rng);
  CHECK(flatten(spec, unflatten(spec, v)) == v);

  NetworkSpec bad{{4}, {}};
  CHECK_THROWS_AS(bad.validate(), DimensionError);
  NetworkSpec mismatched{{4, 3, 2}, {Activation::relu}};
  CHECK_THROWS_AS(mismatched.validate(), DimensionError);
  CHECK_THROWS_AS(forward(spec, v, BatchXd(BatchXd::Zero(2, 4))), DimensionError);
}

TEST_CASE("glorot initialisation is seeded and bounded") {
  const NetworkSpec spec = make_mlp({6, 10, 4}, Activation::relu, Activation::linear);
  const ParamVector a = glorot_init(spec, 9);
  CHECK(a == glorot_init(spec, 9));
  CHECK(a != glorot_init(spec, 10));
  for (const auto& slot : param_layout(spec)) {
    const double bound = std::sqrt(6.0 / static_cast<double>(slot.n_in + slot.n_out));
    CHECK(a.segment(slot.weight_offset, slot.n_in * slot.n_out).cwiseAbs().maxCoeff() <= bound);
    CHECK(a.segment(slot.bias_offset, slot.n_out).isZero(0.0));
  }
}

TEST_CASE("vjp and jvp agree with long-double central differences on random nets") {
  std::mt19937_64 rng(20240);
  const long double h = 1e-5L;
  double worst = 0.0;
  for (int probe = 0; probe < 100; ++probe) {
    const Probe p = random_probe(rng);
    const Index out = p.spec.output_width();
    const BatchXd u = random_batch(p.x.rows(), out, rng);
    const auto r = vjp(p.spec, p.params, p.x, u);
    const auto scalar = [&](const Vector<long double>& w, const Batch<long double>& x) {
      return (forward(p.spec, w, x).cwiseProduct(widen(u))).sum();
    };
    for (Index i = 0; i < p.params.size(); ++i) {
      Vector<long double> plus = widen(p.params), minus = widen(p.params);
      plus(i) += h;
      minus(i) -= h;
      const double fd = static_cast<double>((scalar(plus, widen(p.x)) - scalar(minus, widen(p.x))) / (2 * h));
      worst = std::max(worst, rel_err(r.grad_params(i), fd));
    }
    for (Index i = 0; i < p.x.size(); ++i) {
      Batch<long double> plus = widen(p.x), minus = widen(p.x);
      plus.data()[i] += h;
      minus.data()[i] -= h;
      const double fd = static_cast<double>(
          (scalar(widen(p.params), plus) - scalar(widen(p.params), minus)) / (2 * h));
      worst = std::max(worst, rel_err(r.grad_input.data()[i], fd));
    }
    const BatchXd v = random_batch(p.x.rows(), p.x.cols(), rng);
    const BatchXd t = jvp(p.spec, p.params, p.x, v);
    const Batch<long double> fd =
        (forward(p.spec, widen(p.params), Batch<long double>(widen(p.x) + h * widen(v))) -
         forward(p.spec, widen(p.params), Batch<long double>(widen(p.x) - h * widen(v)))) /
        (2 * h);
    for (Index i = 0; i < t.size(); ++i) {
      worst = std::max(worst, rel_err(t.data()[i], static_cast<double>(fd.data()[i])));
    }
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("jvp and vjp are adjoint") {
  std::mt19937_64 rng(77);
  for (int probe = 0; probe < 50; ++probe) {
    const Probe p = random_probe(rng);
    const BatchXd u = random_batch(p.x.rows(), p.spec.output_width(), rng);
    const BatchXd v = random_batch(p.x.rows(), p.x.cols(), rng);
    const double lhs = u.cwiseProduct(jvp(p.spec, p.params, p.x, v)).sum();
    const double rhs = vjp(p.spec, p.params, p.x, u).grad_input.cwiseProduct(v).sum();
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("forward is batch equivariant") {
  std::mt19937_64 rng(5);
  for (int probe = 0; probe < 20; ++probe) {
    const Probe p = random_probe(rng);
    const BatchXd whole = forward(p.spec, p.params, p.x);
    for (Index i = 0; i < p.x.rows(); ++i) {
      const BatchXd row = p.x.row(i);
      // Batched and single-row products may round differently in the last bit.
      const double scale = std::max(1.0, whole.row(i).cwiseAbs().maxCoeff());
      CHECK((forward(p.spec, p.params, row) - whole.row(i)).cwiseAbs().maxCoeff() <= 1e-13 * scale);
    }
  }
}

TEST_CASE("tangent vjp differentiates a loss built from jvp") {
  // s(w, x, v) = Σ a ⊙ f(x) + Σ b ⊙ (J_f v); its gradients come from one reverse sweep.
  std::mt19937_64 rng(31);
  const long double h = 1e-5L;
  for (int probe = 0; probe < 20; ++probe) {
    const Probe p = random_probe(rng);
    const BatchXd v = random_batch(p.x.rows(), p.x.cols(), rng);
    const BatchXd a = random_batch(p.x.rows(), p.spec.output_width(), rng);
    const BatchXd b = random_batch(p.x.rows(), p.spec.output_width(), rng);
    const auto r = tangent_vjp_from_trace(p.spec, p.params, tangent_trace(p.spec, p.params, p.x, v), a, b);
    const auto s = [&](const Vector<long double>& w, const Batch<long double>& x,
                       const Batch<long double>& t) {
      const auto tr = tangent_trace(p.spec, w, x, t);
      return (tr.output.cwiseProduct(widen(a)).sum() + tr.output_tangent.cwiseProduct(widen(b)).sum());
    };
    for (Index i = 0; i < p.params.size(); ++i) {
      Vector<long double> plus = widen(p.params), minus = widen(p.params);
      plus(i) += h;
      minus(i) -= h;
      const double fd = static_cast<double>((s(plus, widen(p.x), widen(v)) - s(minus, widen(p.x), widen(v))) / (2 * h));
      CHECK(rel_err(r.grad_params(i), fd) <= 1e-6);
    }
    for (Index i = 0; i < v.size(); ++i) {
      Batch<long double> plus = widen(v), minus = widen(v);
      plus.data()[i] += h;
      minus.data()[i] -= h;
      const double fd = static_cast<double>((s(widen(p.params), widen(p.x), plus) - s(widen(p.params), widen(p.x), minus)) / (2 * h));
      CHECK(rel_err(r.grad_tangent.data()[i], fd) <= 1e-6);
    }
  }
}
