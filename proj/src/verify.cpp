#include "eae/verify.hpp"
#include "eae/diagnostics.hpp"
#include "eae/mlp.hpp"
#include "eae/training.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <iomanip>
#include <sstream>

namespace eae {

namespace {

CheckResult named_check(std::string name) {
  CheckResult r;
  r.name = std::move(name);
  return r;
}

std::string sci(double v) {
  std::ostringstream os;
  os << std::setprecision(3) << std::scientific << v;
  return os.str();
}

CheckResult failed_check(std::string name, std::string detail) {
  CheckResult r = named_check(std::move(name));
  r.detail = std::move(detail);
  return r;
}

}  // namespace

ThermostatConfig quadratic_well_thermostat(std::uint64_t seed) {
  ThermostatConfig cfg;
  cfg.temperature = 0.1;
  cfg.particle_mass = 1.0;
  cfg.chain_length = 4;
  cfg.step_size = 0.1;
  // Chain time scale of five steps: Q = n·T·τ² with τ = 0.5 and n = 2.
  cfg.chain_mass = 2.0 * cfg.temperature * 0.5 * 0.5;
  cfg.seed = seed;
  return cfg;
}

QuadraticWellRun run_quadratic_well(const ThermostatConfig& cfg, Eigen::Vector2d stiffness,
                                    Index burn_in, Index samples, Index thin, Index window) {
  if (samples < 2 || thin < 1 || window < 1) {
    throw PreconditionError("quadratic well run needs samples >= 2, thin >= 1, window >= 1");
  }
  const GradientFn grad = [&](const VectorXd& phi) -> VectorXd {
    return stiffness.cwiseProduct(phi);
  };
  SamplerState s = init_state(VectorXd::Zero(2), cfg);
  VectorXd g = grad(s.positions);
  const auto advance = [&] {
    step(s, grad, cfg, &g);
    g = grad(s.positions);
  };
  for (Index i = 0; i < burn_in; ++i) advance();

  QuadraticWellRun run;
  Eigen::MatrixXd draws(samples, 2);
  double window_sum = 0.0;
  Index in_window = 0;
  for (Index i = 0; i < samples * thin; ++i) {
    advance();
    window_sum += kinetic_temperature(s, cfg);
    if (++in_window == window) {
      run.window_temperatures.push_back(window_sum / static_cast<double>(window));
      window_sum = 0.0;
      in_window = 0;
    }
    if ((i + 1) % thin == 0) draws.row((i + 1) / thin - 1) = s.positions.transpose();
  }
  const Eigen::MatrixXd centered = draws.rowwise() - draws.colwise().mean();
  run.covariance = centered.transpose() * centered / static_cast<double>(samples - 1);
  run.samples = samples;
  return run;
}

CheckResult check_gibbs_fidelity(const QuadraticWellRun& run, double temperature,
                                 Eigen::Vector2d stiffness, double rel_tol) {
  CheckResult r = named_check("sampler.gibbs_covariance");
  const Eigen::Vector2d expected = temperature * stiffness.cwiseInverse();
  const Eigen::Vector2d diag = run.covariance.diagonal();
  const Eigen::Vector2d rel = ((diag - expected).array() / expected.array()).abs();
  // The target has no off-diagonal term; bound the sample correlation instead.
  const double corr =
      std::abs(run.covariance(0, 1)) / std::sqrt(std::max(diag[0] * diag[1], 1e-300));
  r.passed = diag.allFinite() && rel.maxCoeff() <= rel_tol && corr <= rel_tol;
  r.metrics = {{"covariance", {{run.covariance(0, 0), run.covariance(0, 1)},
                               {run.covariance(1, 0), run.covariance(1, 1)}}},
               {"expected_diagonal", {expected[0], expected[1]}},
               {"max_relative_error", rel.maxCoeff()},
               {"abs_correlation", corr},
               {"tolerance", rel_tol}};
  std::ostringstream d;
  d << "diagonal relative errors " << rel[0] << ", " << rel[1] << "; |corr| " << corr;
  r.detail = d.str();
  return r;
}

CheckResult check_equipartition(const QuadraticWellRun& run, double temperature, double rel_tol) {
  CheckResult r = named_check("sampler.equipartition");
  double worst = 0.0;
  for (double t : run.window_temperatures) {
    worst = std::max(worst, std::isfinite(t) ? std::abs(t / temperature - 1.0) : INFINITY);
  }
  r.passed = !run.window_temperatures.empty() && worst <= rel_tol;
  r.metrics = {{"windows", run.window_temperatures.size()},
               {"max_relative_deviation", worst},
               {"tolerance", rel_tol}};
  r.detail = std::to_string(run.window_temperatures.size()) + " windows, worst deviation " +
             sci(worst);
  return r;
}

namespace {

using LBatch = Batch<long double>;
using LVector = Vector<long double>;

constexpr long double kFdStep = 1e-5L;
constexpr double kErrorFloor = 1e-6;
constexpr double kKinkMargin = 1e-3;

double rel_error(const Eigen::ArrayXd& got, const Eigen::ArrayXd& want) {
  return (got - want).abs().maxCoeff() / std::max(want.abs().maxCoeff(), kErrorFloor);
}

long double weighted_output(const NetworkSpec& spec, const LVector& p, const LBatch& x,
                            const LBatch& u) {
  return forward(spec, p, x).cwiseProduct(u).sum();
}

bool near_kink(const NetworkSpec& spec, const ParamVector& p, const BatchXd& x) {
  const ForwardTrace<double> trace = forward_trace(spec, p, x);
  for (std::size_t l = 0; l < spec.activations.size(); ++l) {
    const Activation a = spec.activations[l];
    if (a != Activation::relu && a != Activation::elu) continue;
    if (trace.preactivations[l].cwiseAbs().minCoeff() < kKinkMargin) return true;
  }
  return false;
}

}  // namespace

CheckResult check_autodiff(std::uint64_t seed, int probes, double rel_tol) {
  CheckResult r = named_check("autodiff.finite_difference");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> layers_dist(1, 3);
  std::uniform_int_distribution<int> width_dist(1, 6);
  std::uniform_int_distribution<int> act_dist(0, 3);
  constexpr std::array<Activation, 4> acts{Activation::linear, Activation::relu, Activation::elu,
                                           Activation::sigmoid};
  double worst_vjp = 0.0;
  double worst_jvp = 0.0;
  int redraws = 0;
  for (int probe = 0; probe < probes; ++probe) {
    NetworkSpec spec;
    ParamVector p;
    BatchXd x;
    do {
      spec = NetworkSpec{};
      const int layers = layers_dist(rng);
      spec.layer_widths.push_back(width_dist(rng));
      for (int l = 0; l < layers; ++l) {
        spec.layer_widths.push_back(width_dist(rng));
        // Cycle the first activation so every kind is probed a quarter of the time.
        spec.activations.push_back(l == 0 ? acts[static_cast<std::size_t>(probe % 4)]
                                          : acts[static_cast<std::size_t>(act_dist(rng))]);
      }
      p.resize(spec.param_count());
      for (Index i = 0; i < p.size(); ++i) p[i] = 0.8 * normal(rng);
      x.resize(3, spec.input_width());
      for (Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
    } while (near_kink(spec, p, x) && ++redraws);

    BatchXd u(x.rows(), spec.output_width());
    for (Index i = 0; i < u.size(); ++i) u.data()[i] = normal(rng);
    BatchXd t(x.rows(), x.cols());
    for (Index i = 0; i < t.size(); ++i) t.data()[i] = normal(rng);

    const VjpResult<double> g = vjp(spec, p, x, u);
    const LVector pl = p.cast<long double>();
    const LBatch xl = x.cast<long double>();
    const LBatch ul = u.cast<long double>();

    Eigen::ArrayXd fd_p(p.size());
    for (Index i = 0; i < p.size(); ++i) {
      LVector up = pl, down = pl;
      up[i] += kFdStep;
      down[i] -= kFdStep;
      fd_p[i] = static_cast<double>((weighted_output(spec, up, xl, ul) -
                                     weighted_output(spec, down, xl, ul)) /
                                    (2 * kFdStep));
    }
    Eigen::ArrayXd fd_x(x.size());
    for (Index i = 0; i < x.size(); ++i) {
      LBatch up = xl, down = xl;
      up.data()[i] += kFdStep;
      down.data()[i] -= kFdStep;
      fd_x[i] = static_cast<double>(
          (weighted_output(spec, pl, up, ul) - weighted_output(spec, pl, down, ul)) / (2 * kFdStep));
    }
    const Eigen::ArrayXd gx = Eigen::Map<const Eigen::ArrayXd>(g.grad_input.data(), g.grad_input.size());
    worst_vjp = std::max({worst_vjp, rel_error(g.grad_params.array(), fd_p), rel_error(gx, fd_x)});

    const BatchXd jv = jvp(spec, p, x, t);
    const LBatch tl = t.cast<long double>();
    const LBatch fd_j = (forward(spec, pl, LBatch(xl + kFdStep * tl)) -
                         forward(spec, pl, LBatch(xl - kFdStep * tl))) /
                        (2 * kFdStep);
    const BatchXd fd_jd = fd_j.cast<double>();
    worst_jvp = std::max(worst_jvp, rel_error(Eigen::Map<const Eigen::ArrayXd>(jv.data(), jv.size()),
                                              Eigen::Map<const Eigen::ArrayXd>(fd_jd.data(), fd_jd.size())));
  }
  r.passed = worst_vjp <= rel_tol && worst_jvp <= rel_tol;
  r.metrics = {{"probes", probes},
               {"kink_redraws", redraws},
               {"max_vjp_relative_error", worst_vjp},
               {"max_jvp_relative_error", worst_jvp},
               {"tolerance", rel_tol}};
  r.detail = "worst VJP " + sci(worst_vjp) + ", worst JVP " + sci(worst_jvp);
  return r;
}

CheckResult check_free_energy_gradient(std::uint64_t seed, double abs_tol, double min_order) {
  CheckResult r = named_check("prop2.free_energy_gradient");
  r.passed = true;
  nlohmann::json per_toy = nlohmann::json::array();
  for (const ToyLoss& toy : random_toy_losses(seed)) {
    const Index fine = 800;
    const FreeEnergyResult fe = free_energy_check(toy, toy.theta0, toy.beta, fine);
    const GridConvergence conv =
        free_energy_convergence(toy, toy.encoder_dim == 1 ? 100 : 50, 4);
    const double order = conv.order.back();
    const bool ok = fe.discrepancy <= abs_tol && order >= min_order;
    r.passed = r.passed && ok;
    per_toy.push_back({{"toy", toy.name},
                       {"discrepancy", fe.discrepancy},
                       {"observed_order", order},
                       {"orders", conv.order},
                       {"passed", ok}});
    if (!ok) r.detail += toy.name + " failed; ";
  }
  r.metrics = {{"toys", per_toy}, {"abs_tolerance", abs_tol}, {"min_order", min_order}};
  if (r.detail.empty()) r.detail = "all toys within tolerance";
  return r;
}

CheckResult check_gaussian_free_energy(double tol) {
  CheckResult r = named_check("prop2.gaussian_closed_form");
  const ToyLoss toy = gaussian_scale_toy();
  const double th = toy.theta0[0];
  const double b = toy.beta;
  const FreeEnergyResult fe = free_energy_check(toy, toy.theta0, b, 800, 1e-4);
  const double f_exact = -std::log(std::sqrt(2.0 * M_PI / (b * th * th))) / b;
  const double g_exact = 1.0 / (b * th);
  const double err_f = std::abs(fe.free_energy - f_exact);
  const double err_g = std::max(std::abs(fe.grad_gibbs[0] - g_exact), std::abs(fe.grad_fd[0] - g_exact));
  const GridConvergence conv = free_energy_convergence(toy, 100, 4);
  r.passed = err_f <= tol && err_g <= tol && conv.order.back() >= 1.9;
  r.metrics = {{"free_energy_error", err_f},
               {"gradient_error", err_g},
               {"observed_order", conv.order.back()},
               {"tolerance", tol}};
  r.detail = "F error " + sci(err_f) + ", gradient error " + sci(err_g);
  return r;
}

CheckResult check_cv_marginals(double tv_tol) {
  CheckResult r = named_check("prop1.cv_marginals");
  r.passed = true;
  nlohmann::json per_toy = nlohmann::json::array();
  for (const CvToy& toy : shipped_cv_toys()) {
    const CvMarginalResult cv = cv_marginal_check(toy);
    const bool ok = cv.total_variation <= tv_tol;
    r.passed = r.passed && ok;
    per_toy.push_back({{"toy", toy.name}, {"total_variation", cv.total_variation}, {"passed", ok}});
    if (!ok) r.detail += toy.name + " failed; ";
  }
  r.metrics = {{"toys", per_toy}, {"tolerance", tv_tol}};
  if (r.detail.empty()) r.detail = "all toys within tolerance";
  return r;
}

CheckResult check_identities(std::uint64_t seed) {
  CheckResult r = named_check("identities.interpolation_and_averaging");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto random_vec = [&](Index n) {
    VectorXd v(n);
    for (Index i = 0; i < n; ++i) v[i] = normal(rng);
    return v;
  };
  const VectorXd z1 = random_vec(8);
  const VectorXd z2 = random_vec(8);
  const bool endpoints = interpolate_codes(z1, z2, 1.0) == z1 && interpolate_codes(z1, z2, 0.0) == z2;

  LatentEnsemble ens(7, BatchXd(5, 3));
  for (auto& m : ens) {
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  }
  std::vector<Index> all(5);
  for (Index i = 0; i < 5; ++i) all[static_cast<std::size_t>(i)] = i;
  const VectorXd two_stage = ensemble_mean_code(ens, all);
  const VectorXd flat = flatten_latents(ens).colwise().mean().transpose();
  const double mean_gap = (two_stage - flat).cwiseAbs().maxCoeff();

  EncoderEnsemble grads;
  const VectorXd g = random_vec(12);
  grads.members = {VectorXd::Zero(1), VectorXd::Zero(1)};
  grads.decoder_gradients = {g, -g};
  const double antisym = decoder_grad_estimate(grads).cwiseAbs().maxCoeff();

  r.passed = endpoints && mean_gap <= 1e-12 && antisym == 0.0;
  r.metrics = {{"endpoints_exact", endpoints},
               {"two_stage_vs_flat_mean", mean_gap},
               {"antisymmetric_gradient_mean", antisym}};
  r.detail = std::string("endpoints ") + (endpoints ? "exact" : "inexact") + ", mean gap " +
             sci(mean_gap) + ", {g,-g} mean " + sci(antisym);
  return r;
}

std::vector<CheckResult> run_verification_suite(const VerifyOptions& opts) {
  std::vector<CheckResult> out;
  const auto guarded = [&](const std::string& name, auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      out.push_back(failed_check(name, std::string("raised: ") + e.what()));
    }
  };

  guarded("sampler.gibbs_covariance", [&] {
    ThermostatConfig cfg = quadratic_well_thermostat(derive_seed(opts.seed, 1));
    cfg.invert_chain_force = opts.invert_chain_force;
    const Eigen::Vector2d a(1.0, 4.0);
    const QuadraticWellRun run = run_quadratic_well(cfg, a, 10'000, 100'000, 10, 10'000);
    out.push_back(check_gibbs_fidelity(run, cfg.temperature, a));
    out.push_back(check_equipartition(run, cfg.temperature));
  });
  if (out.size() == 1) out.push_back(failed_check("sampler.equipartition", "sampler run failed"));
  guarded("autodiff.finite_difference", [&] { out.push_back(check_autodiff(derive_seed(opts.seed, 2))); });
  guarded("prop2.free_energy_gradient",
          [&] { out.push_back(check_free_energy_gradient(derive_seed(opts.seed, 3))); });
  guarded("prop2.gaussian_closed_form", [&] { out.push_back(check_gaussian_free_energy()); });
  guarded("prop1.cv_marginals", [&] { out.push_back(check_cv_marginals()); });
  guarded("identities.interpolation_and_averaging",
          [&] { out.push_back(check_identities(derive_seed(opts.seed, 4))); });
  return out;
}

nlohmann::json summary_json(const std::vector<CheckResult>& results) {
  nlohmann::json checks = nlohmann::json::array();
  bool all = true;
  for (const auto& c : results) {
    all = all && c.passed;
    checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}, {"metrics", c.metrics}});
  }
  return {{"passed", all}, {"checks", checks}};
}

}  // namespace eae
