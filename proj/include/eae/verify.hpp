#ifndef EAE_VERIFY_HPP
#define EAE_VERIFY_HPP

#include "eae/simmering.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace eae {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  nlohmann::json metrics = nlohmann::json::object();
};

/// Thermostat settings used for the quadratic-well fidelity runs.
ThermostatConfig quadratic_well_thermostat(std::uint64_t seed = 0);

struct QuadraticWellRun {
  Eigen::Matrix2d covariance;
  std::vector<double> window_temperatures;  // mean kinetic temperature per window
  Index samples = 0;
};

/// ½φᵀdiag(a₁, a₂)φ sampled after `burn_in` steps; every `thin`-th step is
/// kept until `samples` are collected.
QuadraticWellRun run_quadratic_well(const ThermostatConfig& cfg, Eigen::Vector2d stiffness,
                                    Index burn_in, Index samples, Index thin, Index window);

CheckResult check_gibbs_fidelity(const QuadraticWellRun& run, double temperature,
                                 Eigen::Vector2d stiffness, double rel_tol = 0.15);
CheckResult check_equipartition(const QuadraticWellRun& run, double temperature,
                                double rel_tol = 0.10);

/// VJP and JVP against long-double central differences on random networks.
CheckResult check_autodiff(std::uint64_t seed, int probes = 100, double rel_tol = 1e-6);

/// Gradient identity of the decoder free energy on the random toy family,
/// plus the observed convergence order under grid doubling.
CheckResult check_free_energy_gradient(std::uint64_t seed, double abs_tol = 1e-3,
                                       double min_order = 1.9);

/// Closed-form free energy and gradient of the Gaussian scale toy.
CheckResult check_gaussian_free_energy(double tol = 1e-6);

/// Histogram against restricted-integral marginals on the shipped toys.
CheckResult check_cv_marginals(double tv_tol = 0.05);

/// Interpolation endpoints, two-stage ensemble mean, antisymmetric gradients.
CheckResult check_identities(std::uint64_t seed);

struct VerifyOptions {
  std::uint64_t seed = 0;
  bool invert_chain_force = false;
};

std::vector<CheckResult> run_verification_suite(const VerifyOptions& opts);

/// {"passed": bool, "checks": [{name, passed, detail, metrics}]}
nlohmann::json summary_json(const std::vector<CheckResult>& results);

}  // namespace eae

#endif  // EAE_VERIFY_HPP
