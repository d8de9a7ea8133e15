#ifndef EAE_SIMMERING_HPP
#define EAE_SIMMERING_HPP

// Canonical-ensemble sampling of a parameter vector under a loss, by
// velocity-Verlet dynamics coupled to a Nosé–Hoover chain.
//
// The state lives on the augmented phase space (φ, r, ξ, p_ξ) with
// Hamiltonian L(φ) + ½ rᵀr/m. Each step is the symmetric splitting
//
//   NHC(dt/2) · kick(dt/2) · drift(dt) · kick(dt/2) · NHC(dt/2)
//
// so that, at equilibrium, φ is distributed as exp(-L(φ)/T).

#include "eae/core.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>

namespace eae {

/// Momentum redraw period of the reaction-diffusion runs. Other experiments
/// leave resampling off.
inline constexpr int kReferenceResamplePeriod = 5;

struct ThermostatConfig {
  double temperature = 1e-4;    // loss units per degree of freedom
  double particle_mass = 1.0;   // isotropic mass m
  int chain_length = 1;
  std::optional<double> chain_mass;  // Q; defaults to n·T·(100·dt)²
  double step_size = 1e-3;
  int velocity_resample_period = 0;  // 0 disables resampling
  std::uint64_t seed = 0;
  bool zero_initial_momenta = false;
  /// Flips the sign of the first chain link's force. Only used to check that
  /// the verification suite catches a broken thermostat.
  bool invert_chain_force = false;

  void validate() const;
  double chain_mass_for(Index dof) const;
};

struct SamplerState {
  VectorXd positions;
  VectorXd momenta;
  VectorXd chain_positions;
  VectorXd chain_momenta;
  std::mt19937_64 rng;
  std::int64_t step_index = 0;
};

using GradientFn = std::function<VectorXd(const VectorXd&)>;

SamplerState init_state(const VectorXd& initial_positions, const ThermostatConfig& cfg);

/// Advances one integrator step. `current_gradient`, when given, must be the
/// gradient at the current positions; it saves one evaluation of grad_fn.
/// Throws NumericError (carrying the step index) on a non-finite gradient.
SamplerState& step(SamplerState& state, const GradientFn& grad_fn, const ThermostatConfig& cfg,
                   const VectorXd* current_gradient = nullptr);

/// Redraws momenta from N(0, m·T); positions and the chain are untouched.
SamplerState& resample_velocities(SamplerState& state, const ThermostatConfig& cfg);

/// (Σ r_i²/m) / n.
double kinetic_temperature(const SamplerState& state, const ThermostatConfig& cfg);

/// Conserved quantity of the extended system, for drift monitoring.
double extended_energy(const SamplerState& state, double loss, const ThermostatConfig& cfg);

/// CSV trajectory log (step, loss, kinetic_temperature) with optional binary
/// position snapshots every `snapshot_stride` steps.
class TrajectoryWriter {
 public:
  TrajectoryWriter(const std::filesystem::path& csv_path,
                   std::optional<std::filesystem::path> snapshot_path = std::nullopt,
                   int snapshot_stride = 0);
  void record(const SamplerState& state, double loss, const ThermostatConfig& cfg);
  void close();

 private:
  std::ofstream csv_;
  std::filesystem::path snapshot_path_;
  int stride_ = 0;
  BatchXd snapshots_;
  Index snapshot_count_ = 0;
};

}  // namespace eae

#endif  // EAE_SIMMERING_HPP
