#include "eae/simmering.hpp"
#include "eae/blob_io.hpp"

#include <cmath>
#include <iomanip>

namespace eae {

void ThermostatConfig::validate() const {
  if (!(temperature > 0.0)) throw ConfigError("thermostat temperature must be > 0");
  if (!(particle_mass > 0.0)) throw ConfigError("particle mass must be > 0");
  if (!(step_size > 0.0)) throw ConfigError("step size must be > 0");
  if (chain_length < 1) throw ConfigError("chain length must be >= 1");
  if (chain_mass && !(*chain_mass > 0.0)) throw ConfigError("chain mass must be > 0");
  if (velocity_resample_period < 0) throw ConfigError("resample period must be >= 0");
}

double ThermostatConfig::chain_mass_for(Index dof) const {
  if (chain_mass) return *chain_mass;
  const double tau = 100.0 * step_size;
  return static_cast<double>(dof) * temperature * tau * tau;
}

namespace {

void draw_momenta(SamplerState& state, const ThermostatConfig& cfg) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double velocity_sd = std::sqrt(cfg.temperature / cfg.particle_mass);
  for (Index i = 0; i < state.momenta.size(); ++i) {
    state.momenta[i] = cfg.particle_mass * velocity_sd * normal(state.rng);
  }
}

// Force on chain link j given the (already current) twice-kinetic energy.
double chain_force(const SamplerState& s, Index j, double twice_kinetic, double dof, double q,
                   const ThermostatConfig& cfg) {
  if (j == 0) {
    const double g = twice_kinetic - dof * cfg.temperature;
    return cfg.invert_chain_force ? -g : g;
  }
  const double p = s.chain_momenta[j - 1];
  return p * p / q - cfg.temperature;
}

// Propagates the chain and rescales momenta over an interval h.
void chain_half_step(SamplerState& s, double h, const ThermostatConfig& cfg) {
  const Index links = s.chain_momenta.size();
  const Index n = s.momenta.size();
  if (n == 0) return;
  const double dof = static_cast<double>(n);
  const double q = cfg.chain_mass_for(n);
  double k2 = s.momenta.squaredNorm() / cfg.particle_mass;
  auto& p = s.chain_momenta;

  // Outer link down to the first.
  p[links - 1] += 0.5 * h * chain_force(s, links - 1, k2, dof, q, cfg);
  for (Index j = links - 2; j >= 0; --j) {
    const double damp = std::exp(-0.25 * h * p[j + 1] / q);
    p[j] *= damp;
    p[j] += 0.5 * h * chain_force(s, j, k2, dof, q, cfg);
    p[j] *= damp;
  }

  const double scale = std::exp(-h * p[0] / q);
  s.momenta *= scale;
  k2 *= scale * scale;
  s.chain_positions += (h / q) * p;

  // First link back up to the outer one.
  for (Index j = 0; j < links - 1; ++j) {
    const double damp = std::exp(-0.25 * h * p[j + 1] / q);
    p[j] *= damp;
    p[j] += 0.5 * h * chain_force(s, j, k2, dof, q, cfg);
    p[j] *= damp;
  }
  p[links - 1] += 0.5 * h * chain_force(s, links - 1, k2, dof, q, cfg);
}

void require_finite_gradient(const VectorXd& g, const SamplerState& s) {
  if (!g.allFinite()) {
    throw NumericError("non-finite gradient at sampler step " + std::to_string(s.step_index),
                       s.step_index);
  }
}

}  // namespace

SamplerState init_state(const VectorXd& initial_positions, const ThermostatConfig& cfg) {
  cfg.validate();
  SamplerState s;
  s.positions = initial_positions;
  s.momenta = VectorXd::Zero(initial_positions.size());
  s.chain_positions = VectorXd::Zero(cfg.chain_length);
  s.chain_momenta = VectorXd::Zero(cfg.chain_length);
  s.rng.seed(cfg.seed);
  if (!cfg.zero_initial_momenta) draw_momenta(s, cfg);
  return s;
}

SamplerState& step(SamplerState& state, const GradientFn& grad_fn, const ThermostatConfig& cfg,
                   const VectorXd* current_gradient) {
  if (!state.positions.allFinite() || !state.momenta.allFinite()) {
    throw NumericError("non-finite sampler state at step " + std::to_string(state.step_index),
                       state.step_index);
  }
  const double dt = cfg.step_size;
  const double inv_mass = 1.0 / cfg.particle_mass;

  chain_half_step(state, 0.5 * dt, cfg);

  if (current_gradient != nullptr) {
    require_finite_gradient(*current_gradient, state);
    state.momenta.noalias() -= (0.5 * dt) * *current_gradient;
  } else {
    const VectorXd g = grad_fn(state.positions);
    require_finite_gradient(g, state);
    state.momenta.noalias() -= (0.5 * dt) * g;
  }
  state.positions.noalias() += (dt * inv_mass) * state.momenta;
  const VectorXd g_new = grad_fn(state.positions);
  require_finite_gradient(g_new, state);
  state.momenta.noalias() -= (0.5 * dt) * g_new;

  chain_half_step(state, 0.5 * dt, cfg);
  ++state.step_index;
  return state;
}

SamplerState& resample_velocities(SamplerState& state, const ThermostatConfig& cfg) {
  draw_momenta(state, cfg);
  return state;
}

double kinetic_temperature(const SamplerState& state, const ThermostatConfig& cfg) {
  if (state.momenta.size() == 0) return 0.0;
  return state.momenta.squaredNorm() / cfg.particle_mass /
         static_cast<double>(state.momenta.size());
}

double extended_energy(const SamplerState& state, double loss, const ThermostatConfig& cfg) {
  const Index n = state.momenta.size();
  const double q = cfg.chain_mass_for(n);
  double e = loss + 0.5 * state.momenta.squaredNorm() / cfg.particle_mass;
  e += 0.5 * state.chain_momenta.squaredNorm() / q;
  if (state.chain_positions.size() > 0) {
    e += static_cast<double>(n) * cfg.temperature * state.chain_positions[0];
    e += cfg.temperature * state.chain_positions.tail(state.chain_positions.size() - 1).sum();
  }
  return e;
}

TrajectoryWriter::TrajectoryWriter(const std::filesystem::path& csv_path,
                                   std::optional<std::filesystem::path> snapshot_path,
                                   int snapshot_stride)
    : stride_(snapshot_stride) {
  if (csv_path.has_parent_path()) std::filesystem::create_directories(csv_path.parent_path());
  csv_.open(csv_path, std::ios::trunc);
  if (!csv_) throw Error("cannot open '" + csv_path.string() + "'");
  csv_ << "step,loss,kinetic_temperature\n" << std::setprecision(17);
  if (snapshot_path && stride_ > 0) snapshot_path_ = *snapshot_path;
}

void TrajectoryWriter::record(const SamplerState& state, double loss,
                              const ThermostatConfig& cfg) {
  csv_ << state.step_index << ',' << loss << ',' << kinetic_temperature(state, cfg) << '\n';
  if (!snapshot_path_.empty() && state.step_index % stride_ == 0) {
    if (snapshots_.cols() != state.positions.size()) {
      snapshots_.resize(0, state.positions.size());
    }
    snapshots_.conservativeResize(snapshot_count_ + 1, Eigen::NoChange);
    snapshots_.row(snapshot_count_++) = state.positions.transpose();
  }
}

void TrajectoryWriter::close() {
  csv_.close();
  if (!snapshot_path_.empty()) {
    io::Blob blob;
    blob.header["format"] = "eae-snapshots";
    blob.header["stride"] = stride_;
    blob.add_block("positions", snapshots_);
    io::write_blob(snapshot_path_, blob);
  }
}

}  // namespace eae
