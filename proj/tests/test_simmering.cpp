#include "eae/blob_io.hpp"
#include "eae/simmering.hpp"
#include "eae/verify.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <fstream>

using namespace eae;

namespace {

ThermostatConfig base_config() {
  ThermostatConfig cfg;
  cfg.temperature = 0.1;
  cfg.particle_mass = 1.0;
  cfg.chain_length = 3;
  cfg.step_size = 0.05;
  cfg.chain_mass = 0.1;
  cfg.seed = 42;
  return cfg;
}

VectorXd zero_force(const VectorXd& phi) { return VectorXd::Zero(phi.size()); }

}  // namespace

TEST_CASE("thermostat config validation") {
  ThermostatConfig cfg = base_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.temperature = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = base_config();
  cfg.particle_mass = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = base_config();
  cfg.chain_length = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = base_config();
  cfg.step_size = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = base_config();
  cfg.chain_mass = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = base_config();
  cfg.chain_mass.reset();
  cfg.step_size = 1e-3;
  // n·T·(100·dt)²
  CHECK(cfg.chain_mass_for(10) == doctest::Approx(10 * 0.1 * 0.01));
}

TEST_CASE("initial momenta follow N(0, m T)") {
  ThermostatConfig cfg;
  cfg.temperature = 1e-4;
  cfg.particle_mass = 1e-6;
  cfg.seed = 3;
  const SamplerState s = init_state(VectorXd::Zero(100'000), cfg);
  // Velocities r/m have variance T/m = 100.
  const VectorXd v = s.momenta / cfg.particle_mass;
  const double var = v.squaredNorm() / static_cast<double>(v.size());
  CHECK(std::abs(var - 100.0) <= 3.0);
  CHECK(s.chain_positions.size() == cfg.chain_length);

  const SamplerState again = init_state(VectorXd::Zero(100'000), cfg);
  CHECK(again.momenta == s.momenta);
}

TEST_CASE("no force and no motion leaves positions fixed") {
  ThermostatConfig cfg = base_config();
  cfg.zero_initial_momenta = true;
  VectorXd phi(3);
  phi << 0.5, -1.0, 2.0;
  SamplerState s = init_state(phi, cfg);
  step(s, zero_force, cfg);
  CHECK(s.positions == phi);
  CHECK(s.step_index == 1);
}

TEST_CASE("a frozen chain gives ballistic motion") {
  ThermostatConfig cfg = base_config();
  cfg.chain_mass = 1e300;
  VectorXd phi(4);
  phi << 0.1, 0.2, 0.3, 0.4;
  SamplerState s = init_state(phi, cfg);
  const VectorXd r = s.momenta;
  step(s, zero_force, cfg);
  const VectorXd expected = phi + cfg.step_size * r / cfg.particle_mass;
  CHECK((s.positions - expected).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("one-dimensional harmonic well samples variance T") {
  ThermostatConfig cfg = base_config();
  SamplerState s = init_state(VectorXd::Zero(1), cfg);
  const auto grad = [](const VectorXd& phi) { return VectorXd(phi); };
  for (int i = 0; i < 10'000; ++i) step(s, grad, cfg);
  double sum_sq = 0.0, kin = 0.0;
  const int samples = 200'000;
  for (int i = 0; i < samples; ++i) {
    step(s, grad, cfg);
    sum_sq += s.positions(0) * s.positions(0);
    kin += kinetic_temperature(s, cfg);
  }
  CHECK(std::abs(sum_sq / samples - 0.1) <= 0.015);
  CHECK(std::abs(kin / samples - 0.1) <= 0.01);
}

TEST_CASE("velocity resampling touches momenta only") {
  ThermostatConfig cfg = base_config();
  VectorXd phi(5);
  phi << 1, 2, 3, 4, 5;
  SamplerState s = init_state(phi, cfg);
  const VectorXd chain = s.chain_momenta;
  resample_velocities(s, cfg);
  CHECK(s.positions == phi);
  CHECK(s.chain_momenta == chain);
  const VectorXd first = s.momenta;
  resample_velocities(s, cfg);
  CHECK(s.momenta != first);
  CHECK(kReferenceResamplePeriod == 5);
}

TEST_CASE("kinetic temperature") {
  ThermostatConfig cfg = base_config();
  cfg.zero_initial_momenta = true;
  SamplerState s = init_state(VectorXd::Zero(4), cfg);
  CHECK(kinetic_temperature(s, cfg) == 0.0);
  cfg.particle_mass = 2.0;
  // Σ r²/m = n·T with every r² = m·T.
  s.momenta = VectorXd::Constant(4, std::sqrt(cfg.particle_mass * cfg.temperature));
  CHECK(kinetic_temperature(s, cfg) == doctest::Approx(cfg.temperature).epsilon(1e-15));
}

TEST_CASE("trajectories are bit-identical under a fixed seed") {
  ThermostatConfig cfg = base_config();
  cfg.velocity_resample_period = 7;
  const auto grad = [](const VectorXd& phi) {
    return VectorXd(phi.array().cube() - phi.array());
  };
  auto run = [&] {
    SamplerState s = init_state(VectorXd::LinSpaced(6, -1.0, 1.0), cfg);
    for (int i = 0; i < 500; ++i) {
      if (i > 0 && i % cfg.velocity_resample_period == 0) resample_velocities(s, cfg);
      step(s, grad, cfg);
    }
    return s;
  };
  const SamplerState a = run();
  const SamplerState b = run();
  CHECK(a.positions == b.positions);
  CHECK(a.momenta == b.momenta);
  CHECK(a.chain_positions == b.chain_positions);
  CHECK(a.chain_momenta == b.chain_momenta);
}

TEST_CASE("a strict minimum is stationary at vanishing temperature") {
  ThermostatConfig cfg;
  cfg.temperature = 1e-12;
  cfg.step_size = 0.01;
  cfg.chain_length = 2;
  cfg.seed = 8;
  VectorXd phi0(3);
  phi0 << 1.0, -2.0, 0.5;
  const auto grad = [&](const VectorXd& phi) { return VectorXd(2.0 * (phi - phi0)); };
  SamplerState s = init_state(phi0, cfg);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    step(s, grad, cfg);
    worst = std::max(worst, (s.positions - phi0).norm());
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("non-finite gradients raise with the step index") {
  ThermostatConfig cfg = base_config();
  SamplerState s = init_state(VectorXd::Zero(2), cfg);
  step(s, zero_force, cfg);
  const auto bad = [](const VectorXd& phi) {
    return VectorXd::Constant(phi.size(), std::numeric_limits<double>::quiet_NaN()).eval();
  };
  try {
    step(s, bad, cfg);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(e.step() == 1);
  }
}

TEST_CASE("extended energy is nearly conserved") {
  ThermostatConfig cfg = base_config();
  cfg.step_size = 0.01;
  SamplerState s = init_state(VectorXd::Constant(3, 0.3), cfg);
  const auto loss = [](const VectorXd& phi) { return 0.5 * phi.squaredNorm(); };
  const auto grad = [](const VectorXd& phi) { return VectorXd(phi); };
  const double e0 = extended_energy(s, loss(s.positions), cfg);
  double drift = 0.0;
  for (int i = 0; i < 5000; ++i) {
    step(s, grad, cfg);
    drift = std::max(drift, std::abs(extended_energy(s, loss(s.positions), cfg) - e0));
  }
  CHECK(drift <= 1e-3 * std::max(1.0, std::abs(e0)));
}

TEST_CASE("trajectory writer logs every step and strided snapshots") {
  const auto dir = eae::test::scratch_dir("trajectory");
  ThermostatConfig cfg = base_config();
  SamplerState s = init_state(VectorXd::Zero(2), cfg);
  TrajectoryWriter w(dir / "traj.csv", dir / "snap.blob", 3);
  for (int i = 0; i < 10; ++i) {
    step(s, zero_force, cfg);
    w.record(s, 0.0, cfg);
  }
  w.close();
  std::ifstream in(dir / "traj.csv");
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 11);
  const io::Blob blob = io::read_blob(dir / "snap.blob");
  CHECK(blob.matrix("positions").rows() == 3);  // steps 3, 6, 9
}

TEST_CASE("quadratic-well fidelity at the acceptance settings") {
  const ThermostatConfig cfg = quadratic_well_thermostat(0);
  const QuadraticWellRun run = run_quadratic_well(cfg, {1.0, 4.0}, 10'000, 100'000, 10, 10'000);
  CHECK(check_gibbs_fidelity(run, cfg.temperature, {1.0, 4.0}).passed);
  CHECK(check_equipartition(run, cfg.temperature).passed);
}
