#include "commands.hpp"
#include "eae/checkpoint.hpp"
#include "eae/config.hpp"
#include "eae/diagnostics.hpp"
#include "eae/mlp.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

using namespace eae;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = EAE_SOURCE_DIR;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

fs::path write_config(const fs::path& dir, const json& j) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

// A small labelled problem that trains in well under a second.
json tiny_gmm_config() {
  return {{"seed", 3},
          {"dataset", {{"kind", "gaussian_mixture"}, {"components", 3}, {"dim", 4}, {"samples", 150}, {"seed", 2}}},
          {"model", {{"latent_dim", 2}, {"encoder_hidden", {8}}, {"decoder_hidden", {8}}}},
          {"trainer", {{"kind", "eae"}, {"ensemble_size", 4}, {"max_outer_iterations", 10}, {"final_samples", 5}}},
          {"thermostat", {{"temperature", 1e-4}, {"step_size", 0.01}}}};
}

cli::CommonArgs common(const fs::path& config, const fs::path& out) {
  cli::CommonArgs a;
  a.config = config;
  a.output = out;
  return a;
}

}  // namespace

TEST_CASE("config resolution") {
  const json r = resolve_config(json::object());
  CHECK(r.at("dataset").at("kind") == "gaussian_mixture");
  CHECK(r.at("diagnostics").at("activity_threshold") == 0.01);
  CHECK(r.at("dynamics").at("lambda2") == 20.0);
  CHECK(r.at("thermostat").at("chain_mass").is_null());
  CHECK(r.at("dataset").at("split") == json::array({0.8, 0.1, 0.1}));
  // Keys for other dataset kinds are not filled in.
  CHECK_FALSE(r.at("dataset").contains("omega"));

  CHECK(resolve_config(r) == r);

  CHECK_THROWS_AS(resolve_config({{"sed", 1}}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"model", {{"latent", 2}}}}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"seed", "one"}}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"seed", -1}}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"model", {{"latent_dim", 2.5}}}}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"trainer", {{"kind", "gan"}}}}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"dataset", {{"split", {0.5, 0.5}}}}}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"dataset", {{"kind", "gaussian_mixture"}, {"omega", 2.0}}}}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"trainer", {{"kind", "vae"}}}, {"dynamics", {{"enabled", true}}}}),
                  ConfigError);
  CHECK_NOTHROW(resolve_config({{"dataset", {{"kind", "oscillator"}, {"omega", 3.0}}}}));
  CHECK_NOTHROW(resolve_config({{"thermostat", {{"chain_mass", 0.5}}}}));

  try {
    resolve_config({{"thermostat", {{"temprature", 1.0}}}});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("temprature") != std::string::npos);
  }
}

TEST_CASE("published schema matches the key table") {
  CHECK(read_json(kSource / "docs" / "config_schema.json") == config_schema());
  const json s = config_schema();
  CHECK(s.at("additionalProperties") == false);
  CHECK(s.at("properties").at("thermostat").at("properties").contains("velocity_resample_period"));
}

TEST_CASE("shipped configs resolve and build") {
  int count = 0;
  for (const auto& entry : fs::directory_iterator(kSource / "configs")) {
    CAPTURE(entry.path().string());
    const json r = resolve_config(load_config_file(entry.path()));
    const Dataset d = build_dataset(r, std::nullopt);
    CHECK(d.rows() > 0);
    CHECK_NOTHROW(build_train_config(r).validate());
    ++count;
  }
  CHECK(count == 5);
}

TEST_CASE("generated datasets are cached by content") {
  const fs::path dir = eae::test::scratch_dir("cache");
  const json r = resolve_config({{"dataset", {{"kind", "linear_toy"}, {"samples", 40}}}});
  const Dataset a = build_dataset(r, dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir / "cache")) files.push_back(e.path());
  REQUIRE(files.size() == 1);
  const Dataset b = build_dataset(r, dir);
  CHECK(b.inputs == a.inputs);

  // Changing only the split reuses the cached file.
  json other = r;
  other["dataset"]["split"] = {0.5, 0.25, 0.25};
  build_dataset(resolve_config(other), dir);
  other["dataset"]["seed"] = 9;
  build_dataset(resolve_config(other), dir);
  std::size_t n = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir / "cache")) ++n;
  CHECK(n == 2);

  CHECK_THROWS_AS(build_dataset(resolve_config({{"dataset", {{"kind", "mnist"}}}}), std::nullopt), ConfigError);
}

TEST_CASE("checkpoint files") {
  const fs::path dir = eae::test::scratch_dir("checkpoint");
  Checkpoint c;
  c.model_kind = "eae";
  c.encoder = make_mlp({4, 3, 2}, Activation::elu, Activation::linear);
  c.decoder = make_mlp({2, 3, 4}, Activation::elu, Activation::linear);
  c.latent_dim = 2;
  c.seed = 77;
  c.outer_iteration = 12;
  std::mt19937_64 rng(1);
  c.params = {eae::test::random_vector(c.encoder.param_count(), rng),
              eae::test::random_vector(c.decoder.param_count(), rng)};
  save_checkpoint(dir / "c.blob", c);
  const Checkpoint back = load_checkpoint(dir / "c.blob");
  CHECK(back.model_kind == "eae");
  CHECK(back.encoder == c.encoder);
  CHECK(back.params.encoder == c.params.encoder);
  CHECK(back.params.decoder == c.params.decoder);
  CHECK(back.outer_iteration == 12);

  std::string bytes = slurp(dir / "c.blob");
  bytes.resize(bytes.size() - 5);
  std::ofstream(dir / "cut.blob", std::ios::binary) << bytes;
  CHECK_THROWS_AS(load_checkpoint(dir / "cut.blob"), FormatError);

  save_ensemble(dir / "e.blob", {c.encoder, {c.params.encoder, c.params.encoder}});
  CHECK(load_ensemble(dir / "e.blob").members.size() == 2);
}

TEST_CASE("train command") {
  const fs::path dir = eae::test::scratch_dir("cli-train");
  cli::CommonArgs missing;
  missing.config = dir / "absent.json";
  missing.output = dir / "x";
  CHECK(cli::guarded([&] { return cli::cmd_train(missing); }) == cli::kConfigError);

  std::ofstream(dir / "broken.json") << "{\"seed\": ";
  missing.config = dir / "broken.json";
  CHECK(cli::guarded([&] { return cli::cmd_train(missing); }) == cli::kConfigError);

  const fs::path cfg = kSource / "configs" / "quadratic-toy.json";
  REQUIRE(cli::cmd_train(common(cfg, dir / "a")) == cli::kOk);
  REQUIRE(cli::cmd_train(common(cfg, dir / "b")) == cli::kOk);
  std::set<std::string> names;
  for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), dir / "a");
    names.insert(rel.string());
    CHECK(fs::file_size(e.path()) > 0);
    if (rel == "timing.json") continue;
    CAPTURE(rel.string());
    // The resolved config records the output directory, which differs by design.
    if (rel == "resolved_config.json") {
      json a = read_json(e.path()), b = read_json(dir / "b" / rel);
      a.erase("output_dir");
      b.erase("output_dir");
      CHECK(a == b);
      continue;
    }
    CHECK(slurp(e.path()) == slurp(dir / "b" / rel));
  }
  for (const char* expected : {"checkpoint.blob", "ensemble.blob", "summary.json", "train_report.csv",
                               "test.blob", "timing.json", "resolved_config.json"}) {
    CHECK(names.count(expected) == 1);
  }
  const json summary = read_json(dir / "a" / "summary.json");
  CHECK(summary.at("trainer") == "eae");
  CHECK(summary.at("test_mse").get<double>() >= 0.0);

  // A different seed changes the trained parameters.
  cli::CommonArgs reseeded = common(cfg, dir / "c");
  reseeded.seed = 2;
  REQUIRE(cli::cmd_train(reseeded) == cli::kOk);
  CHECK(slurp(dir / "a" / "checkpoint.blob") != slurp(dir / "c" / "checkpoint.blob"));
}

TEST_CASE("sample and diagnose commands") {
  const fs::path dir = eae::test::scratch_dir("cli-sample");
  const fs::path cfg = write_config(dir, tiny_gmm_config());
  REQUIRE(cli::cmd_train(common(cfg, dir / "run")) == cli::kOk);
  const Checkpoint ckpt = load_checkpoint(dir / "run" / "checkpoint.blob");
  const EnsembleFile ens = load_ensemble(dir / "run" / "ensemble.blob");
  const Dataset test = load_dataset(dir / "run" / "test.blob");
  REQUIRE(ens.members.size() == 5);

  SUBCASE("sample") {
    cli::SampleArgs s;
    s.common = common(cfg, dir / "sample");
    s.checkpoint = dir / "run" / "checkpoint.blob";
    s.ensemble = dir / "run" / "ensemble.blob";
    s.queries = dir / "run" / "test.blob";
    REQUIRE(cli::cmd_sample(s) == cli::kOk);
    const auto rows = read_csv(dir / "sample" / "latents.csv");
    REQUIRE(rows.size() == 1 + ens.members.size() * static_cast<std::size_t>(test.rows()));
    CHECK(rows[0] == std::vector<std::string>{"member_index", "query_index", "z_1", "z_2"});
    const LatentEnsemble z = eae_sample_latents(ckpt.autoencoder(), ens.members, test.inputs);
    double worst = 0.0;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto m = std::stoul(rows[r][0]);
      const auto q = std::stol(rows[r][1]);
      for (Index k = 0; k < 2; ++k) {
        worst = std::max(worst, std::abs(std::stod(rows[r][2 + static_cast<std::size_t>(k)]) - z[m](q, k)));
      }
    }
    CHECK(worst == 0.0);

    s.rows = 1;
    s.ensemble.reset();
    s.common.output = dir / "sample1";
    REQUIRE(cli::cmd_sample(s) == cli::kOk);
    CHECK(read_csv(dir / "sample1" / "latents.csv").size() == 2);

    // Queries of the wrong width are rejected with the configuration exit code.
    OscillatorOptions o;
    o.samples = 4;
    o.embed_dim = 7;
    save_dataset(dir / "wide.blob", gen_oscillator(o));
    s.queries = dir / "wide.blob";
    CHECK(cli::guarded([&] { return cli::cmd_sample(s); }) == cli::kConfigError);
  }

  SUBCASE("diagnose") {
    cli::DiagnoseArgs d;
    d.common = common(cfg, dir / "diag");
    d.checkpoint = dir / "run" / "checkpoint.blob";
    d.ensemble = dir / "run" / "ensemble.blob";
    d.test = dir / "run" / "test.blob";
    REQUIRE(cli::cmd_diagnose(d) == cli::kOk);
    const auto activity = read_csv(dir / "diag" / "activity.csv");
    CHECK(activity.size() == 3);
    CHECK(activity[0] == std::vector<std::string>{"dim", "variance", "active"});

    const json report = read_json(dir / "diag" / "diagnostics.json");
    CHECK(report.at("test_mse").get<double>() ==
          doctest::Approx(test_mse(ckpt.autoencoder(), ckpt.params, test.inputs, ckpt.loss)).epsilon(1e-15));
    const auto classes = report.at("classes").get<std::vector<int>>();
    const auto interp = read_csv(dir / "diag" / "interpolation.csv");
    CHECK(interp.size() == 1 + 11 * (classes.size() - 1));
    CHECK(interp[0].size() == 3 + 2 + 4);
    CHECK(interp[1][2] == "0");
    CHECK(interp[11][2] == "1");

    // α = 1 lands exactly on the first class's ensemble mean code.
    const LatentEnsemble z = eae_sample_latents(ckpt.autoencoder(), ens.members, test.inputs);
    const VectorXd za = ensemble_mean_code(z, *test.labels, classes[0]);
    CHECK(std::stod(interp[11][3]) == za(0));
    CHECK(fs::exists(dir / "diag" / "class_latents"));
  }
}

TEST_CASE("dynamics command with ground-truth latents") {
  const fs::path dir = eae::test::scratch_dir("cli-dynamics");
  OscillatorOptions o;
  o.samples = 300;
  o.embed_dim = 6;
  save_dataset(dir / "osc.blob", gen_oscillator(o));
  const fs::path cfg = write_config(
      dir, {{"dataset", {{"kind", "oscillator"}}}, {"dynamics", {{"max_degree", 1}, {"sines", false}, {"integration_steps", 50}}}});
  cli::DynamicsArgs a;
  a.common = common(cfg, dir / "out");
  a.test = dir / "osc.blob";
  a.oracle_latents = true;
  REQUIRE(cli::cmd_dynamics(a) == cli::kOk);

  const auto coeffs = read_csv(dir / "out" / "coefficients.csv");
  CHECK(coeffs.size() == 1 + 2);
  const json report = read_json(dir / "out" / "dynamics.json");
  CHECK(report.at("mode") == "oracle");
  CHECK(report.at("significant_count") == 2);
  const json eig = report.at("eigenvalues");
  REQUIRE(eig.size() == 2);
  CHECK(std::abs(eig[0].at("imag").get<double>() + 2.0) <= 1e-8);
  CHECK(std::abs(eig[1].at("imag").get<double>() - 2.0) <= 1e-8);
  CHECK(read_csv(dir / "out" / "trajectory.csv").size() == 1 + 51);

  a.oracle_latents = false;
  CHECK(cli::guarded([&] { return cli::cmd_dynamics(a); }) == cli::kConfigError);

  // On a single orbit z₁³ + z₁z₂² is proportional to z₁, so the cubic library is singular.
  a.oracle_latents = true;
  a.common.config = write_config(dir, {{"dynamics", {{"max_degree", 3}}}});
  CHECK(cli::guarded([&] { return cli::cmd_dynamics(a); }) == cli::kNumericFailure);
}

TEST_CASE("verify command") {
  const fs::path dir = eae::test::scratch_dir("cli-verify");
  cli::VerifyArgs v;
  v.common.output = dir / "ok";
  CHECK(cli::cmd_verify(v) == cli::kOk);
  const json ok = read_json(dir / "ok" / "verify_summary.json");
  CHECK(ok.at("passed") == true);
  std::multiset<std::string> names;
  for (const auto& c : ok.at("checks")) names.insert(c.at("name").get<std::string>());
  for (const auto& n : names) CHECK(names.count(n) == 1);
  for (const char* n : {"sampler.gibbs_covariance", "sampler.equipartition", "autodiff.finite_difference",
                        "prop2.free_energy_gradient", "prop1.cv_marginals",
                        "identities.interpolation_and_averaging"}) {
    CHECK(names.count(n) == 1);
  }

  v.common.output = dir / "fault";
  v.invert_chain_force = true;
  CHECK(cli::cmd_verify(v) == cli::kVerifyFailed);
  const json bad = read_json(dir / "fault" / "verify_summary.json");
  CHECK(bad.at("passed") == false);
  for (const auto& c : bad.at("checks")) {
    const std::string n = c.at("name");
    if (n.rfind("sampler.", 0) == 0) CHECK(c.at("passed") == false);
  }
}
