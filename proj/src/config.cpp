#include "eae/config.hpp"

#include <fstream>
#include <set>

namespace eae {

using nlohmann::json;

namespace {

ConfigKey key(std::string section, std::string name, std::string type, json def,
              std::string description, std::vector<std::string> choices = {},
              std::vector<std::string> kinds = {}) {
  return {std::move(section), std::move(name), std::move(type), std::move(def),
          std::move(description), std::move(choices), std::move(kinds)};
}

const std::vector<std::string> kDatasetKinds{"gaussian_mixture", "oscillator", "lambda_omega",
                                             "mnist", "linear_toy"};
const std::vector<std::string> kSections{"dataset", "model", "trainer", "thermostat",
                                         "diagnostics", "dynamics"};

std::vector<ConfigKey> make_keys() {
  const std::vector<std::string> gmm{"gaussian_mixture"};
  const std::vector<std::string> osc{"oscillator"};
  const std::vector<std::string> lo{"lambda_omega"};
  const std::vector<std::string> mnist{"mnist"};
  const std::vector<std::string> lin{"linear_toy"};
  return {
      key("", "seed", "integer", 0, "Run seed; --seed overrides it"),
      key("", "output_dir", "string", "eae-output", "Directory for every output; --output overrides it"),
      key("", "description", "string", "", "Free-form note, copied to the resolved config"),

      key("dataset", "kind", "string", "gaussian_mixture", "Data source", kDatasetKinds),
      key("dataset", "seed", "integer", 0, "Generator seed, independent of the run seed"),
      key("dataset", "split", "number_array", json::array({0.8, 0.1, 0.1}),
          "Train, validation and test fractions"),
      key("dataset", "split_mode", "string", "random",
          "random, or temporal to hold out the last rows as test", {"random", "temporal"}),
      key("dataset", "samples", "integer", 2000, "Number of generated rows", {},
          {"gaussian_mixture", "oscillator", "linear_toy"}),
      key("dataset", "components", "integer", 10, "Mixture components", {}, gmm),
      key("dataset", "dim", "integer", 32, "Ambient dimension", {}, {"gaussian_mixture", "linear_toy"}),
      key("dataset", "mean_scale", "number", 3.0, "Scale of the component means", {}, gmm),
      key("dataset", "stddev", "number", 0.5, "Within-component standard deviation", {}, gmm),
      key("dataset", "omega", "number", 2.0, "Oscillator angular frequency", {}, osc),
      key("dataset", "embed_dim", "integer", 100, "Embedding dimension", {}, osc),
      key("dataset", "dt", "number", 0.01, "Sampling or integration step", {}, {"oscillator", "lambda_omega"}),
      key("dataset", "radius", "number", 1.0, "Oscillator amplitude", {}, osc),
      key("dataset", "grid_n", "integer", 32, "Grid points per side", {}, lo),
      key("dataset", "steps", "integer", 2000, "Recorded integration steps", {}, lo),
      key("dataset", "burn_in", "integer", 0, "Integration steps before recording", {}, lo),
      key("dataset", "snapshot_every", "integer", 10, "Steps between snapshots", {}, lo),
      key("dataset", "diffusion", "number", 0.1, "Diffusion coefficient", {}, lo),
      key("dataset", "beta", "number", 1.0, "Frequency coefficient of the reaction term", {}, lo),
      key("dataset", "images", "string", "train-images-idx3-ubyte", "IDX image file under EAE_DATA_DIR", {}, mnist),
      key("dataset", "labels", "string", "train-labels-idx1-ubyte", "IDX label file under EAE_DATA_DIR", {}, mnist),
      key("dataset", "limit", "integer", 0, "Keep only the first rows (0 keeps all)", {}, mnist),
      key("dataset", "latent_dim", "integer", 2, "Generating latent dimension", {}, lin),
      key("dataset", "noise", "number", 0.05, "Observation noise", {}, lin),

      key("model", "latent_dim", "integer", 2, "Latent dimension"),
      key("model", "encoder_hidden", "integer_array", json::array({32}), "Encoder hidden widths"),
      key("model", "decoder_hidden", "integer_array", json::array({32}), "Decoder hidden widths"),
      key("model", "hidden_activation", "string", "elu", "Hidden-layer activation",
          {"linear", "relu", "elu", "sigmoid"}),
      key("model", "loss", "string", "squared_error", "Reconstruction loss",
          {"squared_error", "bernoulli_cross_entropy_with_sigmoid", "bce"}),

      key("trainer", "kind", "string", "eae", "Training algorithm", {"eae", "vae", "ae"}),
      key("trainer", "ensemble_size", "integer", 10, "Encoder samples per decoder update"),
      key("trainer", "minibatch_size", "integer", 32, "Rows per minibatch"),
      key("trainer", "tolerance", "number", 0.0, "Stop once the decoder gradient norm falls below this"),
      key("trainer", "max_outer_iterations", "integer", 100, "Decoder updates"),
      key("trainer", "burn_in_discard", "integer", 0, "Encoder samples dropped per outer iteration"),
      key("trainer", "learning_rate", "number", 1e-3, "Adam learning rate"),
      key("trainer", "epochs", "integer", 10, "Epochs for the baseline trainers"),
      key("trainer", "checkpoint_every", "integer", 0, "Outer iterations between checkpoints (0 disables)"),
      key("trainer", "final_samples", "integer", 50, "Encoder samples collected after training"),

      key("thermostat", "temperature", "number", 1e-4, "Sampling temperature"),
      key("thermostat", "particle_mass", "number", 1.0, "Mass of every encoder coordinate"),
      key("thermostat", "chain_length", "integer", 1, "Nose-Hoover chain length"),
      key("thermostat", "chain_mass", "number_or_null", nullptr, "Chain mass; null picks n*T*(100*dt)^2"),
      key("thermostat", "step_size", "number", 1e-3, "Integrator step"),
      key("thermostat", "velocity_resample_period", "integer", 0, "Steps between momentum redraws (0 disables)"),
      key("thermostat", "zero_initial_momenta", "boolean", false, "Start from rest"),

      key("diagnostics", "activity_threshold", "number", 0.01, "Variance above which a latent unit is active"),
      key("diagnostics", "interpolation_steps", "integer", 11, "Points on each interpolation path"),

      key("dynamics", "enabled", "boolean", false, "Train with the dynamics-aware loss"),
      key("dynamics", "lambda1", "number", 1.0, "Reconstruction weight"),
      key("dynamics", "lambda2", "number", 20.0, "Time-derivative weight"),
      key("dynamics", "max_degree", "integer", 3, "Highest monomial degree in the library"),
      key("dynamics", "sines", "boolean", true, "Include sin(z_k) terms"),
      key("dynamics", "integration_steps", "integer", 1000, "RK4 steps for recovered trajectories"),
      key("dynamics", "integration_dt", "number", 0.01, "RK4 step for recovered trajectories"),
  };
}

bool type_matches(const std::string& type, const json& v) {
  if (type == "integer") return v.is_number_integer();
  if (type == "number") return v.is_number();
  if (type == "string") return v.is_string();
  if (type == "boolean") return v.is_boolean();
  if (type == "number_or_null") return v.is_number() || v.is_null();
  if (type == "integer_array" || type == "number_array") {
    if (!v.is_array()) return false;
    for (const auto& e : v) {
      if (type == "integer_array" ? !e.is_number_integer() : !e.is_number()) return false;
    }
    return true;
  }
  return false;
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

const ConfigKey* find_key(const std::string& section, const std::string& name) {
  for (const auto& k : config_keys()) {
    if (k.section == section && k.key == name) return &k;
  }
  return nullptr;
}

void check_value(const ConfigKey& k, const json& v) {
  const std::string where = k.section.empty() ? k.key : k.section + "." + k.key;
  if (!type_matches(k.type, v)) {
    throw ConfigError("config key '" + where + "' must be of type " + k.type + ", got " + v.dump());
  }
  if (!k.choices.empty() && !contains(k.choices, v.get<std::string>())) {
    throw ConfigError("config key '" + where + "' has unsupported value " + v.dump());
  }
  if (k.type == "integer" && v.is_number_integer() && v.get<std::int64_t>() < 0) {
    throw ConfigError("config key '" + where + "' must be >= 0");
  }
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = make_keys();
  return keys;
}

json resolve_config(const json& user) {
  if (!user.is_object()) throw ConfigError("config must be a JSON object");
  json out = json::object();
  for (const auto& [name, value] : user.items()) {
    if (contains(kSections, name)) {
      if (!value.is_object()) throw ConfigError("config section '" + name + "' must be an object");
      continue;
    }
    const ConfigKey* k = find_key("", name);
    if (!k) throw ConfigError("unknown config key '" + name + "'");
    check_value(*k, value);
  }
  std::string kind = "gaussian_mixture";
  if (user.contains("dataset") && user["dataset"].contains("kind")) {
    check_value(*find_key("dataset", "kind"), user["dataset"]["kind"]);
    kind = user["dataset"]["kind"].get<std::string>();
  }
  for (const auto& section : kSections) {
    const json given = user.value(section, json::object());
    for (const auto& [name, value] : given.items()) {
      const ConfigKey* k = find_key(section, name);
      if (!k) throw ConfigError("unknown config key '" + section + "." + name + "'");
      if (!k->dataset_kinds.empty() && !contains(k->dataset_kinds, kind)) {
        throw ConfigError("config key 'dataset." + name + "' does not apply to dataset kind '" +
                          kind + "'");
      }
      check_value(*k, value);
    }
  }
  for (const auto& k : config_keys()) {
    if (k.section.empty()) {
      out[k.key] = user.contains(k.key) ? user[k.key] : k.default_value;
      continue;
    }
    if (!k.dataset_kinds.empty() && !contains(k.dataset_kinds, kind)) continue;
    const json given = user.value(k.section, json::object());
    out[k.section][k.key] = given.contains(k.key) ? given[k.key] : k.default_value;
  }
  const json& split = out["dataset"]["split"];
  if (split.size() != 3) throw ConfigError("config key 'dataset.split' needs three fractions");
  if (out["dynamics"]["enabled"].get<bool>() && out["trainer"]["kind"] != "eae") {
    throw ConfigError("dynamics.enabled requires trainer.kind 'eae'");
  }
  return out;
}

json load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

namespace {

json schema_for(const ConfigKey& k) {
  json s = {{"description", k.description}, {"default", k.default_value}};
  if (k.type == "integer") {
    s["type"] = "integer";
    s["minimum"] = 0;
  } else if (k.type == "number" || k.type == "string" || k.type == "boolean") {
    s["type"] = k.type;
  } else if (k.type == "number_or_null") {
    s["type"] = json::array({"number", "null"});
  } else if (k.type == "integer_array") {
    s["type"] = "array";
    s["items"] = {{"type", "integer"}};
  } else {
    s["type"] = "array";
    s["items"] = {{"type", "number"}};
  }
  if (!k.choices.empty()) s["enum"] = k.choices;
  if (!k.dataset_kinds.empty()) s["x-dataset-kinds"] = k.dataset_kinds;
  return s;
}

}  // namespace

json config_schema() {
  json schema = {{"$schema", "https://json-schema.org/draft/2020-12/schema"},
                 {"title", "eae experiment configuration"},
                 {"type", "object"},
                 {"additionalProperties", false},
                 {"properties", json::object()}};
  for (const auto& section : kSections) {
    schema["properties"][section] = {
        {"type", "object"}, {"additionalProperties", false}, {"properties", json::object()}};
  }
  for (const auto& k : config_keys()) {
    if (k.section.empty()) {
      schema["properties"][k.key] = schema_for(k);
    } else {
      schema["properties"][k.section]["properties"][k.key] = schema_for(k);
    }
  }
  return schema;
}

namespace {

std::string fnv_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Dataset generate(const json& d) {
  const std::string kind = d.at("kind");
  const auto seed = d.at("seed").get<std::uint64_t>();
  if (kind == "gaussian_mixture") {
    GaussianMixtureOptions o;
    o.components = d.at("components");
    o.dim = d.at("dim");
    o.samples = d.at("samples");
    o.mean_scale = d.at("mean_scale");
    o.stddev = d.at("stddev");
    o.seed = seed;
    return gen_gaussian_mixture(o);
  }
  if (kind == "oscillator") {
    OscillatorOptions o;
    o.omega = d.at("omega");
    o.embed_dim = d.at("embed_dim");
    o.samples = d.at("samples");
    o.dt = d.at("dt");
    o.radius = d.at("radius");
    o.seed = seed;
    return gen_oscillator(o);
  }
  if (kind == "lambda_omega") {
    LambdaOmegaOptions o;
    o.grid_n = d.at("grid_n");
    o.dt = d.at("dt");
    o.steps = d.at("steps");
    o.burn_in = d.at("burn_in");
    o.snapshot_every = d.at("snapshot_every");
    o.diffusion = d.at("diffusion");
    o.beta = d.at("beta");
    o.seed = seed;
    return gen_lambda_omega(o);
  }
  LinearToyOptions o;
  o.latent_dim = d.at("latent_dim");
  o.dim = d.at("dim");
  o.samples = d.at("samples");
  o.noise = d.at("noise");
  o.seed = seed;
  return gen_linear_toy(o);
}

}  // namespace

Dataset build_dataset(const json& resolved, const std::optional<std::filesystem::path>& data_dir) {
  const json& d = resolved.at("dataset");
  const std::string kind = d.at("kind");
  if (kind == "mnist") {
    if (!data_dir) throw ConfigError("dataset kind 'mnist' needs EAE_DATA_DIR to be set");
    Dataset ds = load_idx(*data_dir / d.at("images").get<std::string>(),
                          *data_dir / d.at("labels").get<std::string>());
    const Index limit = d.at("limit");
    if (limit > 0 && limit < ds.rows()) {
      std::vector<Index> rows(static_cast<std::size_t>(limit));
      for (Index i = 0; i < limit; ++i) rows[static_cast<std::size_t>(i)] = i;
      ds = ds.subset(rows);
    }
    return ds;
  }
  if (!data_dir) return generate(d);
  json gen = d;
  gen.erase("split");
  gen.erase("split_mode");
  const auto cache = *data_dir / "cache" / (kind + "-" + fnv_hex(gen.dump()) + ".blob");
  if (std::filesystem::exists(cache)) return load_dataset(cache);
  Dataset ds = generate(d);
  std::filesystem::create_directories(cache.parent_path());
  save_dataset(cache, ds);
  return ds;
}

DatasetSplit split_dataset(const Dataset& data, const json& resolved) {
  const json& d = resolved.at("dataset");
  const auto f = d.at("split").get<std::vector<double>>();
  const std::array<double, 3> fractions{f[0], f[1], f[2]};
  const std::uint64_t seed = derive_seed(d.at("seed").get<std::uint64_t>(), 40);
  return d.at("split_mode") == "temporal" ? split_temporal(data, fractions, seed)
                                          : split(data, fractions, seed);
}

namespace {

std::vector<Index> widths(Index in, const json& hidden, Index out) {
  std::vector<Index> w{in};
  for (const auto& h : hidden) {
    if (h.get<Index>() < 1) throw ConfigError("hidden widths must be >= 1");
    w.push_back(h.get<Index>());
  }
  w.push_back(out);
  return w;
}

}  // namespace

AutoencoderModel build_autoencoder(const json& resolved, Index data_width) {
  const json& m = resolved.at("model");
  const Index nz = m.at("latent_dim");
  if (nz < 1) throw ConfigError("model.latent_dim must be >= 1");
  const Activation act = activation_from_string(m.at("hidden_activation").get<std::string>());
  AutoencoderModel model{make_mlp(widths(data_width, m.at("encoder_hidden"), nz), act, Activation::linear),
                         make_mlp(widths(nz, m.at("decoder_hidden"), data_width), act, Activation::linear),
                         nz};
  model.validate();
  return model;
}

VaeModel build_vae(const json& resolved, Index data_width) {
  const json& m = resolved.at("model");
  const Index nz = m.at("latent_dim");
  if (nz < 1) throw ConfigError("model.latent_dim must be >= 1");
  const Activation act = activation_from_string(m.at("hidden_activation").get<std::string>());
  VaeModel model{make_mlp(widths(data_width, m.at("encoder_hidden"), 2 * nz), act, Activation::linear),
                 make_mlp(widths(nz, m.at("decoder_hidden"), data_width), act, Activation::linear),
                 nz};
  model.validate();
  return model;
}

ThermostatConfig build_thermostat(const json& resolved) {
  const json& t = resolved.at("thermostat");
  ThermostatConfig cfg;
  cfg.temperature = t.at("temperature");
  cfg.particle_mass = t.at("particle_mass");
  cfg.chain_length = t.at("chain_length");
  if (!t.at("chain_mass").is_null()) cfg.chain_mass = t.at("chain_mass").get<double>();
  cfg.step_size = t.at("step_size");
  cfg.velocity_resample_period = t.at("velocity_resample_period");
  cfg.zero_initial_momenta = t.at("zero_initial_momenta");
  cfg.seed = derive_seed(resolved.at("seed").get<std::uint64_t>(), 5);
  cfg.validate();
  return cfg;
}

TrainConfig build_train_config(const json& resolved) {
  const json& t = resolved.at("trainer");
  TrainConfig cfg;
  cfg.ensemble_size = t.at("ensemble_size");
  cfg.minibatch_size = t.at("minibatch_size");
  cfg.tolerance = t.at("tolerance");
  cfg.max_outer_iterations = t.at("max_outer_iterations");
  cfg.burn_in_discard = t.at("burn_in_discard");
  cfg.decoder_optimizer.learning_rate = t.at("learning_rate");
  cfg.loss = loss_kind_from_string(resolved.at("model").at("loss").get<std::string>());
  cfg.thermostat = build_thermostat(resolved);
  cfg.seed = resolved.at("seed");
  cfg.validate();
  return cfg;
}

BaselineConfig build_baseline_config(const json& resolved) {
  const json& t = resolved.at("trainer");
  BaselineConfig cfg;
  cfg.epochs = t.at("epochs");
  cfg.minibatch_size = t.at("minibatch_size");
  cfg.optimizer.learning_rate = t.at("learning_rate");
  cfg.loss = loss_kind_from_string(resolved.at("model").at("loss").get<std::string>());
  cfg.seed = resolved.at("seed");
  if (cfg.minibatch_size < 1) throw ConfigError("trainer.minibatch_size must be >= 1");
  return cfg;
}

DynamicsWeights build_dynamics_weights(const json& resolved) {
  const json& d = resolved.at("dynamics");
  DynamicsWeights w{d.at("lambda1"), d.at("lambda2")};
  w.validate();
  return w;
}

BasisLibrary build_basis_library(const json& resolved) {
  const json& d = resolved.at("dynamics");
  return BasisLibrary::polynomial_sine(resolved.at("model").at("latent_dim").get<Index>(),
                                       d.at("max_degree").get<int>(), d.at("sines").get<bool>());
}

}  // namespace eae
