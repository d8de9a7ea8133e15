#ifndef EAE_CONFIG_HPP
#define EAE_CONFIG_HPP

// Experiment configuration: a JSON document with the sections dataset, model,
// trainer, thermostat, diagnostics and dynamics plus top-level seed and
// output_dir. Every accepted key, its type and its default live in one table;
// validation, default expansion and the published JSON schema all read it.

#include "eae/basis.hpp"
#include "eae/datasets.hpp"
#include "eae/dynamics.hpp"
#include "eae/model.hpp"
#include "eae/training.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace eae {

struct ConfigKey {
  std::string section;  // empty for top-level keys
  std::string key;
  std::string type;     // integer, number, string, boolean, integer_array, number_array, number_or_null
  nlohmann::json default_value;
  std::string description;
  std::vector<std::string> choices;   // allowed strings, when restricted
  std::vector<std::string> dataset_kinds;  // dataset keys only: kinds that accept the key
};

const std::vector<ConfigKey>& config_keys();

/// Validates a user document and expands every default. Unknown keys, wrong
/// types and out-of-range choices raise ConfigError naming the key.
nlohmann::json resolve_config(const nlohmann::json& user);

nlohmann::json load_config_file(const std::filesystem::path& path);

/// JSON Schema (draft 2020-12) generated from the key table.
nlohmann::json config_schema();

/// Dataset named by the resolved config. Generated data is cached under
/// `data_dir` when one is given; IDX files are looked up there.
Dataset build_dataset(const nlohmann::json& resolved,
                      const std::optional<std::filesystem::path>& data_dir);
DatasetSplit split_dataset(const Dataset& data, const nlohmann::json& resolved);

AutoencoderModel build_autoencoder(const nlohmann::json& resolved, Index data_width);
VaeModel build_vae(const nlohmann::json& resolved, Index data_width);

ThermostatConfig build_thermostat(const nlohmann::json& resolved);
TrainConfig build_train_config(const nlohmann::json& resolved);
BaselineConfig build_baseline_config(const nlohmann::json& resolved);
DynamicsWeights build_dynamics_weights(const nlohmann::json& resolved);
BasisLibrary build_basis_library(const nlohmann::json& resolved);

}  // namespace eae

#endif  // EAE_CONFIG_HPP
