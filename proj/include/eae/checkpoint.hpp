#ifndef EAE_CHECKPOINT_HPP
#define EAE_CHECKPOINT_HPP

#include "eae/model.hpp"
#include "eae/network.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace eae {

nlohmann::json spec_to_json(const NetworkSpec& spec);
NetworkSpec spec_from_json(const nlohmann::json& j);

/// Trained model parameters plus enough metadata to rebuild the model.
struct Checkpoint {
  std::string model_kind = "ae";  // "ae", "vae" or "eae"
  NetworkSpec encoder;
  NetworkSpec decoder;
  Index latent_dim = 0;
  LossKind loss = LossKind::squared_error;
  std::uint64_t seed = 0;
  Index outer_iteration = 0;
  AutoencoderParams params;

  AutoencoderModel autoencoder() const;
  VaeModel vae() const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Ordered encoder parameter samples sharing one encoder spec.
struct EnsembleFile {
  NetworkSpec encoder;
  std::vector<ParamVector> members;
};

void save_ensemble(const std::filesystem::path& path, const EnsembleFile& ensemble);
EnsembleFile load_ensemble(const std::filesystem::path& path);

}  // namespace eae

#endif  // EAE_CHECKPOINT_HPP
