#include "eae/checkpoint.hpp"
#include "eae/blob_io.hpp"

namespace eae {

nlohmann::json spec_to_json(const NetworkSpec& spec) {
  nlohmann::json acts = nlohmann::json::array();
  for (auto a : spec.activations) acts.push_back(to_string(a));
  return {{"layer_widths", spec.layer_widths}, {"activations", acts}};
}

NetworkSpec spec_from_json(const nlohmann::json& j) {
  NetworkSpec spec;
  spec.layer_widths = j.at("layer_widths").get<std::vector<Index>>();
  for (const auto& a : j.at("activations")) {
    spec.activations.push_back(activation_from_string(a.get<std::string>()));
  }
  spec.validate();
  return spec;
}

AutoencoderModel Checkpoint::autoencoder() const {
  AutoencoderModel m{encoder, decoder, latent_dim};
  m.validate();
  return m;
}

VaeModel Checkpoint::vae() const {
  VaeModel m{encoder, decoder, latent_dim};
  m.validate();
  return m;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  io::Blob blob;
  blob.header["format"] = "eae-checkpoint";
  blob.header["version"] = 1;
  blob.header["model_kind"] = ckpt.model_kind;
  blob.header["encoder"] = spec_to_json(ckpt.encoder);
  blob.header["decoder"] = spec_to_json(ckpt.decoder);
  blob.header["latent_dim"] = ckpt.latent_dim;
  blob.header["loss"] = to_string(ckpt.loss);
  blob.header["seed"] = ckpt.seed;
  blob.header["outer_iteration"] = ckpt.outer_iteration;
  blob.add_block("encoder", ckpt.params.encoder);
  blob.add_block("decoder", ckpt.params.decoder);
  io::write_blob(path, blob);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const io::Blob blob = io::read_blob(path);
  if (blob.header.value("format", "") != "eae-checkpoint") {
    throw FormatError("'" + path.string() + "' is not a checkpoint", 9);
  }
  Checkpoint ckpt;
  ckpt.model_kind = blob.header.at("model_kind").get<std::string>();
  ckpt.encoder = spec_from_json(blob.header.at("encoder"));
  ckpt.decoder = spec_from_json(blob.header.at("decoder"));
  ckpt.latent_dim = blob.header.at("latent_dim").get<Index>();
  ckpt.loss = loss_kind_from_string(blob.header.at("loss").get<std::string>());
  ckpt.seed = blob.header.at("seed").get<std::uint64_t>();
  ckpt.outer_iteration = blob.header.value("outer_iteration", Index{0});
  ckpt.params.encoder = blob.vector("encoder");
  ckpt.params.decoder = blob.vector("decoder");
  if (ckpt.params.encoder.size() != ckpt.encoder.param_count() ||
      ckpt.params.decoder.size() != ckpt.decoder.param_count()) {
    throw DimensionError("checkpoint parameter sizes do not match its specs");
  }
  return ckpt;
}

void save_ensemble(const std::filesystem::path& path, const EnsembleFile& ensemble) {
  io::Blob blob;
  blob.header["format"] = "eae-ensemble";
  blob.header["version"] = 1;
  blob.header["encoder"] = spec_to_json(ensemble.encoder);
  BatchXd members(static_cast<Index>(ensemble.members.size()), ensemble.encoder.param_count());
  for (std::size_t i = 0; i < ensemble.members.size(); ++i) {
    if (ensemble.members[i].size() != members.cols()) {
      throw DimensionError("ensemble member " + std::to_string(i) + " has the wrong size");
    }
    members.row(static_cast<Index>(i)) = ensemble.members[i].transpose();
  }
  blob.add_block("members", members);
  io::write_blob(path, blob);
}

EnsembleFile load_ensemble(const std::filesystem::path& path) {
  const io::Blob blob = io::read_blob(path);
  if (blob.header.value("format", "") != "eae-ensemble") {
    throw FormatError("'" + path.string() + "' is not an ensemble file", 9);
  }
  EnsembleFile ens;
  ens.encoder = spec_from_json(blob.header.at("encoder"));
  const BatchXd members = blob.matrix("members");
  if (members.rows() > 0 && members.cols() != ens.encoder.param_count()) {
    throw DimensionError("ensemble members do not match the encoder spec");
  }
  for (Index i = 0; i < members.rows(); ++i) ens.members.push_back(members.row(i).transpose());
  return ens;
}

}  // namespace eae
