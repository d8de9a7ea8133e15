#ifndef EAE_MODEL_HPP
#define EAE_MODEL_HPP

#include "eae/core.hpp"
#include "eae/network.hpp"

#include <string>
#include <string_view>

namespace eae {

enum class LossKind { squared_error, bernoulli_cross_entropy_with_sigmoid };

std::string to_string(LossKind k);
LossKind loss_kind_from_string(std::string_view name);

/// Deterministic encoder/decoder pair: encoder maps n_y -> n_z, decoder n_z -> n_y.
struct AutoencoderModel {
  NetworkSpec encoder;
  NetworkSpec decoder;
  Index latent_dim = 0;

  void validate() const;
};

/// Gaussian-posterior encoder: output is [mean block | log-variance block].
struct VaeModel {
  NetworkSpec encoder;
  NetworkSpec decoder;
  Index latent_dim = 0;

  void validate() const;
};

struct AutoencoderParams {
  ParamVector encoder;
  ParamVector decoder;
};

struct LossGrad {
  double value = 0.0;
  ParamVector grad_encoder;
  ParamVector grad_decoder;
};

/// Elementwise loss between decoder outputs and targets, averaged over batch
/// rows; squared error is also averaged over pixels. For the cross-entropy
/// kind `output` holds logits.
double reconstruction_loss(const BatchXd& output, const BatchXd& target, LossKind kind);

/// d(reconstruction_loss)/d(output).
BatchXd reconstruction_loss_grad(const BatchXd& output, const BatchXd& target, LossKind kind);

/// Decoder output mapped to data space (sigmoid for the cross-entropy kind).
BatchXd to_data_space(const BatchXd& output, LossKind kind);

BatchXd encode(const AutoencoderModel& model, const ParamVector& encoder, const BatchXd& y);
BatchXd decode(const AutoencoderModel& model, const ParamVector& decoder, const BatchXd& z);

double recon_loss(const AutoencoderModel& model, const ParamVector& encoder,
                  const ParamVector& decoder, const BatchXd& batch, LossKind kind);

LossGrad recon_loss_grad(const AutoencoderModel& model, const ParamVector& encoder,
                         const ParamVector& decoder, const BatchXd& batch, LossKind kind);

/// μ + exp(logvar/2)·noise.
BatchXd reparameterize(const BatchXd& mean, const BatchXd& logvar, const BatchXd& noise);

struct ElboTerms {
  double reconstruction = 0.0;
  double kl = 0.0;
  double total() const { return reconstruction + kl; }
};

struct VaeEncoding {
  BatchXd mean;
  BatchXd logvar;
};

VaeEncoding vae_encode(const VaeModel& vae, const ParamVector& encoder, const BatchXd& y);

/// Batch-meaned analytic KL(N(μ, σ²) || N(0, 1)).
double kl_to_standard_normal(const BatchXd& mean, const BatchXd& logvar);

ElboTerms elbo_loss(const VaeModel& vae, const AutoencoderParams& params, const BatchXd& batch,
                    const BatchXd& noise, LossKind kind);

LossGrad elbo_loss_grad(const VaeModel& vae, const AutoencoderParams& params,
                        const BatchXd& batch, const BatchXd& noise, LossKind kind);

}  // namespace eae

#endif  // EAE_MODEL_HPP
