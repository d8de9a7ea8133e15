#include "eae/model.hpp"
#include "eae/mlp.hpp"

#include <cmath>

namespace eae {

std::string to_string(LossKind k) {
  return k == LossKind::squared_error ? "squared_error" : "bernoulli_cross_entropy_with_sigmoid";
}

LossKind loss_kind_from_string(std::string_view name) {
  if (name == "squared_error") return LossKind::squared_error;
  if (name == "bernoulli_cross_entropy_with_sigmoid" || name == "bce") {
    return LossKind::bernoulli_cross_entropy_with_sigmoid;
  }
  throw DomainError("unknown loss kind '" + std::string(name) + "'");
}

void AutoencoderModel::validate() const {
  encoder.validate();
  decoder.validate();
  if (latent_dim <= 0) throw DimensionError("latent dimension must be positive");
  if (encoder.output_width() != latent_dim) {
    throw DimensionError("encoder output width " + std::to_string(encoder.output_width()) +
                         " != latent dimension " + std::to_string(latent_dim));
  }
  if (decoder.input_width() != latent_dim) {
    throw DimensionError("decoder input width " + std::to_string(decoder.input_width()) +
                         " != latent dimension " + std::to_string(latent_dim));
  }
  if (decoder.output_width() != encoder.input_width()) {
    throw DimensionError("decoder output width must equal encoder input width");
  }
}

void VaeModel::validate() const {
  encoder.validate();
  decoder.validate();
  if (latent_dim <= 0) throw DimensionError("latent dimension must be positive");
  if (encoder.output_width() != 2 * latent_dim) {
    throw DimensionError("VAE encoder output width must be exactly 2*latent_dim");
  }
  if (decoder.input_width() != latent_dim) {
    throw DimensionError("decoder input width must equal latent dimension");
  }
  if (decoder.output_width() != encoder.input_width()) {
    throw DimensionError("decoder output width must equal encoder input width");
  }
}

namespace {

void check_targets(const BatchXd& target, LossKind kind) {
  if (kind != LossKind::bernoulli_cross_entropy_with_sigmoid) return;
  if ((target.array() < 0.0).any() || (target.array() > 1.0).any()) {
    throw DomainError("cross-entropy targets must lie in [0, 1]");
  }
}

double sigmoid(double a) { return detail::activate(Activation::sigmoid, a); }

}  // namespace

double reconstruction_loss(const BatchXd& output, const BatchXd& target, LossKind kind) {
  detail::check_same_shape(target, output, "reconstruction loss");
  check_targets(target, kind);
  const auto rows = static_cast<double>(output.rows());
  if (kind == LossKind::squared_error) {
    return (output - target).squaredNorm() / (rows * static_cast<double>(output.cols()));
  }
  double total = 0.0;
  for (Index i = 0; i < output.rows(); ++i) {
    for (Index j = 0; j < output.cols(); ++j) {
      const double a = output(i, j);
      total += std::max(a, 0.0) - a * target(i, j) + std::log1p(std::exp(-std::abs(a)));
    }
  }
  return total / rows;
}

BatchXd reconstruction_loss_grad(const BatchXd& output, const BatchXd& target, LossKind kind) {
  detail::check_same_shape(target, output, "reconstruction loss");
  check_targets(target, kind);
  const auto rows = static_cast<double>(output.rows());
  if (kind == LossKind::squared_error) {
    return (2.0 / (rows * static_cast<double>(output.cols()))) * (output - target);
  }
  return (output.unaryExpr(&sigmoid) - target) / rows;
}

BatchXd to_data_space(const BatchXd& output, LossKind kind) {
  if (kind == LossKind::squared_error) return output;
  return output.unaryExpr(&sigmoid);
}

BatchXd encode(const AutoencoderModel& model, const ParamVector& encoder, const BatchXd& y) {
  return forward(model.encoder, encoder, y);
}

BatchXd decode(const AutoencoderModel& model, const ParamVector& decoder, const BatchXd& z) {
  return forward(model.decoder, decoder, z);
}

double recon_loss(const AutoencoderModel& model, const ParamVector& encoder,
                  const ParamVector& decoder, const BatchXd& batch, LossKind kind) {
  return reconstruction_loss(decode(model, decoder, encode(model, encoder, batch)), batch, kind);
}

LossGrad recon_loss_grad(const AutoencoderModel& model, const ParamVector& encoder,
                         const ParamVector& decoder, const BatchXd& batch, LossKind kind) {
  const auto enc = forward_trace(model.encoder, encoder, batch);
  const auto dec = forward_trace(model.decoder, decoder, enc.output);
  LossGrad out;
  out.value = reconstruction_loss(dec.output, batch, kind);
  const BatchXd upstream = reconstruction_loss_grad(dec.output, batch, kind);
  auto dec_grad = vjp_from_trace(model.decoder, decoder, dec, upstream);
  auto enc_grad = vjp_from_trace(model.encoder, encoder, enc, dec_grad.grad_input);
  out.grad_decoder = std::move(dec_grad.grad_params);
  out.grad_encoder = std::move(enc_grad.grad_params);
  return out;
}

BatchXd reparameterize(const BatchXd& mean, const BatchXd& logvar, const BatchXd& noise) {
  detail::check_same_shape(mean, logvar, "reparameterize logvar");
  detail::check_same_shape(mean, noise, "reparameterize noise");
  return mean.array() + (0.5 * logvar.array()).exp() * noise.array();
}

VaeEncoding vae_encode(const VaeModel& vae, const ParamVector& encoder, const BatchXd& y) {
  const BatchXd out = forward(vae.encoder, encoder, y);
  return {out.leftCols(vae.latent_dim), out.rightCols(vae.latent_dim)};
}

double kl_to_standard_normal(const BatchXd& mean, const BatchXd& logvar) {
  if (!logvar.allFinite()) throw NumericError("non-finite log-variance in KL term");
  const double total =
      0.5 * (mean.array().square() + logvar.array().exp() - 1.0 - logvar.array()).sum();
  return total / static_cast<double>(mean.rows());
}

ElboTerms elbo_loss(const VaeModel& vae, const AutoencoderParams& params, const BatchXd& batch,
                    const BatchXd& noise, LossKind kind) {
  const VaeEncoding enc = vae_encode(vae, params.encoder, batch);
  if (noise.rows() != batch.rows() || noise.cols() != vae.latent_dim) {
    throw DimensionError("ELBO noise must have shape (batch rows, latent_dim)");
  }
  ElboTerms terms;
  terms.kl = kl_to_standard_normal(enc.mean, enc.logvar);
  const BatchXd z = reparameterize(enc.mean, enc.logvar, noise);
  terms.reconstruction = reconstruction_loss(forward(vae.decoder, params.decoder, z), batch, kind);
  return terms;
}

LossGrad elbo_loss_grad(const VaeModel& vae, const AutoencoderParams& params,
                        const BatchXd& batch, const BatchXd& noise, LossKind kind) {
  if (noise.rows() != batch.rows() || noise.cols() != vae.latent_dim) {
    throw DimensionError("ELBO noise must have shape (batch rows, latent_dim)");
  }
  const Index nz = vae.latent_dim;
  const auto enc = forward_trace(vae.encoder, params.encoder, batch);
  const BatchXd mean = enc.output.leftCols(nz);
  const BatchXd logvar = enc.output.rightCols(nz);
  const double kl = kl_to_standard_normal(mean, logvar);
  const BatchXd stddev = (0.5 * logvar.array()).exp();
  const BatchXd z = mean.array() + stddev.array() * noise.array();
  const auto dec = forward_trace(vae.decoder, params.decoder, z);

  LossGrad out;
  out.value = reconstruction_loss(dec.output, batch, kind) + kl;
  auto dec_grad = vjp_from_trace(vae.decoder, params.decoder, dec,
                                 reconstruction_loss_grad(dec.output, batch, kind));
  const double inv_rows = 1.0 / static_cast<double>(batch.rows());
  BatchXd upstream(batch.rows(), 2 * nz);
  upstream.leftCols(nz) = dec_grad.grad_input + inv_rows * mean;
  upstream.rightCols(nz) =
      (dec_grad.grad_input.array() * 0.5 * stddev.array() * noise.array() +
       0.5 * inv_rows * (logvar.array().exp() - 1.0))
          .matrix();
  auto enc_grad = vjp_from_trace(vae.encoder, params.encoder, enc, upstream);
  out.grad_decoder = std::move(dec_grad.grad_params);
  out.grad_encoder = std::move(enc_grad.grad_params);
  return out;
}

}  // namespace eae
