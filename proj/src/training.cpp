#include "eae/training.hpp"
#include "eae/mlp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>

namespace eae {

MinibatchStream::MinibatchStream(Index rows, Index batch_size, std::uint64_t seed)
    : rows_(rows), batch_size_(std::min(batch_size, rows)), rng_(seed) {
  if (rows <= 0) throw PreconditionError("minibatch stream over an empty dataset");
  if (batch_size <= 0) throw ConfigError("minibatch size must be >= 1");
  order_.resize(static_cast<std::size_t>(rows_));
  std::iota(order_.begin(), order_.end(), Index{0});
  reshuffle();
}

void MinibatchStream::reshuffle() {
  std::shuffle(order_.begin(), order_.end(), rng_);
  cursor_ = 0;
}

std::vector<Index> MinibatchStream::next() {
  if (cursor_ >= rows_) {
    ++epoch_;
    reshuffle();
  }
  const Index end = std::min(rows_, cursor_ + batch_size_);
  std::vector<Index> batch(order_.begin() + cursor_, order_.begin() + end);
  cursor_ = end;
  return batch;
}

Index MinibatchStream::batches_per_epoch() const { return (rows_ + batch_size_ - 1) / batch_size_; }

BatchXd gather_rows(const BatchXd& data, std::span<const Index> rows) {
  BatchXd out(static_cast<Index>(rows.size()), data.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = data.row(rows[i]);
  return out;
}

ReconstructionObjective::ReconstructionObjective(AutoencoderModel model, const BatchXd& data,
                                                 LossKind kind)
    : model_(std::move(model)), data_(data), kind_(kind) {
  model_.validate();
  if (data.cols() != model_.encoder.input_width()) {
    throw DimensionError("data width does not match the encoder input width");
  }
}

LossGrad ReconstructionObjective::evaluate(const AutoencoderParams& params,
                                           std::span<const Index> rows) const {
  return recon_loss_grad(model_, params.encoder, params.decoder, gather_rows(data_, rows), kind_);
}

double ReconstructionObjective::full_loss(const AutoencoderParams& params) const {
  return recon_loss(model_, params.encoder, params.decoder, data_, kind_);
}

void TrainConfig::validate() const {
  if (ensemble_size < 1) throw ConfigError("ensemble size M must be >= 1");
  if (minibatch_size < 1) throw ConfigError("minibatch size must be >= 1");
  if (tolerance < 0.0) throw ConfigError("tolerance must be >= 0");
  if (max_outer_iterations < 1) throw ConfigError("max_outer_iterations must be >= 1");
  if (burn_in_discard < 0 || burn_in_discard >= ensemble_size) {
    throw ConfigError("burn_in_discard must lie in [0, M)");
  }
  thermostat.validate();
}

void TrainReport::write_csv(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "'");
  out << "outer_iter,inner_iter,member_loss,post_update_loss,grad_norm\n"
      << std::setprecision(17);
  for (std::size_t k = 0; k < iterations.size(); ++k) {
    const auto& it = iterations[k];
    for (std::size_t i = 0; i < it.member_losses.size(); ++i) {
      out << k << ',' << i << ',' << it.member_losses[i] << ',' << it.post_update_loss << ','
          << it.grad_norm << '\n';
    }
  }
}

AutoencoderParams initial_params(const AutoencoderModel& model, std::uint64_t seed) {
  model.validate();
  return {glorot_init(model.encoder, derive_seed(seed, 11)),
          glorot_init(model.decoder, derive_seed(seed, 12))};
}

ParamVector decoder_grad_estimate(const EncoderEnsemble& ensemble) {
  if (ensemble.decoder_gradients.empty()) {
    throw PreconditionError("decoder gradient estimate needs a nonempty ensemble");
  }
  ParamVector mean = ParamVector::Zero(ensemble.decoder_gradients.front().size());
  for (const auto& g : ensemble.decoder_gradients) mean += g;
  return mean / static_cast<double>(ensemble.decoder_gradients.size());
}

namespace {

bool should_resample(std::int64_t inner_step, const ThermostatConfig& cfg) {
  return cfg.velocity_resample_period > 0 && inner_step > 0 &&
         inner_step % cfg.velocity_resample_period == 0;
}

}  // namespace

EaeResult eae_train(const EaeObjective& objective, AutoencoderParams init, const TrainConfig& cfg,
                    const EaeHooks& hooks) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  EaeResult result;
  result.report.seed = cfg.seed;
  ParamVector decoder = std::move(init.decoder);
  result.sampler = init_state(init.encoder, cfg.thermostat);
  SamplerState& sampler = result.sampler;
  Adam adam(cfg.decoder_optimizer);
  MinibatchStream batches(objective.rows(), cfg.minibatch_size, derive_seed(cfg.seed, 21));
  AutoencoderParams last_good{sampler.positions, decoder};

  double grad_norm = std::numeric_limits<double>::infinity();
  Index k = 0;
  std::int64_t inner_total = 0;
  while (grad_norm > cfg.tolerance && k < cfg.max_outer_iterations) {
    EncoderEnsemble ensemble;
    OuterIterationRecord record;
    for (Index i = 0; i < cfg.ensemble_size; ++i) {
      const std::vector<Index> rows = batches.next();
      const AutoencoderParams current{sampler.positions, decoder};
      LossGrad lg = objective.evaluate(current, rows);
      if (!std::isfinite(lg.value) || !lg.grad_decoder.allFinite()) {
        throw TrainingAborted("non-finite loss at outer iteration " + std::to_string(k) +
                                  ", inner step " + std::to_string(i),
                              last_good, k);
      }
      record.member_losses.push_back(lg.value);
      if (i >= cfg.burn_in_discard) {
        ensemble.members.push_back(sampler.positions);
        ensemble.decoder_gradients.push_back(std::move(lg.grad_decoder));
      }
      if (should_resample(inner_total, cfg.thermostat)) {
        resample_velocities(sampler, cfg.thermostat);
      }
      const GradientFn grad_fn = [&](const VectorXd& phi) {
        return objective.encoder_gradient({phi, decoder}, rows);
      };
      try {
        step(sampler, grad_fn, cfg.thermostat, &lg.grad_encoder);
      } catch (const NumericError& e) {
        throw TrainingAborted(e.what(), last_good, k);
      }
      ++inner_total;
    }
    const ParamVector g_bar = decoder_grad_estimate(ensemble);
    grad_norm = g_bar.norm();
    adam.step(decoder, g_bar);
    record.grad_norm = grad_norm;
    record.post_update_loss = objective.full_loss({sampler.positions, decoder});
    if (!std::isfinite(record.post_update_loss) || !decoder.allFinite()) {
      throw TrainingAborted("non-finite loss after decoder update " + std::to_string(k),
                            last_good, k);
    }
    last_good = {sampler.positions, decoder};
    result.report.iterations.push_back(std::move(record));
    result.ensemble = std::move(ensemble);
    ++k;
    if (hooks.on_outer_iteration) hooks.on_outer_iteration(k, last_good);
  }
  result.report.max_iterations_reached = grad_norm > cfg.tolerance;
  result.params = {sampler.positions, decoder};
  result.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

EaeResult eae_train(const AutoencoderModel& model, const BatchXd& data, const TrainConfig& cfg,
                    const EaeHooks& hooks) {
  if (data.rows() == 0) throw PreconditionError("training data is empty");
  ReconstructionObjective objective(model, data, cfg.loss);
  return eae_train(objective, initial_params(model, cfg.seed), cfg, hooks);
}

EncoderEnsemble eae_collect(const EaeObjective& objective, const ParamVector& decoder,
                            SamplerState& sampler, Index count, const TrainConfig& cfg) {
  EncoderEnsemble ensemble;
  MinibatchStream batches(objective.rows(), cfg.minibatch_size, derive_seed(cfg.seed, 22));
  for (Index i = 0; i < count; ++i) {
    const std::vector<Index> rows = batches.next();
    if (should_resample(sampler.step_index, cfg.thermostat)) {
      resample_velocities(sampler, cfg.thermostat);
    }
    const GradientFn grad_fn = [&](const VectorXd& phi) {
      return objective.encoder_gradient({phi, decoder}, rows);
    };
    step(sampler, grad_fn, cfg.thermostat);
    ensemble.members.push_back(sampler.positions);
  }
  return ensemble;
}

LatentEnsemble eae_sample_latents(const AutoencoderModel& model,
                                  const std::vector<ParamVector>& members,
                                  const BatchXd& queries) {
  if (members.empty()) throw PreconditionError("latent sampling needs a nonempty ensemble");
  LatentEnsemble latents;
  latents.reserve(members.size());
  for (const auto& phi : members) latents.push_back(encode(model, phi, queries));
  return latents;
}

BaselineResult ae_train(const AutoencoderModel& model, const BatchXd& data,
                        const BaselineConfig& cfg, std::optional<AutoencoderParams> init) {
  if (data.rows() == 0) throw PreconditionError("training data is empty");
  BaselineResult result;
  result.params = init ? std::move(*init) : initial_params(model, cfg.seed);
  Adam enc_opt(cfg.optimizer);
  Adam dec_opt(cfg.optimizer);
  MinibatchStream batches(data.rows(), cfg.minibatch_size, derive_seed(cfg.seed, 21));
  result.initial_loss =
      recon_loss(model, result.params.encoder, result.params.decoder, data, cfg.loss);
  for (Index epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (Index b = 0; b < batches.batches_per_epoch(); ++b) {
      if (cfg.max_steps && result.steps >= *cfg.max_steps) break;
      const BatchXd batch = gather_rows(data, batches.next());
      const LossGrad lg =
          recon_loss_grad(model, result.params.encoder, result.params.decoder, batch, cfg.loss);
      if (!std::isfinite(lg.value)) {
        throw TrainingAborted("non-finite AE loss in epoch " + std::to_string(epoch),
                              result.params, epoch);
      }
      enc_opt.step(result.params.encoder, lg.grad_encoder);
      dec_opt.step(result.params.decoder, lg.grad_decoder);
      ++result.steps;
    }
    result.epoch_losses.push_back(
        recon_loss(model, result.params.encoder, result.params.decoder, data, cfg.loss));
    if (cfg.max_steps && result.steps >= *cfg.max_steps) break;
  }
  return result;
}

namespace {

BatchXd standard_normal(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  BatchXd out(rows, cols);
  for (Index i = 0; i < out.size(); ++i) out.data()[i] = normal(rng);
  return out;
}

}  // namespace

double vae_full_loss(const VaeModel& vae, const AutoencoderParams& params, const BatchXd& data,
                     LossKind kind, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return elbo_loss(vae, params, data, standard_normal(data.rows(), vae.latent_dim, rng), kind)
      .total();
}

BaselineResult vae_train(const VaeModel& vae, const BatchXd& data, const BaselineConfig& cfg,
                         std::optional<AutoencoderParams> init) {
  vae.validate();
  if (data.rows() == 0) throw PreconditionError("training data is empty");
  BaselineResult result;
  result.params = init ? std::move(*init)
                       : AutoencoderParams{glorot_init(vae.encoder, derive_seed(cfg.seed, 11)),
                                           glorot_init(vae.decoder, derive_seed(cfg.seed, 12))};
  Adam enc_opt(cfg.optimizer);
  Adam dec_opt(cfg.optimizer);
  MinibatchStream batches(data.rows(), cfg.minibatch_size, derive_seed(cfg.seed, 21));
  std::mt19937_64 noise_rng(derive_seed(cfg.seed, 31));
  const std::uint64_t eval_seed = derive_seed(cfg.seed, 32);
  result.initial_loss = vae_full_loss(vae, result.params, data, cfg.loss, eval_seed);
  for (Index epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (Index b = 0; b < batches.batches_per_epoch(); ++b) {
      if (cfg.max_steps && result.steps >= *cfg.max_steps) break;
      const BatchXd batch = gather_rows(data, batches.next());
      const BatchXd noise = standard_normal(batch.rows(), vae.latent_dim, noise_rng);
      const LossGrad lg = elbo_loss_grad(vae, result.params, batch, noise, cfg.loss);
      if (!std::isfinite(lg.value)) {
        throw TrainingAborted("non-finite ELBO in epoch " + std::to_string(epoch), result.params,
                              epoch);
      }
      enc_opt.step(result.params.encoder, lg.grad_encoder);
      dec_opt.step(result.params.decoder, lg.grad_decoder);
      ++result.steps;
    }
    result.epoch_losses.push_back(vae_full_loss(vae, result.params, data, cfg.loss, eval_seed));
    if (cfg.max_steps && result.steps >= *cfg.max_steps) break;
  }
  return result;
}

}  // namespace eae
