#ifndef EAE_TRAINING_HPP
#define EAE_TRAINING_HPP

#include "eae/adam.hpp"
#include "eae/model.hpp"
#include "eae/simmering.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace eae {

/// Row indices in seeded minibatches: a fresh shuffle each epoch, cut into
/// contiguous chunks (the last chunk of an epoch may be short).
class MinibatchStream {
 public:
  MinibatchStream(Index rows, Index batch_size, std::uint64_t seed);
  std::vector<Index> next();
  Index epoch() const { return epoch_; }
  Index batches_per_epoch() const;

 private:
  void reshuffle();

  Index rows_;
  Index batch_size_;
  std::mt19937_64 rng_;
  std::vector<Index> order_;
  Index cursor_ = 0;
  Index epoch_ = 0;
};

BatchXd gather_rows(const BatchXd& data, std::span<const Index> rows);

/// Loss whose encoder parameters are sampled and whose decoder parameters
/// follow the ensemble-averaged gradient.
class EaeObjective {
 public:
  virtual ~EaeObjective() = default;
  virtual Index rows() const = 0;
  /// Minibatch loss with gradients for both parameter blocks.
  virtual LossGrad evaluate(const AutoencoderParams& params, std::span<const Index> rows) const = 0;
  virtual VectorXd encoder_gradient(const AutoencoderParams& params,
                                    std::span<const Index> rows) const {
    return evaluate(params, rows).grad_encoder;
  }
  virtual double full_loss(const AutoencoderParams& params) const = 0;
};

class ReconstructionObjective final : public EaeObjective {
 public:
  ReconstructionObjective(AutoencoderModel model, const BatchXd& data, LossKind kind);
  Index rows() const override { return data_.rows(); }
  LossGrad evaluate(const AutoencoderParams& params, std::span<const Index> rows) const override;
  double full_loss(const AutoencoderParams& params) const override;

 private:
  AutoencoderModel model_;
  const BatchXd& data_;
  LossKind kind_;
};

struct TrainConfig {
  Index ensemble_size = 10;    // M
  Index minibatch_size = 32;   // N_b
  double tolerance = 0.0;      // ε on ‖ḡ_ϑ‖
  Index max_outer_iterations = 100;
  Index burn_in_discard = 0;   // inner samples dropped per outer iteration
  AdamConfig decoder_optimizer;
  LossKind loss = LossKind::squared_error;
  ThermostatConfig thermostat;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EncoderEnsemble {
  std::vector<ParamVector> members;
  std::vector<ParamVector> decoder_gradients;

  std::size_t size() const { return members.size(); }
};

struct OuterIterationRecord {
  std::vector<double> member_losses;
  double post_update_loss = 0.0;
  double grad_norm = 0.0;
};

struct TrainReport {
  std::vector<OuterIterationRecord> iterations;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  bool max_iterations_reached = false;

  /// Columns: outer_iter, inner_iter, member_loss, post_update_loss, grad_norm.
  void write_csv(const std::filesystem::path& path) const;
};

struct EaeResult {
  AutoencoderParams params;  // final encoder position and trained decoder
  EncoderEnsemble ensemble;  // last outer iteration
  TrainReport report;
  SamplerState sampler;
};

struct EaeHooks {
  std::function<void(Index outer_iteration, const AutoencoderParams&)> on_outer_iteration;
};

/// Raised on a non-finite loss or state; carries the last finite parameters.
class TrainingAborted : public NumericError {
 public:
  TrainingAborted(const std::string& what, AutoencoderParams last_good, Index outer_iteration)
      : NumericError(what), last_good_(std::move(last_good)), outer_(outer_iteration) {}
  const AutoencoderParams& last_good() const { return last_good_; }
  Index outer_iteration() const { return outer_; }

 private:
  AutoencoderParams last_good_;
  Index outer_;
};

/// Glorot initialisation of both networks from the run seed.
AutoencoderParams initial_params(const AutoencoderModel& model, std::uint64_t seed);

/// Two-loop training: M thermostatted encoder steps per decoder update, the
/// decoder moved by Adam along the mean of the stored decoder gradients.
EaeResult eae_train(const EaeObjective& objective, AutoencoderParams init, const TrainConfig& cfg,
                    const EaeHooks& hooks = {});

EaeResult eae_train(const AutoencoderModel& model, const BatchXd& data, const TrainConfig& cfg,
                    const EaeHooks& hooks = {});

/// Keeps sampling encoders with the decoder frozen, storing every step.
EncoderEnsemble eae_collect(const EaeObjective& objective, const ParamVector& decoder,
                            SamplerState& sampler, Index count, const TrainConfig& cfg);

/// Arithmetic mean of the stored decoder gradients.
ParamVector decoder_grad_estimate(const EncoderEnsemble& ensemble);

/// Latents indexed [member](query, latent).
using LatentEnsemble = std::vector<BatchXd>;

LatentEnsemble eae_sample_latents(const AutoencoderModel& model,
                                  const std::vector<ParamVector>& members,
                                  const BatchXd& queries);

struct BaselineConfig {
  Index epochs = 10;
  std::optional<Index> max_steps;  // stops early once reached
  Index minibatch_size = 32;
  AdamConfig optimizer;
  LossKind loss = LossKind::squared_error;
  std::uint64_t seed = 0;
};

struct BaselineResult {
  AutoencoderParams params;
  double initial_loss = 0.0;
  std::vector<double> epoch_losses;  // full-data loss after each epoch
  Index steps = 0;
};

BaselineResult ae_train(const AutoencoderModel& model, const BatchXd& data,
                        const BaselineConfig& cfg,
                        std::optional<AutoencoderParams> init = std::nullopt);

/// Full-data ELBO with the per-row noise drawn from `seed`.
double vae_full_loss(const VaeModel& vae, const AutoencoderParams& params, const BatchXd& data,
                     LossKind kind, std::uint64_t seed);

BaselineResult vae_train(const VaeModel& vae, const BatchXd& data, const BaselineConfig& cfg,
                         std::optional<AutoencoderParams> init = std::nullopt);

}  // namespace eae

#endif  // EAE_TRAINING_HPP
