#ifndef EAE_DYNAMICS_HPP
#define EAE_DYNAMICS_HPP

#include "eae/basis.hpp"
#include "eae/model.hpp"
#include "eae/training.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace eae {

/// Ξ: one row per library term, one column per latent coordinate, so that
/// ż = Θ(z)·Ξ row by row.
using CoefficientMatrix = Eigen::MatrixXd;
using CoefficientMask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct DynamicsWeights {
  double lambda1 = 1.0;
  double lambda2 = 20.0;

  void validate() const;
};

/// Condition number above which Θ is treated as rank deficient.
inline constexpr double kMaxConditionNumber = 1e12;

/// Least-squares Ξ for Θ(ẑ)Ξ ≈ ż̂, column by column, via Householder QR.
CoefficientMatrix estimate_xi(const BasisLibrary& lib, const BatchXd& z, const BatchXd& z_dot);

/// Encoder output and its tangent along the data time derivative.
struct LatentTrajectory {
  BatchXd z;
  BatchXd z_dot;
};

LatentTrajectory encode_with_derivative(const AutoencoderModel& model, const ParamVector& encoder,
                                        const BatchXd& x, const BatchXd& x_dot);

/// Decoder Jacobian at E(x) applied to Θ(E(x))Ξ.
BatchXd predicted_xdot(const AutoencoderModel& model, const AutoencoderParams& params,
                       const BatchXd& x, const BasisLibrary& lib, const CoefficientMatrix& xi);

/// λ₁·mse(x, x̂) + λ₂·mse(ẋ, ẋ̂) with Ξ re-solved from the batch.
double dynamics_loss(const AutoencoderModel& model, const AutoencoderParams& params,
                     const BatchXd& x, const BatchXd& x_dot, const BasisLibrary& lib,
                     const DynamicsWeights& weights);

/// Value and exact gradients, including the dependence of Ξ on the encoder.
LossGrad dynamics_loss_grad(const AutoencoderModel& model, const AutoencoderParams& params,
                            const BatchXd& x, const BatchXd& x_dot, const BasisLibrary& lib,
                            const DynamicsWeights& weights);

class DynamicsObjective final : public EaeObjective {
 public:
  DynamicsObjective(AutoencoderModel model, const BatchXd& x, const BatchXd& x_dot,
                    BasisLibrary lib, DynamicsWeights weights);
  Index rows() const override { return x_.rows(); }
  LossGrad evaluate(const AutoencoderParams& params, std::span<const Index> rows) const override;
  double full_loss(const AutoencoderParams& params) const override;

 private:
  AutoencoderModel model_;
  const BatchXd& x_;
  const BatchXd& x_dot_;
  BasisLibrary lib_;
  DynamicsWeights weights_;
};

/// Magnitude a coefficient's mean and mode must both exceed to count.
inline constexpr double kSignificanceThreshold = 0.1;

struct CoefficientStats {
  CoefficientMatrix mean;
  CoefficientMatrix mode;
  CoefficientMask significant;
};

CoefficientStats coefficient_stats(const std::vector<CoefficientMatrix>& samples,
                                   double threshold = kSignificanceThreshold);

struct CorrelationReport {
  Eigen::MatrixXd rho;
  std::vector<std::string> labels;
  std::vector<bool> zero_variance;  // such entries correlate as 0 with everything else
};

/// Pearson correlation between the columns of `observations` (rows are samples).
CorrelationReport correlation_matrix(const Eigen::MatrixXd& observations,
                                     std::vector<std::string> labels = {});

/// Correlation across samples between the selected entries of Ξ (all entries
/// when no mask is given), flattened term-major.
CorrelationReport coefficient_correlation(const std::vector<CoefficientMatrix>& samples,
                                          const BasisLibrary& lib,
                                          const std::optional<CoefficientMask>& select = {});

/// Classical RK4 for ż = Θ(z)Ξ; row t of the result is the state after t steps.
BatchXd integrate_latent_ode(const BasisLibrary& lib, const CoefficientMatrix& xi,
                             const VectorXd& z0, double dt, Index steps);

/// Jacobian of the vector field at z = 0, keeping only the masked entries.
Eigen::MatrixXd linearize_at_origin(const BasisLibrary& lib, const CoefficientMatrix& xi,
                                    const std::optional<CoefficientMask>& select = {});

/// Columns: term, then mean/mode/significant per latent derivative.
void write_coefficient_table(const std::filesystem::path& path, const BasisLibrary& lib,
                             const CoefficientStats& stats);

void write_correlation_csv(const std::filesystem::path& path, const CorrelationReport& report);

}  // namespace eae

#endif  // EAE_DYNAMICS_HPP
