#ifndef EAE_DIAGNOSTICS_HPP
#define EAE_DIAGNOSTICS_HPP

#include "eae/kde.hpp"
#include "eae/model.hpp"
#include "eae/training.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace eae {

inline constexpr double kActivityThreshold = 0.01;

struct ActivityReport {
  VectorXd variance;  // population variance per latent dimension
  std::vector<bool> active;
  double threshold = kActivityThreshold;
  Index active_count = 0;

  Index total() const { return variance.size(); }
  /// Header `dim,variance,active`, dimensions numbered from 1.
  void write_csv(const std::filesystem::path& path) const;
};

ActivityReport latent_activity(const BatchXd& latents, double threshold = kActivityThreshold);

/// Every (member, query) latent stacked into one sample.
BatchXd flatten_latents(const LatentEnsemble& latents);

/// Mean over members for each selected query, then over the queries.
VectorXd ensemble_mean_code(const LatentEnsemble& latents, std::span<const Index> queries);
VectorXd ensemble_mean_code(const LatentEnsemble& latents, const std::vector<int>& labels,
                            int label);

/// α·z₁ + (1 − α)·z₂.
VectorXd interpolate_codes(const VectorXd& z1, const VectorXd& z2, double alpha);

struct ClassDimension {
  std::vector<double> samples;
  KdeCurve curve;
};

struct ClassConditionalLatents {
  std::vector<int> classes;                // sorted distinct labels
  std::vector<Index> dims;
  /// [class position][dim position]; all curves of one dimension share abscissae.
  std::vector<std::vector<ClassDimension>> entries;
  ActivityReport activity;                 // over every latent, all classes pooled

  /// Mean over class pairs of the overlap coefficient in one dimension.
  double mean_pairwise_overlap(std::size_t dim_position) const;
  /// One two-column CSV per (class, dim) plus a samples CSV, under `dir`.
  void write(const std::filesystem::path& dir) const;
};

ClassConditionalLatents class_conditional_latents(const LatentEnsemble& latents,
                                                  const std::vector<int>& labels,
                                                  std::vector<Index> dims = {},
                                                  Index curve_points = 256);

/// ∫ min(p, q) by the trapezoid rule on a shared grid.
double overlap_coefficient(const KdeCurve& p, const KdeCurve& q);

/// Per-pixel mean squared error in data space.
double test_mse(const AutoencoderModel& model, const AutoencoderParams& params,
                const BatchXd& data, LossKind kind);

class GridTooSmallError : public PreconditionError {
 public:
  GridTooSmallError(const std::string& what, double boundary_fraction)
      : PreconditionError(what), fraction_(boundary_fraction) {}
  double boundary_fraction() const { return fraction_; }

 private:
  double fraction_;
};

/// A loss over encoder coordinates φ and decoder coordinates ϑ, small enough
/// for product-grid quadrature over φ.
struct ToyLoss {
  std::string name;
  Index encoder_dim = 1;
  Index decoder_dim = 1;
  std::function<double(const VectorXd& phi, const VectorXd& theta)> loss;
  std::function<VectorXd(const VectorXd& phi, const VectorXd& theta)> grad_theta;
  VectorXd lower;   // integration box over φ
  VectorXd upper;
  VectorXd theta0;  // decoder point to check at
  double beta = 1.0;
};

/// Maximum share of the Gibbs mass allowed on the outer layer of grid nodes.
inline constexpr double kMaxBoundaryMass = 1e-6;

struct FreeEnergyResult {
  double free_energy = 0.0;
  VectorXd grad_fd;     // central differences of −(1/β) log Z
  VectorXd grad_gibbs;  // quadrature-weighted E[∇_ϑ L]
  double discrepancy = 0.0;  // max-abs difference of the two gradients
  double fd_step = 0.0;
};

/// Trapezoid quadrature with `intervals` cells per φ axis. The default
/// finite-difference step equals the mean grid spacing, which makes the
/// discrepancy shrink quadratically as the grid is refined.
FreeEnergyResult free_energy_check(const ToyLoss& toy, const VectorXd& theta, double beta,
                                   Index intervals, std::optional<double> fd_step = {});

struct GridConvergence {
  std::vector<Index> intervals;
  std::vector<double> discrepancy;
  std::vector<double> order;  // log2 ratio of consecutive discrepancies
};

GridConvergence free_energy_convergence(const ToyLoss& toy, Index base_intervals, int levels);

/// ½ϑ²φ² with its closed-form free energy and gradient.
ToyLoss gaussian_scale_toy(double theta = 1.5, double beta = 2.0);
/// ½(φ − ϑ)²; Z does not depend on ϑ.
ToyLoss translation_toy();
/// Squared reconstruction error of a scalar linear autoencoder on fixed data.
ToyLoss linear_autoencoder_toy();
/// Five seeded random losses with at most three parameters in total.
std::vector<ToyLoss> random_toy_losses(std::uint64_t seed);

/// A scalar collective variable θ(φ) over a one- or two-dimensional φ box.
struct CvToy {
  std::string name;
  Index encoder_dim = 1;
  std::function<double(const VectorXd& phi)> loss;
  std::function<double(const VectorXd& phi)> cv;
  VectorXd lower;
  VectorXd upper;
  double cv_lower = 0.0;  // histogram range in θ
  double cv_upper = 1.0;
  double beta = 1.0;
  Index bins = 200;
  Index cells = 2000;     // quadrature cells per φ axis
  /// Bounded φ box with no decay requirement at the boundary.
  bool compact = false;
  /// Unnormalised exp(−βF(θ)) as a function of θ. Required for two-dimensional
  /// φ, where no restricted integral over level sets is computed directly.
  std::function<double(double)> restricted_density;
};

struct CvMarginalResult {
  VectorXd bin_edges;
  VectorXd histogram;   // Gibbs measure binned by θ, normalised
  VectorXd restricted;  // bin integrals of exp(−βF), normalised
  double total_variation = 0.0;
};

CvMarginalResult cv_marginal_check(const CvToy& toy);

/// θ = φ on a tilted quartic, bins aligned with quadrature cells.
CvToy identity_cv_toy();
/// (φ² − 1)² with θ = φ².
CvToy double_well_cv_toy();
/// Constant loss on [−1, 1]² with θ = φ₁² + φ₂², where p(θ) is the level-set length.
CvToy constant_energy_cv_toy();
/// ½φ² + ¼φ⁴ with the non-monotone θ = sin φ.
CvToy sine_cv_toy();

std::vector<CvToy> shipped_cv_toys();

}  // namespace eae

#endif  // EAE_DIAGNOSTICS_HPP
