#ifndef EAE_DATASETS_HPP
#define EAE_DATASETS_HPP

#include "eae/core.hpp"

#include <json.hpp>

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace eae {

struct Dataset {
  BatchXd inputs;
  std::optional<std::vector<int>> labels;
  std::optional<BatchXd> time_derivatives;
  /// Generator ground truth, where one exists.
  std::optional<BatchXd> latents;
  std::optional<BatchXd> latent_derivatives;
  std::optional<VectorXd> times;
  /// Generator name and arguments, or source files and their digests.
  nlohmann::json provenance = nlohmann::json::object();

  Index rows() const { return inputs.rows(); }
  Index width() const { return inputs.cols(); }
  /// Row counts agree across fields and inputs are finite.
  void validate() const;
  /// Rows in the given order, every present field carried along.
  Dataset subset(std::span<const Index> rows) const;
};

/// IDX image and label files (big-endian headers, unsigned bytes), pixels
/// scaled by 1/255.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

struct OscillatorOptions {
  double omega = 2.0;
  Index embed_dim = 100;
  Index samples = 1000;
  double dt = 0.01;
  std::uint64_t seed = 0;
  double radius = 1.0;
  /// 2 × embed_dim map from latents to inputs. Defaults to a seeded random
  /// map with orthonormal rows.
  std::optional<Eigen::MatrixXd> embedding;
};

/// z₁' = ωz₂, z₂' = −ωz₁ integrated by RK4 from a seeded phase, then
/// embedded linearly; derivatives come from the vector field itself.
Dataset gen_oscillator(const OscillatorOptions& opts);

struct LambdaOmegaOptions {
  Index grid_n = 32;
  double half_width = 10.0;  // domain is [-L, L]² with periodic boundaries
  double dt = 0.05;
  Index steps = 2000;          // recorded after burn-in
  Index burn_in = 0;
  Index snapshot_every = 10;
  double diffusion = 0.1;      // d₁ = d₂
  double beta = 1.0;           // ω(r) = −β r²
  bool zero_initial = false;
  std::uint64_t seed = 0;
  double initial_noise = 0.0;  // seeded perturbation of the spiral start
};

/// Largest stable dt·(8d/h² + 2 + |β|) for explicit RK4 on the 5-point Laplacian.
inline constexpr double kLambdaOmegaStabilityLimit = 2.7;

/// u_t = λ(r)u − ω(r)v + d∇²u, v_t = ω(r)u + λ(r)v + d∇²v with λ = 1 − r².
/// Inputs hold the u field per snapshot; time_derivatives hold u_t.
Dataset gen_lambda_omega(const LambdaOmegaOptions& opts);

struct GaussianMixtureOptions {
  Index components = 10;
  Index dim = 32;
  Index samples = 2000;
  std::uint64_t seed = 0;
  double mean_scale = 3.0;  // component means are N(0, mean_scale²) per coordinate
  double stddev = 0.5;
};

Dataset gen_gaussian_mixture(const GaussianMixtureOptions& opts);

struct LinearToyOptions {
  Index latent_dim = 2;
  Index dim = 8;
  Index samples = 256;
  double noise = 0.05;
  std::uint64_t seed = 0;
};

/// y = z·W + noise with z ~ N(0, I) and a seeded W.
Dataset gen_linear_toy(const LinearToyOptions& opts);

struct DatasetSplit {
  Dataset train;
  Dataset val;
  Dataset test;
};

/// Seeded permutation cut into floor(N·f_train), floor(N·f_val) and the rest.
DatasetSplit split(const Dataset& data, std::array<double, 3> fractions, std::uint64_t seed);

/// For time series: the last rows form the test part, the rest is split
/// randomly into train and validation.
DatasetSplit split_temporal(const Dataset& data, std::array<double, 3> fractions,
                            std::uint64_t seed);

void save_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace eae

#endif  // EAE_DATASETS_HPP
