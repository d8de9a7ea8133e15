#ifndef EAE_KDE_HPP
#define EAE_KDE_HPP

#include "eae/core.hpp"

#include <span>
#include <vector>

namespace eae {

/// One-dimensional Gaussian kernel density estimate with Silverman's bandwidth.
class GaussianKde {
 public:
  explicit GaussianKde(std::span<const double> samples);

  double operator()(double x) const;
  double bandwidth() const { return bandwidth_; }
  double min() const { return min_; }
  double max() const { return max_; }
  /// True when every sample is identical; the density is then a spike.
  bool degenerate() const { return degenerate_; }

 private:
  std::vector<double> samples_;
  double bandwidth_;
  double min_;
  double max_;
  bool degenerate_;
};

/// (3n/4)^(-1/5) times the sample standard deviation (divisor n-1).
double silverman_bandwidth(std::span<const double> samples);

/// Argmax of the KDE over an evenly spaced grid spanning [min, max].
double kde_mode(std::span<const double> samples, Index grid_points = 1024);

struct KdeCurve {
  VectorXd x;
  VectorXd density;
};

/// Density on `points` evenly spaced abscissae. The span is [lo, hi] when
/// given, otherwise the sample range padded by three bandwidths.
KdeCurve kde_curve(std::span<const double> samples, Index points = 256);
KdeCurve kde_curve(std::span<const double> samples, double lo, double hi, Index points);

}  // namespace eae

#endif  // EAE_KDE_HPP
