#include "eae/kde.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace eae {

namespace {

// Used when all samples coincide, so the curve is a narrow spike that still
// integrates to one on a grid.
constexpr double kSpikeWidth = 1e-3;

}  // namespace

double silverman_bandwidth(std::span<const double> samples) {
  const auto n = static_cast<double>(samples.size());
  if (samples.size() < 2) throw PreconditionError("bandwidth needs at least two samples");
  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= n;
  double ss = 0.0;
  for (double s : samples) ss += (s - mean) * (s - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  return sd * std::pow(3.0 * n / 4.0, -0.2);
}

GaussianKde::GaussianKde(std::span<const double> samples)
    : samples_(samples.begin(), samples.end()) {
  if (samples_.empty()) throw PreconditionError("KDE of an empty sample");
  for (double s : samples_) {
    if (!std::isfinite(s)) throw DomainError("KDE sample is not finite");
  }
  const auto [lo, hi] = std::minmax_element(samples_.begin(), samples_.end());
  min_ = *lo;
  max_ = *hi;
  degenerate_ = min_ == max_;
  bandwidth_ = degenerate_ ? kSpikeWidth * std::max(1.0, std::abs(min_))
                           : silverman_bandwidth(samples_);
}

double GaussianKde::operator()(double x) const {
  const double inv_h = 1.0 / bandwidth_;
  double acc = 0.0;
  for (double s : samples_) {
    const double u = (x - s) * inv_h;
    acc += std::exp(-0.5 * u * u);
  }
  return acc * inv_h / (static_cast<double>(samples_.size()) * std::sqrt(2.0 * std::numbers::pi));
}

double kde_mode(std::span<const double> samples, Index grid_points) {
  const GaussianKde kde(samples);
  if (kde.degenerate()) return kde.min();
  if (grid_points < 2) throw PreconditionError("mode search needs at least two grid points");
  double best_x = kde.min();
  double best = -1.0;
  for (Index i = 0; i < grid_points; ++i) {
    const double x = kde.min() + (kde.max() - kde.min()) * static_cast<double>(i) /
                                     static_cast<double>(grid_points - 1);
    const double d = kde(x);
    if (d > best) {
      best = d;
      best_x = x;
    }
  }
  return best_x;
}

KdeCurve kde_curve(std::span<const double> samples, double lo, double hi, Index points) {
  if (points < 2 || !(hi > lo)) throw PreconditionError("KDE curve needs hi > lo and >= 2 points");
  const GaussianKde kde(samples);
  KdeCurve curve{VectorXd::LinSpaced(points, lo, hi), VectorXd(points)};
  for (Index i = 0; i < points; ++i) curve.density[i] = kde(curve.x[i]);
  return curve;
}

KdeCurve kde_curve(std::span<const double> samples, Index points) {
  const GaussianKde kde(samples);
  const double pad = 3.0 * kde.bandwidth();
  return kde_curve(samples, kde.min() - pad, kde.max() + pad, points);
}

}  // namespace eae
