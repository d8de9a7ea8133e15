#include "eae/diagnostics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <set>

namespace eae {

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "'");
  out << std::setprecision(17);
  return out;
}

}  // namespace

void ActivityReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out = open_csv(path);
  out << "dim,variance,active\n";
  for (Index d = 0; d < variance.size(); ++d) {
    out << d + 1 << ',' << variance[d] << ',' << (active[static_cast<std::size_t>(d)] ? 1 : 0)
        << '\n';
  }
}

ActivityReport latent_activity(const BatchXd& latents, double threshold) {
  if (latents.rows() < 2) throw PreconditionError("latent activity needs at least two rows");
  ActivityReport rep;
  rep.threshold = threshold;
  const Eigen::RowVectorXd mean = latents.colwise().mean();
  rep.variance = (latents.rowwise() - mean).colwise().squaredNorm().transpose() /
                 static_cast<double>(latents.rows());
  rep.active.resize(static_cast<std::size_t>(rep.variance.size()));
  for (Index d = 0; d < rep.variance.size(); ++d) {
    rep.active[static_cast<std::size_t>(d)] = rep.variance[d] > threshold;
    rep.active_count += rep.variance[d] > threshold ? 1 : 0;
  }
  return rep;
}

BatchXd flatten_latents(const LatentEnsemble& latents) {
  if (latents.empty()) throw PreconditionError("empty latent ensemble");
  const Index q = latents.front().rows();
  BatchXd out(q * static_cast<Index>(latents.size()), latents.front().cols());
  for (std::size_t m = 0; m < latents.size(); ++m) {
    if (latents[m].rows() != q || latents[m].cols() != out.cols()) {
      throw DimensionError("ensemble members disagree in latent shape");
    }
    out.middleRows(static_cast<Index>(m) * q, q) = latents[m];
  }
  return out;
}

VectorXd ensemble_mean_code(const LatentEnsemble& latents, std::span<const Index> queries) {
  if (latents.empty() || queries.empty()) {
    throw PreconditionError("ensemble mean code needs members and queries");
  }
  VectorXd total = VectorXd::Zero(latents.front().cols());
  for (Index q : queries) {
    VectorXd per_query = VectorXd::Zero(total.size());
    for (const auto& member : latents) per_query += member.row(q).transpose();
    total += per_query / static_cast<double>(latents.size());
  }
  return total / static_cast<double>(queries.size());
}

VectorXd ensemble_mean_code(const LatentEnsemble& latents, const std::vector<int>& labels,
                            int label) {
  std::vector<Index> rows;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) rows.push_back(static_cast<Index>(i));
  }
  if (rows.empty()) throw PreconditionError("no queries carry label " + std::to_string(label));
  return ensemble_mean_code(latents, rows);
}

VectorXd interpolate_codes(const VectorXd& z1, const VectorXd& z2, double alpha) {
  if (z1.size() != z2.size()) throw DimensionError("interpolated codes differ in length");
  if (alpha == 1.0) return z1;
  if (alpha == 0.0) return z2;
  return alpha * z1 + (1.0 - alpha) * z2;
}

double overlap_coefficient(const KdeCurve& p, const KdeCurve& q) {
  if (p.x.size() != q.x.size() || p.x.size() < 2 || (p.x - q.x).cwiseAbs().maxCoeff() > 0.0) {
    throw PreconditionError("overlap needs curves on the same grid");
  }
  const VectorXd m = p.density.cwiseMin(q.density);
  double acc = 0.0;
  for (Index i = 0; i + 1 < m.size(); ++i) acc += 0.5 * (m[i] + m[i + 1]) * (p.x[i + 1] - p.x[i]);
  return acc;
}

double ClassConditionalLatents::mean_pairwise_overlap(std::size_t dim_position) const {
  double sum = 0.0;
  int pairs = 0;
  for (std::size_t a = 0; a < classes.size(); ++a) {
    for (std::size_t b = a + 1; b < classes.size(); ++b) {
      sum += overlap_coefficient(entries[a][dim_position].curve, entries[b][dim_position].curve);
      ++pairs;
    }
  }
  if (pairs == 0) throw PreconditionError("overlap needs at least two classes");
  return sum / pairs;
}

void ClassConditionalLatents::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream samples = open_csv(dir / "latent_samples.csv");
  samples << "class,dim,value\n";
  for (std::size_t c = 0; c < classes.size(); ++c) {
    for (std::size_t d = 0; d < dims.size(); ++d) {
      const ClassDimension& e = entries[c][d];
      for (double v : e.samples) samples << classes[c] << ',' << dims[d] + 1 << ',' << v << '\n';
      std::ofstream curve = open_csv(dir / ("kde_class" + std::to_string(classes[c]) + "_dim" +
                                            std::to_string(dims[d] + 1) + ".csv"));
      curve << "x,density\n";
      for (Index i = 0; i < e.curve.x.size(); ++i) {
        curve << e.curve.x[i] << ',' << e.curve.density[i] << '\n';
      }
    }
  }
}

ClassConditionalLatents class_conditional_latents(const LatentEnsemble& latents,
                                                  const std::vector<int>& labels,
                                                  std::vector<Index> dims, Index curve_points) {
  const BatchXd flat = flatten_latents(latents);
  const Index q = latents.front().rows();
  if (static_cast<Index>(labels.size()) != q) {
    throw DimensionError("label count does not match the number of queries");
  }
  if (dims.empty()) {
    for (Index d = 0; d < flat.cols(); ++d) dims.push_back(d);
  }
  ClassConditionalLatents out;
  const std::set<int> distinct(labels.begin(), labels.end());
  out.classes.assign(distinct.begin(), distinct.end());
  out.dims = dims;
  out.activity = latent_activity(flat);
  out.entries.assign(out.classes.size(), std::vector<ClassDimension>(dims.size()));
  for (std::size_t c = 0; c < out.classes.size(); ++c) {
    for (std::size_t d = 0; d < dims.size(); ++d) {
      auto& s = out.entries[c][d].samples;
      for (std::size_t m = 0; m < latents.size(); ++m) {
        for (Index i = 0; i < q; ++i) {
          if (labels[static_cast<std::size_t>(i)] == out.classes[c]) {
            s.push_back(latents[m](i, dims[d]));
          }
        }
      }
    }
  }
  for (std::size_t d = 0; d < dims.size(); ++d) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    double pad = 0.0;
    for (std::size_t c = 0; c < out.classes.size(); ++c) {
      const GaussianKde kde(out.entries[c][d].samples);
      lo = std::min(lo, kde.min());
      hi = std::max(hi, kde.max());
      pad = std::max(pad, 3.0 * kde.bandwidth());
    }
    for (std::size_t c = 0; c < out.classes.size(); ++c) {
      out.entries[c][d].curve =
          kde_curve(out.entries[c][d].samples, lo - pad, hi + pad, curve_points);
    }
  }
  return out;
}

double test_mse(const AutoencoderModel& model, const AutoencoderParams& params,
                const BatchXd& data, LossKind kind) {
  if (data.rows() == 0) throw PreconditionError("test set is empty");
  const BatchXd recon =
      to_data_space(decode(model, params.decoder, encode(model, params.encoder, data)), kind);
  return (recon - data).squaredNorm() / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------
// Free-energy quadrature

namespace {

struct ProductGrid {
  std::vector<VectorXd> nodes;
  std::vector<double> weights;   // trapezoid weights, cell volume included
  std::vector<bool> boundary;
  double mean_spacing = 0.0;
};

ProductGrid trapezoid_grid(const VectorXd& lower, const VectorXd& upper, Index intervals) {
  const Index dim = lower.size();
  if (dim < 1 || dim > 2 || upper.size() != dim) {
    throw PreconditionError("quadrature supports one or two encoder coordinates");
  }
  if (intervals < 2) throw PreconditionError("quadrature needs at least two intervals");
  ProductGrid g;
  VectorXd h = (upper - lower) / static_cast<double>(intervals);
  g.mean_spacing = h.mean();
  const Index per_axis = intervals + 1;
  const Index total = dim == 1 ? per_axis : per_axis * per_axis;
  g.nodes.reserve(static_cast<std::size_t>(total));
  for (Index flat = 0; flat < total; ++flat) {
    VectorXd phi(dim);
    double w = 1.0;
    bool edge = false;
    Index rest = flat;
    for (Index d = 0; d < dim; ++d) {
      const Index i = rest % per_axis;
      rest /= per_axis;
      phi[d] = lower[d] + h[d] * static_cast<double>(i);
      const bool end = i == 0 || i == intervals;
      w *= end ? 0.5 * h[d] : h[d];
      edge = edge || end;
    }
    g.nodes.push_back(std::move(phi));
    g.weights.push_back(w);
    g.boundary.push_back(edge);
  }
  return g;
}

struct GibbsSums {
  double log_z = 0.0;
  VectorXd mean_grad;
  double boundary_fraction = 0.0;
};

GibbsSums gibbs_sums(const ToyLoss& toy, const ProductGrid& g, const VectorXd& theta,
                     double beta, bool with_grad) {
  std::vector<double> loss(g.nodes.size());
  double l_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    loss[i] = toy.loss(g.nodes[i], theta);
    if (!std::isfinite(loss[i])) throw NumericError("toy loss '" + toy.name + "' is not finite");
    l_min = std::min(l_min, loss[i]);
  }
  GibbsSums s;
  s.mean_grad = VectorXd::Zero(theta.size());
  double total = 0.0;
  double edge = 0.0;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const double p = g.weights[i] * std::exp(-beta * (loss[i] - l_min));
    total += p;
    if (g.boundary[i]) edge += p;
    if (with_grad) s.mean_grad += p * toy.grad_theta(g.nodes[i], theta);
  }
  s.mean_grad /= total;
  s.log_z = std::log(total) - beta * l_min;
  s.boundary_fraction = edge / total;
  return s;
}

}  // namespace

FreeEnergyResult free_energy_check(const ToyLoss& toy, const VectorXd& theta, double beta,
                                   Index intervals, std::optional<double> fd_step) {
  if (toy.encoder_dim + toy.decoder_dim > 3) {
    throw PreconditionError("quadrature checks are limited to three parameters in total");
  }
  if (theta.size() != toy.decoder_dim) throw DimensionError("decoder point has the wrong size");
  if (!(beta > 0.0)) throw PreconditionError("beta must be > 0");
  const ProductGrid grid = trapezoid_grid(toy.lower, toy.upper, intervals);
  const GibbsSums centre = gibbs_sums(toy, grid, theta, beta, true);
  if (centre.boundary_fraction > kMaxBoundaryMass) {
    throw GridTooSmallError("grid for '" + toy.name + "' is too small: boundary holds " +
                                std::to_string(centre.boundary_fraction) + " of the mass",
                            centre.boundary_fraction);
  }
  FreeEnergyResult r;
  r.fd_step = fd_step.value_or(grid.mean_spacing);
  r.free_energy = -centre.log_z / beta;
  r.grad_gibbs = centre.mean_grad;
  r.grad_fd.resize(theta.size());
  for (Index i = 0; i < theta.size(); ++i) {
    VectorXd up = theta;
    VectorXd down = theta;
    up[i] += r.fd_step;
    down[i] -= r.fd_step;
    const double f_up = -gibbs_sums(toy, grid, up, beta, false).log_z / beta;
    const double f_down = -gibbs_sums(toy, grid, down, beta, false).log_z / beta;
    r.grad_fd[i] = (f_up - f_down) / (2.0 * r.fd_step);
  }
  r.discrepancy = (r.grad_fd - r.grad_gibbs).cwiseAbs().maxCoeff();
  return r;
}

GridConvergence free_energy_convergence(const ToyLoss& toy, Index base_intervals, int levels) {
  if (levels < 2) throw PreconditionError("convergence study needs at least two levels");
  GridConvergence c;
  Index n = base_intervals;
  for (int l = 0; l < levels; ++l, n *= 2) {
    c.intervals.push_back(n);
    c.discrepancy.push_back(free_energy_check(toy, toy.theta0, toy.beta, n).discrepancy);
    if (l > 0) {
      c.order.push_back(std::log2(c.discrepancy[static_cast<std::size_t>(l - 1)] /
                                  c.discrepancy[static_cast<std::size_t>(l)]));
    }
  }
  return c;
}

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

ToyLoss gaussian_scale_toy(double theta, double beta) {
  ToyLoss t;
  t.name = "gaussian_scale";
  t.loss = [](const VectorXd& p, const VectorXd& th) { return 0.5 * th[0] * th[0] * p[0] * p[0]; };
  t.grad_theta = [](const VectorXd& p, const VectorXd& th) { return vec({th[0] * p[0] * p[0]}); };
  // Wide enough for six standard deviations at the given point.
  const double half = 8.0 / (std::abs(theta) * std::sqrt(beta));
  t.lower = vec({-half});
  t.upper = vec({half});
  t.theta0 = vec({theta});
  t.beta = beta;
  return t;
}

ToyLoss translation_toy() {
  ToyLoss t;
  t.name = "translation";
  t.loss = [](const VectorXd& p, const VectorXd& th) { return 0.5 * (p[0] - th[0]) * (p[0] - th[0]); };
  t.grad_theta = [](const VectorXd& p, const VectorXd& th) { return vec({th[0] - p[0]}); };
  t.lower = vec({-10.0});
  t.upper = vec({10.0});
  t.theta0 = vec({0.3});
  return t;
}

ToyLoss linear_autoencoder_toy() {
  // Encoder z = φy, decoder ŷ = ϑz on five fixed scalars.
  static constexpr std::array<double, 5> ys{0.5, -1.2, 0.8, 1.5, -0.3};
  double s = 0.0;
  for (double y : ys) s += y * y;
  ToyLoss t;
  t.name = "linear_autoencoder";
  t.loss = [s](const VectorXd& p, const VectorXd& th) {
    const double r = 1.0 - th[0] * p[0];
    return 0.5 * s * r * r;
  };
  t.grad_theta = [s](const VectorXd& p, const VectorXd& th) {
    return vec({-s * (1.0 - th[0] * p[0]) * p[0]});
  };
  t.lower = vec({-3.0});
  t.upper = vec({5.0});
  t.theta0 = vec({1.2});
  return t;
}

std::vector<ToyLoss> random_toy_losses(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(0.5, 1.5);
  std::uniform_real_distribution<double> point(-1.0, 1.0);
  std::vector<ToyLoss> toys;

  {
    const double a = coef(rng), b = coef(rng), c = coef(rng);
    ToyLoss t;
    t.name = "quartic_shift";
    t.loss = [=](const VectorXd& p, const VectorXd& th) {
      const double d = p[0] - th[0];
      return 0.5 * a * d * d + 0.25 * b * std::pow(p[0], 4) + c * th[0] * p[0];
    };
    t.grad_theta = [=](const VectorXd& p, const VectorXd& th) {
      return vec({-a * (p[0] - th[0]) + c * p[0]});
    };
    t.lower = vec({-6.0});
    t.upper = vec({6.0});
    t.theta0 = vec({point(rng)});
    toys.push_back(std::move(t));
  }
  {
    const double a = coef(rng), b = coef(rng), c = coef(rng);
    ToyLoss t;
    t.name = "quartic_sine";
    t.decoder_dim = 2;
    t.loss = [=](const VectorXd& p, const VectorXd& th) {
      return 0.25 * b * std::pow(p[0], 4) + 0.5 * (th[0] * th[0] + a) * p[0] * p[0] +
             c * th[1] * std::sin(p[0]);
    };
    t.grad_theta = [=](const VectorXd& p, const VectorXd& th) {
      return vec({th[0] * p[0] * p[0], c * std::sin(p[0])});
    };
    t.lower = vec({-5.0});
    t.upper = vec({5.0});
    t.theta0 = vec({point(rng), point(rng)});
    toys.push_back(std::move(t));
  }
  {
    const double a = coef(rng), b = coef(rng), c = coef(rng);
    ToyLoss t;
    t.name = "coupled_quadratic";
    t.encoder_dim = 2;
    t.loss = [=](const VectorXd& p, const VectorXd& th) {
      const double r = p[1] - th[0] * p[0];
      return 0.5 * a * p[0] * p[0] + 0.5 * b * r * r +
             0.25 * c * (std::pow(p[0], 4) + std::pow(p[1], 4));
    };
    t.grad_theta = [=](const VectorXd& p, const VectorXd& th) {
      return vec({-b * (p[1] - th[0] * p[0]) * p[0]});
    };
    t.lower = vec({-5.0, -5.0});
    t.upper = vec({5.0, 5.0});
    t.theta0 = vec({point(rng)});
    toys.push_back(std::move(t));
  }
  {
    const double a = coef(rng), c = coef(rng);
    ToyLoss t;
    t.name = "cosine_coupled";
    t.encoder_dim = 2;
    t.loss = [=](const VectorXd& p, const VectorXd& th) {
      return 0.5 * (1.0 + th[0] * th[0]) * (p[0] * p[0] + a * p[1] * p[1]) +
             c * std::cos(p[0] + th[0] * p[1]);
    };
    t.grad_theta = [=](const VectorXd& p, const VectorXd& th) {
      return vec({th[0] * (p[0] * p[0] + a * p[1] * p[1]) - c * std::sin(p[0] + th[0] * p[1]) * p[1]});
    };
    t.lower = vec({-9.0, -9.0});
    t.upper = vec({9.0, 9.0});
    t.theta0 = vec({point(rng)});
    toys.push_back(std::move(t));
  }
  {
    const double b = coef(rng);
    ToyLoss t;
    t.name = "tilted_double_well";
    t.decoder_dim = 2;
    t.loss = [=](const VectorXd& p, const VectorXd& th) {
      const double w = p[0] * p[0] - 1.0;
      return b * w * w + th[0] * p[0] + 0.5 * th[1] * th[1] * p[0] * p[0];
    };
    t.grad_theta = [](const VectorXd& p, const VectorXd& th) {
      return vec({p[0], th[1] * p[0] * p[0]});
    };
    t.lower = vec({-4.0});
    t.upper = vec({4.0});
    t.theta0 = vec({point(rng), point(rng)});
    toys.push_back(std::move(t));
  }
  return toys;
}

// ---------------------------------------------------------------------------
// Collective-variable marginals

namespace {

constexpr std::array<double, 5> kGaussNodes{0.0, -0.5384693101056831, 0.5384693101056831,
                                            -0.9061798459386640, 0.9061798459386640};
constexpr std::array<double, 5> kGaussWeights{0.5688888888888889, 0.4786286704993665,
                                              0.4786286704993665, 0.2369268850561891,
                                              0.2369268850561891};

struct Binning {
  double lo;
  double width;
  Index bins;

  Index of(double theta) const {
    const auto b = static_cast<Index>(std::floor((theta - lo) / width));
    return std::clamp<Index>(b, 0, bins - 1);
  }
  double edge(Index k) const { return lo + width * static_cast<double>(k); }
};

double total_variation(const VectorXd& p, const VectorXd& q) { return 0.5 * (p - q).cwiseAbs().sum(); }

// Splits [a, b] at every point where θ crosses an interior bin edge.
std::vector<double> crossing_points(const std::function<double(const VectorXd&)>& cv, double a,
                                    double b, const Binning& bins) {
  constexpr int kProbe = 8;
  std::vector<double> cuts{a, b};
  VectorXd x(1);
  const auto theta_at = [&](double t) {
    x[0] = t;
    return cv(x);
  };
  double t0 = a;
  double v0 = theta_at(a);
  for (int s = 1; s <= kProbe; ++s) {
    const double t1 = a + (b - a) * s / kProbe;
    const double v1 = theta_at(t1);
    const double lo = std::min(v0, v1);
    const double hi = std::max(v0, v1);
    for (Index k = 1; k < bins.bins; ++k) {
      const double e = bins.edge(k);
      if (!(e > lo && e < hi)) continue;
      double l = t0;
      double r = t1;
      const bool rising = v1 > v0;
      for (int it = 0; it < 80; ++it) {
        const double m = 0.5 * (l + r);
        if ((theta_at(m) < e) == rising) l = m;
        else r = m;
      }
      cuts.push_back(0.5 * (l + r));
    }
    t0 = t1;
    v0 = v1;
  }
  std::sort(cuts.begin(), cuts.end());
  return cuts;
}

}  // namespace

CvMarginalResult cv_marginal_check(const CvToy& toy) {
  if (toy.encoder_dim < 1 || toy.encoder_dim > 2 || toy.lower.size() != toy.encoder_dim ||
      toy.upper.size() != toy.encoder_dim) {
    throw PreconditionError("collective-variable checks support one or two coordinates");
  }
  if (toy.bins < 2 || toy.cells < 2 || !(toy.cv_upper > toy.cv_lower) || !(toy.beta > 0.0)) {
    throw PreconditionError("invalid binning or quadrature settings for '" + toy.name + "'");
  }
  if (toy.encoder_dim == 2 && !toy.restricted_density) {
    throw PreconditionError("two-dimensional toy '" + toy.name + "' needs a restricted density");
  }
  const Binning bins{toy.cv_lower, (toy.cv_upper - toy.cv_lower) / static_cast<double>(toy.bins),
                     toy.bins};
  const Index dim = toy.encoder_dim;
  const VectorXd h = (toy.upper - toy.lower) / static_cast<double>(toy.cells);

  // Loss values at the Gauss nodes, kept so both routes share one shift.
  const Index cells_total = dim == 1 ? toy.cells : toy.cells * toy.cells;
  const Index per_cell = dim == 1 ? 5 : 25;
  std::vector<double> loss(static_cast<std::size_t>(cells_total * per_cell));
  std::vector<double> weight(loss.size());
  std::vector<double> cv(loss.size());
  std::vector<bool> outer(loss.size());
  VectorXd phi(dim);
  double l_min = std::numeric_limits<double>::infinity();
  for (Index c = 0; c < cells_total; ++c) {
    const Index ci = c % toy.cells;
    const Index cj = c / toy.cells;
    for (Index n = 0; n < per_cell; ++n) {
      const auto ni = static_cast<std::size_t>(n % 5);
      const auto nj = static_cast<std::size_t>(n / 5);
      phi[0] = toy.lower[0] + h[0] * (static_cast<double>(ci) + 0.5 * (kGaussNodes[ni] + 1.0));
      double w = 0.5 * h[0] * kGaussWeights[ni];
      bool edge = ci == 0 || ci == toy.cells - 1;
      if (dim == 2) {
        phi[1] = toy.lower[1] + h[1] * (static_cast<double>(cj) + 0.5 * (kGaussNodes[nj] + 1.0));
        w *= 0.5 * h[1] * kGaussWeights[nj];
        edge = edge || cj == 0 || cj == toy.cells - 1;
      }
      const auto k = static_cast<std::size_t>(c * per_cell + n);
      loss[k] = toy.loss(phi);
      cv[k] = toy.cv(phi);
      weight[k] = w;
      outer[k] = edge;
      l_min = std::min(l_min, loss[k]);
    }
  }

  CvMarginalResult r;
  r.bin_edges = VectorXd::LinSpaced(toy.bins + 1, toy.cv_lower, toy.cv_upper);
  r.histogram = VectorXd::Zero(toy.bins);
  double boundary = 0.0;
  for (std::size_t k = 0; k < loss.size(); ++k) {
    const double p = weight[k] * std::exp(-toy.beta * (loss[k] - l_min));
    r.histogram[bins.of(cv[k])] += p;
    if (outer[k]) boundary += p;
  }
  const double mass = r.histogram.sum();
  if (!toy.compact && boundary / mass > kMaxBoundaryMass) {
    throw GridTooSmallError("grid for '" + toy.name + "' is too small", boundary / mass);
  }
  r.histogram /= mass;

  r.restricted = VectorXd::Zero(toy.bins);
  if (dim == 1) {
    VectorXd x(1);
    for (Index c = 0; c < toy.cells; ++c) {
      const double a = toy.lower[0] + h[0] * static_cast<double>(c);
      const std::vector<double> cuts = crossing_points(toy.cv, a, a + h[0], bins);
      for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
        const double len = cuts[s + 1] - cuts[s];
        if (len <= 0.0) continue;
        x[0] = 0.5 * (cuts[s] + cuts[s + 1]);
        const Index b = bins.of(toy.cv(x));
        double piece = 0.0;
        for (std::size_t n = 0; n < 5; ++n) {
          x[0] = cuts[s] + 0.5 * len * (kGaussNodes[n] + 1.0);
          piece += 0.5 * len * kGaussWeights[n] * std::exp(-toy.beta * (toy.loss(x) - l_min));
        }
        r.restricted[b] += piece;
      }
    }
  } else {
    constexpr int kSub = 4;
    for (Index b = 0; b < toy.bins; ++b) {
      const double sub = bins.width / kSub;
      for (int s = 0; s < kSub; ++s) {
        const double a = bins.edge(b) + sub * s;
        for (std::size_t n = 0; n < 5; ++n) {
          r.restricted[b] +=
              0.5 * sub * kGaussWeights[n] * toy.restricted_density(a + 0.5 * sub * (kGaussNodes[n] + 1.0));
        }
      }
    }
  }
  r.restricted /= r.restricted.sum();
  r.total_variation = total_variation(r.histogram, r.restricted);
  return r;
}

CvToy identity_cv_toy() {
  CvToy t;
  t.name = "identity_tilted_quartic";
  t.loss = [](const VectorXd& p) { return 0.25 * std::pow(p[0], 4) + 0.5 * p[0] * p[0] - 0.4 * p[0]; };
  t.cv = [](const VectorXd& p) { return p[0]; };
  t.lower = vec({-4.0});
  t.upper = vec({4.0});
  t.cv_lower = -4.0;
  t.cv_upper = 4.0;
  t.beta = 2.0;
  t.bins = 200;
  t.cells = 2000;
  return t;
}

CvToy double_well_cv_toy() {
  CvToy t;
  t.name = "double_well_squared";
  t.loss = [](const VectorXd& p) {
    const double w = p[0] * p[0] - 1.0;
    return w * w;
  };
  t.cv = [](const VectorXd& p) { return p[0] * p[0]; };
  t.lower = vec({-2.0});
  t.upper = vec({2.0});
  t.cv_lower = 0.0;
  t.cv_upper = 4.0;
  t.beta = 3.0;
  t.bins = 200;
  t.cells = 2000;
  return t;
}

CvToy constant_energy_cv_toy() {
  CvToy t;
  t.name = "constant_energy_disk";
  t.encoder_dim = 2;
  t.loss = [](const VectorXd&) { return 0.0; };
  t.cv = [](const VectorXd& p) { return p.squaredNorm(); };
  t.lower = vec({-1.0, -1.0});
  t.upper = vec({1.0, 1.0});
  t.cv_lower = 0.0;
  t.cv_upper = 2.0;
  t.bins = 100;
  t.cells = 400;
  t.compact = true;
  // d/dθ of the area of {|φ|² ≤ θ} inside the square.
  t.restricted_density = [](double theta) {
    if (theta <= 1.0) return std::numbers::pi;
    if (theta >= 2.0) return 0.0;
    return std::numbers::pi - 4.0 * std::acos(1.0 / std::sqrt(theta));
  };
  return t;
}

CvToy sine_cv_toy() {
  CvToy t;
  t.name = "quartic_sine_cv";
  t.loss = [](const VectorXd& p) { return 0.5 * p[0] * p[0] + 0.25 * std::pow(p[0], 4); };
  t.cv = [](const VectorXd& p) { return std::sin(p[0]); };
  t.lower = vec({-4.0});
  t.upper = vec({4.0});
  t.cv_lower = -1.0;
  t.cv_upper = 1.0;
  t.bins = 200;
  t.cells = 2000;
  return t;
}

std::vector<CvToy> shipped_cv_toys() {
  return {identity_cv_toy(), double_well_cv_toy(), constant_energy_cv_toy(), sine_cv_toy()};
}

}  // namespace eae
