#include "eae/dynamics.hpp"
#include "eae/kde.hpp"
#include "eae/mlp.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

namespace eae {

void DynamicsWeights::validate() const {
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw ConfigError("dynamics weights must be >= 0");
  if (lambda1 == 0.0 && lambda2 == 0.0) throw ConfigError("dynamics weights cannot both be zero");
}

namespace {

struct XiSolve {
  CoefficientMatrix xi;
  Eigen::MatrixXd r;  // upper-triangular factor of Θ, p × p
};

XiSolve solve_xi(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& z_dot) {
  const Index p = theta.cols();
  if (theta.rows() < p) {
    throw PreconditionError("coefficient estimation needs at least " + std::to_string(p) +
                            " rows, got " + std::to_string(theta.rows()));
  }
  if (z_dot.rows() != theta.rows()) {
    throw DimensionError("latent and latent-derivative row counts differ");
  }
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(theta);
  Eigen::MatrixXd r = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(r).singularValues();
  const double cond = sv[p - 1] > 0.0 ? sv[0] / sv[p - 1] : std::numeric_limits<double>::infinity();
  if (!(cond <= kMaxConditionNumber)) {
    throw SingularityError("basis matrix is rank deficient (condition number " +
                               std::to_string(cond) + ")",
                           cond);
  }
  return {qr.solve(z_dot), std::move(r)};
}

}  // namespace

CoefficientMatrix estimate_xi(const BasisLibrary& lib, const BatchXd& z, const BatchXd& z_dot) {
  if (z.rows() != z_dot.rows() || z.cols() != z_dot.cols()) {
    throw DimensionError("latents and latent derivatives must have equal shapes");
  }
  return solve_xi(eval_theta(lib, z), z_dot).xi;
}

LatentTrajectory encode_with_derivative(const AutoencoderModel& model, const ParamVector& encoder,
                                        const BatchXd& x, const BatchXd& x_dot) {
  TangentTrace<double> t = tangent_trace(model.encoder, encoder, x, x_dot);
  return {std::move(t.output), std::move(t.output_tangent)};
}

BatchXd predicted_xdot(const AutoencoderModel& model, const AutoencoderParams& params,
                       const BatchXd& x, const BasisLibrary& lib, const CoefficientMatrix& xi) {
  const BatchXd z = encode(model, params.encoder, x);
  if (xi.rows() != lib.size() || xi.cols() != z.cols()) {
    throw DimensionError("coefficient matrix shape does not match library and latent width");
  }
  const BatchXd v = eval_theta(lib, z) * xi;
  return jvp(model.decoder, params.decoder, z, v);
}

namespace {

void check_pair(const BatchXd& x, const BatchXd& x_dot) {
  if (x.rows() != x_dot.rows() || x.cols() != x_dot.cols()) {
    throw DimensionError("data and time derivatives must have equal shapes");
  }
}

}  // namespace

double dynamics_loss(const AutoencoderModel& model, const AutoencoderParams& params,
                     const BatchXd& x, const BatchXd& x_dot, const BasisLibrary& lib,
                     const DynamicsWeights& weights) {
  return dynamics_loss_grad(model, params, x, x_dot, lib, weights).value;
}

LossGrad dynamics_loss_grad(const AutoencoderModel& model, const AutoencoderParams& params,
                            const BatchXd& x, const BatchXd& x_dot, const BasisLibrary& lib,
                            const DynamicsWeights& weights) {
  weights.validate();
  check_pair(x, x_dot);
  const double n = static_cast<double>(x.size());
  const TangentTrace<double> enc = tangent_trace(model.encoder, params.encoder, x, x_dot);
  const BatchXd& z = enc.output;
  const BatchXd& z_dot = enc.output_tangent;

  LossGrad out;
  if (weights.lambda2 == 0.0) {
    const ForwardTrace<double> dec = forward_trace(model.decoder, params.decoder, z);
    const BatchXd resid = dec.output - x;
    out.value = weights.lambda1 * resid.squaredNorm() / n;
    const auto dec_b =
        vjp_from_trace(model.decoder, params.decoder, dec, BatchXd((2.0 * weights.lambda1 / n) * resid));
    const auto enc_b = vjp(model.encoder, params.encoder, x, dec_b.grad_input);
    out.grad_encoder = enc_b.grad_params;
    out.grad_decoder = dec_b.grad_params;
    return out;
  }

  const Eigen::MatrixXd theta = eval_theta(lib, z);
  const XiSolve sol = solve_xi(theta, z_dot);
  const BatchXd v = theta * sol.xi;
  const TangentTrace<double> dec = tangent_trace(model.decoder, params.decoder, z, v);
  const BatchXd r_x = dec.output - x;
  const BatchXd r_xdot = dec.output_tangent - x_dot;
  out.value = (weights.lambda1 * r_x.squaredNorm() + weights.lambda2 * r_xdot.squaredNorm()) / n;

  const auto dec_b = tangent_vjp_from_trace(model.decoder, params.decoder, dec,
                                            BatchXd((2.0 * weights.lambda1 / n) * r_x),
                                            BatchXd((2.0 * weights.lambda2 / n) * r_xdot));
  const Eigen::MatrixXd v_bar = dec_b.grad_tangent;
  Eigen::MatrixXd theta_bar = v_bar * sol.xi.transpose();
  const Eigen::MatrixXd xi_bar = theta.transpose() * v_bar;

  // Adjoint of the least-squares solve: S = (ΘᵀΘ)⁻¹ Ξ̄ through the QR factor.
  const Eigen::MatrixXd y = sol.r.transpose().triangularView<Eigen::Lower>().solve(xi_bar);
  const Eigen::MatrixXd s = sol.r.triangularView<Eigen::Upper>().solve(y);
  const Eigen::MatrixXd resid = Eigen::MatrixXd(z_dot) - theta * sol.xi;
  theta_bar += resid * s.transpose() - theta * (s * sol.xi.transpose());
  const BatchXd z_dot_bar = theta * s;

  const BatchXd z_bar = dec_b.grad_input + theta_vjp(lib, z, BatchXd(theta_bar));
  const auto enc_b = tangent_vjp_from_trace(model.encoder, params.encoder, enc, z_bar, z_dot_bar);
  out.grad_encoder = enc_b.grad_params;
  out.grad_decoder = dec_b.grad_params;
  return out;
}

DynamicsObjective::DynamicsObjective(AutoencoderModel model, const BatchXd& x,
                                     const BatchXd& x_dot, BasisLibrary lib,
                                     DynamicsWeights weights)
    : model_(std::move(model)), x_(x), x_dot_(x_dot), lib_(std::move(lib)), weights_(weights) {
  model_.validate();
  weights_.validate();
  check_pair(x_, x_dot_);
  if (lib_.latent_dim() != model_.latent_dim) {
    throw DimensionError("basis library latent width does not match the model");
  }
}

LossGrad DynamicsObjective::evaluate(const AutoencoderParams& params,
                                     std::span<const Index> rows) const {
  return dynamics_loss_grad(model_, params, gather_rows(x_, rows), gather_rows(x_dot_, rows), lib_,
                            weights_);
}

double DynamicsObjective::full_loss(const AutoencoderParams& params) const {
  return dynamics_loss(model_, params, x_, x_dot_, lib_, weights_);
}

CoefficientStats coefficient_stats(const std::vector<CoefficientMatrix>& samples,
                                   double threshold) {
  if (samples.size() < 2) throw PreconditionError("coefficient statistics need >= 2 samples");
  const Index p = samples.front().rows();
  const Index q = samples.front().cols();
  for (const auto& s : samples) {
    if (s.rows() != p || s.cols() != q) throw DimensionError("coefficient samples differ in shape");
  }
  CoefficientStats stats{CoefficientMatrix(p, q), CoefficientMatrix(p, q), CoefficientMask(p, q)};
  std::vector<double> values(samples.size());
  for (Index j = 0; j < p; ++j) {
    for (Index k = 0; k < q; ++k) {
      double sum = 0.0;
      for (std::size_t m = 0; m < samples.size(); ++m) {
        values[m] = samples[m](j, k);
        sum += values[m];
      }
      stats.mean(j, k) = sum / static_cast<double>(samples.size());
      stats.mode(j, k) = kde_mode(values);
      stats.significant(j, k) =
          std::abs(stats.mean(j, k)) > threshold && std::abs(stats.mode(j, k)) > threshold;
    }
  }
  return stats;
}

CorrelationReport correlation_matrix(const Eigen::MatrixXd& observations,
                                     std::vector<std::string> labels) {
  const Index vars = observations.cols();
  if (observations.rows() < 2) throw PreconditionError("correlation needs >= 2 samples");
  if (!labels.empty() && static_cast<Index>(labels.size()) != vars) {
    throw DimensionError("correlation label count does not match the variable count");
  }
  const Eigen::MatrixXd centered = observations.rowwise() - observations.colwise().mean();
  const Eigen::VectorXd norms = centered.colwise().norm();
  CorrelationReport rep;
  rep.labels = std::move(labels);
  rep.zero_variance.resize(static_cast<std::size_t>(vars));
  rep.rho = Eigen::MatrixXd::Zero(vars, vars);
  for (Index a = 0; a < vars; ++a) {
    rep.zero_variance[static_cast<std::size_t>(a)] = norms[a] == 0.0;
    rep.rho(a, a) = 1.0;
  }
  for (Index a = 0; a < vars; ++a) {
    for (Index b = a + 1; b < vars; ++b) {
      if (norms[a] == 0.0 || norms[b] == 0.0) continue;
      const double r = centered.col(a).dot(centered.col(b)) / (norms[a] * norms[b]);
      rep.rho(a, b) = rep.rho(b, a) = std::clamp(r, -1.0, 1.0);
    }
  }
  return rep;
}

CorrelationReport coefficient_correlation(const std::vector<CoefficientMatrix>& samples,
                                          const BasisLibrary& lib,
                                          const std::optional<CoefficientMask>& select) {
  if (samples.empty()) throw PreconditionError("coefficient correlation of an empty sample set");
  const Index p = samples.front().rows();
  const Index q = samples.front().cols();
  if (p != lib.size()) throw DimensionError("coefficient rows do not match the library size");
  if (select && (select->rows() != p || select->cols() != q)) {
    throw DimensionError("selection mask shape does not match the coefficients");
  }
  std::vector<std::pair<Index, Index>> entries;
  std::vector<std::string> labels;
  for (Index j = 0; j < p; ++j) {
    for (Index k = 0; k < q; ++k) {
      if (select && !(*select)(j, k)) continue;
      entries.emplace_back(j, k);
      labels.push_back("dz" + std::to_string(k + 1) + "/dt:" + lib.term(j).name);
    }
  }
  Eigen::MatrixXd obs(static_cast<Index>(samples.size()), static_cast<Index>(entries.size()));
  for (std::size_t m = 0; m < samples.size(); ++m) {
    if (samples[m].rows() != p || samples[m].cols() != q) {
      throw DimensionError("coefficient samples differ in shape");
    }
    for (std::size_t e = 0; e < entries.size(); ++e) {
      obs(static_cast<Index>(m), static_cast<Index>(e)) = samples[m](entries[e].first, entries[e].second);
    }
  }
  return correlation_matrix(obs, std::move(labels));
}

BatchXd integrate_latent_ode(const BasisLibrary& lib, const CoefficientMatrix& xi,
                             const VectorXd& z0, double dt, Index steps) {
  if (!(dt > 0.0)) throw PreconditionError("integration step must be > 0");
  if (steps < 0) throw PreconditionError("step count must be >= 0");
  if (xi.rows() != lib.size() || xi.cols() != lib.latent_dim() || z0.size() != lib.latent_dim()) {
    throw DimensionError("initial state or coefficients do not match the library");
  }
  const auto field = [&](const VectorXd& z) -> VectorXd {
    BatchXd row = z.transpose();
    return (eval_theta(lib, row) * xi).transpose();
  };
  BatchXd traj(steps + 1, z0.size());
  VectorXd z = z0;
  traj.row(0) = z.transpose();
  for (Index t = 1; t <= steps; ++t) {
    const VectorXd k1 = field(z);
    const VectorXd k2 = field(z + 0.5 * dt * k1);
    const VectorXd k3 = field(z + 0.5 * dt * k2);
    const VectorXd k4 = field(z + dt * k3);
    z += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!z.allFinite()) {
      throw DivergenceError("latent ODE diverged at step " + std::to_string(t), t);
    }
    traj.row(t) = z.transpose();
  }
  return traj;
}

Eigen::MatrixXd linearize_at_origin(const BasisLibrary& lib, const CoefficientMatrix& xi,
                                    const std::optional<CoefficientMask>& select) {
  if (xi.rows() != lib.size() || xi.cols() != lib.latent_dim()) {
    throw DimensionError("coefficients do not match the library");
  }
  CoefficientMatrix kept = xi;
  if (select) kept = select->select(xi, CoefficientMatrix::Zero(xi.rows(), xi.cols()));
  const Eigen::MatrixXd b = basis_jacobian(lib, VectorXd::Zero(lib.latent_dim()));
  return kept.transpose() * b;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "'");
  out << std::setprecision(17);
  return out;
}

}  // namespace

void write_coefficient_table(const std::filesystem::path& path, const BasisLibrary& lib,
                             const CoefficientStats& stats) {
  std::ofstream out = open_csv(path);
  out << "term";
  for (Index k = 0; k < stats.mean.cols(); ++k) {
    const std::string d = "dz" + std::to_string(k + 1);
    out << ",mean_" << d << ",mode_" << d << ",significant_" << d;
  }
  out << '\n';
  for (Index j = 0; j < lib.size(); ++j) {
    out << lib.term(j).name;
    for (Index k = 0; k < stats.mean.cols(); ++k) {
      out << ',' << stats.mean(j, k) << ',' << stats.mode(j, k) << ','
          << (stats.significant(j, k) ? 1 : 0);
    }
    out << '\n';
  }
}

void write_correlation_csv(const std::filesystem::path& path, const CorrelationReport& report) {
  std::ofstream out = open_csv(path);
  const Index n = report.rho.rows();
  const auto label = [&](Index i) {
    return report.labels.empty() ? "v" + std::to_string(i + 1)
                                 : report.labels[static_cast<std::size_t>(i)];
  };
  out << "entry,zero_variance";
  for (Index i = 0; i < n; ++i) out << ',' << label(i);
  out << '\n';
  for (Index i = 0; i < n; ++i) {
    out << label(i) << ',' << (report.zero_variance[static_cast<std::size_t>(i)] ? 1 : 0);
    for (Index j = 0; j < n; ++j) out << ',' << report.rho(i, j);
    out << '\n';
  }
}

}  // namespace eae
