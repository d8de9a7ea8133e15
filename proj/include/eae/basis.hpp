#ifndef EAE_BASIS_HPP
#define EAE_BASIS_HPP

#include "eae/core.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace eae {

/// One candidate function of the latent state: either a monomial with the
/// given exponents or sin of a single coordinate.
struct BasisTerm {
  std::string name;
  std::vector<int> exponents;
  Index sine_coordinate = -1;

  bool is_sine() const { return sine_coordinate >= 0; }
  int degree() const;
};

class BasisLibrary {
 public:
  /// Monomials of degree 1..max_degree (combinations with replacement order)
  /// followed by sin(z_k) for every coordinate. No constant term.
  static BasisLibrary polynomial_sine(Index latent_dim, int max_degree = 3, bool sines = true);

  BasisLibrary(Index latent_dim, std::vector<BasisTerm> terms);

  Index latent_dim() const { return latent_dim_; }
  Index size() const { return static_cast<Index>(terms_.size()); }
  const std::vector<BasisTerm>& terms() const { return terms_; }
  const BasisTerm& term(Index j) const { return terms_[static_cast<std::size_t>(j)]; }
  std::vector<std::string> names() const;

  /// Index of the term a coordinate permutation maps term j onto.
  Index permuted_term(Index j, const std::vector<Index>& perm) const;

 private:
  Index latent_dim_;
  std::vector<BasisTerm> terms_;
};

namespace detail {

template <typename Scalar, typename Row>
Scalar eval_term(const BasisTerm& t, const Row& z) {
  using std::sin;
  if (t.is_sine()) return sin(z(t.sine_coordinate));
  Scalar v(1);
  for (std::size_t k = 0; k < t.exponents.size(); ++k) {
    for (int e = 0; e < t.exponents[k]; ++e) v *= z(static_cast<Index>(k));
  }
  return v;
}

template <typename Scalar, typename Row>
Scalar eval_term_partial(const BasisTerm& t, const Row& z, Index coord) {
  using std::cos;
  if (t.is_sine()) return t.sine_coordinate == coord ? cos(z(coord)) : Scalar(0);
  const int ek = t.exponents[static_cast<std::size_t>(coord)];
  if (ek == 0) return Scalar(0);
  Scalar v(ek);
  for (std::size_t k = 0; k < t.exponents.size(); ++k) {
    const int e = static_cast<Index>(k) == coord ? ek - 1 : t.exponents[k];
    for (int i = 0; i < e; ++i) v *= z(static_cast<Index>(k));
  }
  return v;
}

inline void check_latent_width(const BasisLibrary& lib, Index cols) {
  if (cols != lib.latent_dim()) {
    throw DimensionError("basis library expects latent width " + std::to_string(lib.latent_dim()) +
                         ", got " + std::to_string(cols));
  }
}

}  // namespace detail

/// Θ(Z): one row per sample, one column per library term.
template <typename Scalar>
Batch<Scalar> eval_theta(const BasisLibrary& lib, const Batch<Scalar>& z) {
  detail::check_latent_width(lib, z.cols());
  Batch<Scalar> theta(z.rows(), lib.size());
  for (Index i = 0; i < z.rows(); ++i) {
    for (Index j = 0; j < lib.size(); ++j) {
      theta(i, j) = detail::eval_term<Scalar>(lib.term(j), z.row(i));
    }
  }
  return theta;
}

/// Pulls an adjoint of Θ(Z) back to an adjoint of Z.
template <typename Scalar>
Batch<Scalar> theta_vjp(const BasisLibrary& lib, const Batch<Scalar>& z,
                        const Batch<Scalar>& theta_bar) {
  detail::check_latent_width(lib, z.cols());
  if (theta_bar.rows() != z.rows() || theta_bar.cols() != lib.size()) {
    throw DimensionError("theta adjoint shape does not match the library evaluation");
  }
  Batch<Scalar> z_bar = Batch<Scalar>::Zero(z.rows(), z.cols());
  for (Index i = 0; i < z.rows(); ++i) {
    for (Index j = 0; j < lib.size(); ++j) {
      if (theta_bar(i, j) == Scalar(0)) continue;
      for (Index k = 0; k < z.cols(); ++k) {
        z_bar(i, k) += theta_bar(i, j) * detail::eval_term_partial<Scalar>(lib.term(j), z.row(i), k);
      }
    }
  }
  return z_bar;
}

/// ∂f_j/∂z_k at one point, as a (terms × latent_dim) matrix.
Eigen::MatrixXd basis_jacobian(const BasisLibrary& lib, const VectorXd& z);

}  // namespace eae

#endif  // EAE_BASIS_HPP
