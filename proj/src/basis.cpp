#include "eae/basis.hpp"

#include <algorithm>
#include <numeric>

namespace eae {

int BasisTerm::degree() const {
  return is_sine() ? 1 : std::accumulate(exponents.begin(), exponents.end(), 0);
}

namespace {

std::string monomial_name(const std::vector<int>& exponents) {
  std::string name;
  for (std::size_t k = 0; k < exponents.size(); ++k) {
    if (exponents[k] == 0) continue;
    if (!name.empty()) name += '*';
    name += "z" + std::to_string(k + 1);
    if (exponents[k] > 1) name += "^" + std::to_string(exponents[k]);
  }
  return name;
}

// Multisets of coordinates of size `degree`, in lexicographic order.
void append_monomials(Index dim, int degree, Index start, std::vector<int>& exps,
                      std::vector<BasisTerm>& out) {
  if (degree == 0) {
    out.push_back({monomial_name(exps), exps, -1});
    return;
  }
  for (Index k = start; k < dim; ++k) {
    ++exps[static_cast<std::size_t>(k)];
    append_monomials(dim, degree - 1, k, exps, out);
    --exps[static_cast<std::size_t>(k)];
  }
}

}  // namespace

BasisLibrary BasisLibrary::polynomial_sine(Index latent_dim, int max_degree, bool sines) {
  if (latent_dim < 1) throw DimensionError("basis library needs latent_dim >= 1");
  if (max_degree < 1) throw ConfigError("basis library needs max_degree >= 1");
  std::vector<BasisTerm> terms;
  std::vector<int> exps(static_cast<std::size_t>(latent_dim), 0);
  for (int d = 1; d <= max_degree; ++d) append_monomials(latent_dim, d, 0, exps, terms);
  if (sines) {
    for (Index k = 0; k < latent_dim; ++k) {
      terms.push_back({"sin(z" + std::to_string(k + 1) + ")",
                       std::vector<int>(static_cast<std::size_t>(latent_dim), 0), k});
    }
  }
  return BasisLibrary(latent_dim, std::move(terms));
}

BasisLibrary::BasisLibrary(Index latent_dim, std::vector<BasisTerm> terms)
    : latent_dim_(latent_dim), terms_(std::move(terms)) {
  if (terms_.empty()) throw ConfigError("basis library is empty");
  for (const auto& t : terms_) {
    if (static_cast<Index>(t.exponents.size()) != latent_dim_) {
      throw DimensionError("basis term '" + t.name + "' has the wrong exponent count");
    }
    if (!t.is_sine() && t.degree() == 0) {
      throw ConfigError("basis library must not contain a constant term");
    }
    if (t.sine_coordinate >= latent_dim_) {
      throw DimensionError("basis term '" + t.name + "' refers to a missing coordinate");
    }
  }
}

std::vector<std::string> BasisLibrary::names() const {
  std::vector<std::string> out;
  out.reserve(terms_.size());
  for (const auto& t : terms_) out.push_back(t.name);
  return out;
}

Index BasisLibrary::permuted_term(Index j, const std::vector<Index>& perm) const {
  if (static_cast<Index>(perm.size()) != latent_dim_) {
    throw DimensionError("permutation length does not match latent_dim");
  }
  const BasisTerm& t = term(j);
  // Coordinate k of the original becomes coordinate perm[k].
  std::vector<int> exps(t.exponents.size(), 0);
  for (std::size_t k = 0; k < exps.size(); ++k) exps[static_cast<std::size_t>(perm[k])] = t.exponents[k];
  const Index sine = t.is_sine() ? perm[static_cast<std::size_t>(t.sine_coordinate)] : -1;
  for (Index i = 0; i < size(); ++i) {
    const BasisTerm& u = term(i);
    if (u.sine_coordinate == sine && (sine >= 0 || u.exponents == exps)) return i;
  }
  throw PreconditionError("library is not closed under the given permutation");
}

Eigen::MatrixXd basis_jacobian(const BasisLibrary& lib, const VectorXd& z) {
  detail::check_latent_width(lib, z.size());
  Eigen::MatrixXd jac(lib.size(), lib.latent_dim());
  for (Index j = 0; j < lib.size(); ++j) {
    for (Index k = 0; k < lib.latent_dim(); ++k) {
      jac(j, k) = detail::eval_term_partial<double>(lib.term(j), z, k);
    }
  }
  return jac;
}

}  // namespace eae
