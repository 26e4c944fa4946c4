#pragma once

#include <cstddef>
#include <vector>

// Exact spectral representation of the Dirichlet Laplacian on (0,1):
// eigenpairs, fractional power spaces (positive and negative exponents)
// and the analytic semigroup. Everything is diagonal in this basis.
namespace milfem {

/// Spectral data of the operator: lambda_j = (pi j)^2, e_j = sqrt(2) sin(j pi x).
struct EigenBasis {
  std::size_t n_modes = 0;
  std::vector<double> eigenvalues; // strictly increasing, positive

  // e_j evaluated at xi, modes indexed 1..n_modes.
  double eval(std::size_t mode, double xi) const;

  double lambda(std::size_t mode) const { return eigenvalues[mode - 1]; }
};

/// Coefficients x_j of x = sum_j x_j e_j.
struct SpectralVector {
  std::vector<double> coeff;

  std::size_t size() const { return coeff.size(); }
  double& operator[](std::size_t j) { return coeff[j]; }
  double operator[](std::size_t j) const { return coeff[j]; }
};

// Exact Dirichlet-Laplacian spectral data on (0,1). Throws
// std::invalid_argument for n_modes == 0.
EigenBasis laplacian_eigenpairs(std::size_t n_modes);

// Unit coefficient vector for mode j (1-based), padded to n_modes.
SpectralVector unit_mode(std::size_t j, std::size_t n_modes);

// (sum_j lambda_j^s x_j^2)^(1/2); s in [-2,2].
double fractional_norm(const SpectralVector& x, double s,
                       const EigenBasis& basis);

// Coefficient-wise multiplication by exp(-lambda_j t); t >= 0.
SpectralVector apply_semigroup(const SpectralVector& x, double t,
                               const EigenBasis& basis);

// Coefficient-wise multiplication by lambda_j^(s/2).
SpectralVector apply_fractional_power(const SpectralVector& x, double s,
                                      const EigenBasis& basis);

// Point evaluation of the spectral sum at xi.
double evaluate(const SpectralVector& x, double xi, const EigenBasis& basis);

// L2 inner product of two coefficient vectors (orthonormal basis).
double spectral_inner(const SpectralVector& a, const SpectralVector& b);

} // namespace milfem
