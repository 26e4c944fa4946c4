#include "milfem/spectral.hpp"

#include <cmath>
#include <stdexcept>

#include "milfem/kernels.hpp"

namespace milfem {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

double EigenBasis::eval(std::size_t mode, double xi) const {
  return std::sqrt(2.0) * std::sin(static_cast<double>(mode) * kPi * xi);
}

EigenBasis laplacian_eigenpairs(std::size_t n_modes) {
  if (n_modes == 0)
    throw std::invalid_argument("laplacian_eigenpairs: n_modes must be >= 1");
  EigenBasis basis;
  basis.n_modes = n_modes;
  basis.eigenvalues.resize(n_modes);
  for (std::size_t j = 1; j <= n_modes; ++j) {
    const double jj = static_cast<double>(j);
    basis.eigenvalues[j - 1] = kPi * kPi * jj * jj;
  }
  return basis;
}

SpectralVector unit_mode(std::size_t j, std::size_t n_modes) {
  SpectralVector x;
  x.coeff.assign(n_modes, 0.0);
  if (j == 0 || j > n_modes)
    throw std::invalid_argument("unit_mode: mode out of range");
  x.coeff[j - 1] = 1.0;
  return x;
}

double fractional_norm(const SpectralVector& x, double s,
                       const EigenBasis& basis) {
  if (s < -2.0 || s > 2.0)
    throw std::invalid_argument("fractional_norm: s outside [-2,2]");
  if (x.size() > basis.n_modes)
    throw std::invalid_argument("fractional_norm: more coefficients than modes");
  if (s == 0.0) return std::sqrt(kernels::sumsq(x.coeff.data(), x.size()));
  double acc = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j)
    acc += std::pow(basis.eigenvalues[j], s) * x.coeff[j] * x.coeff[j];
  return std::sqrt(acc);
}

SpectralVector apply_semigroup(const SpectralVector& x, double t,
                               const EigenBasis& basis) {
  if (t < 0.0) throw std::invalid_argument("apply_semigroup: t must be >= 0");
  SpectralVector y = x;
  for (std::size_t j = 0; j < y.size(); ++j)
    y.coeff[j] *= std::exp(-basis.eigenvalues[j] * t);
  return y;
}

SpectralVector apply_fractional_power(const SpectralVector& x, double s,
                                      const EigenBasis& basis) {
  SpectralVector y = x;
  if (s == 0.0) return y;
  for (std::size_t j = 0; j < y.size(); ++j)
    y.coeff[j] *= std::pow(basis.eigenvalues[j], 0.5 * s);
  return y;
}

double evaluate(const SpectralVector& x, double xi, const EigenBasis& basis) {
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j)
    s += x.coeff[j] * basis.eval(j + 1, xi);
  return s;
}

double spectral_inner(const SpectralVector& a, const SpectralVector& b) {
  const std::size_t n = a.size() < b.size() ? a.size() : b.size();
  return kernels::dot(a.coeff.data(), b.coeff.data(), n);
}

} // namespace milfem
