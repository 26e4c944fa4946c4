#pragma once

#include <string>
#include <vector>

#include "milfem/fem.hpp"
#include "milfem/noise.hpp"
#include "milfem/spectral.hpp"

// Concrete semilinear problem instances: Nemytskii drift f and multiplicative
// Nemytskii diffusion g acting nodally on grid functions, plus the bundled
// problem description used by the scheme and the harness.
namespace milfem {

/// Scalar coefficient with derivative and a declared Lipschitz bound.
struct ScalarFunction {
  std::string name;
  double (*value)(double) = nullptr;
  double (*deriv)(double) = nullptr;
  double lipschitz = 0.0;
};

// Named registry used by config files: zero, identity, one, sin,
// rational_damping, soft_multiplicative.
const ScalarFunction& scalar_function(const std::string& name);
std::vector<std::string> scalar_function_names();

struct NemytskiiDrift {
  ScalarFunction b;
};

struct NemytskiiDiffusion {
  ScalarFunction b;
};

struct ProblemSpec {
  EigenBasis basis;
  NemytskiiDrift drift;
  NemytskiiDiffusion diffusion;
  CovarianceSpectrum covariance;
  SpectralVector x0;
  double T = 1.0;
  double r = 0.5;   // spatial regularity parameter
  double p = 2.0;   // moment of the error norms
};

// b_f(u) = u/(1+u^2), b_g(u) = (1+u^2)^{-1/2} + 0.1 sin u, mu_j = j^-beta
// with beta = 2, X_0 = e_1 + 0.5 e_3.
ProblemSpec default_problem(std::size_t n_modes = 1024,
                            std::size_t noise_modes = 256);

// Nodal Nemytskii composition: c_i -> b_f(c_i). Equals the L2 projection of
// the composed interpolant under the nodal-interpolation convention.
GridFunctionH apply_drift(const GridFunctionH& x, const NemytskiiDrift& drift);

// Nodal product b_g(x(xi_i)) * phi_j(xi_i); scaling by sqrt(mu_j) is the
// caller's concern.
GridFunctionH apply_diffusion_mode(const GridFunctionH& x, std::size_t mode,
                                   const ProblemSpec& spec,
                                   const FemOperators& ops);

// Hilbert-Schmidt norm (sum_j mu_j ||g(x) phi_j||_s^2)^{1/2}; s in {0, r},
// fractional norms through the spectral lift.
double hs_norm(const GridFunctionH& x, const ProblemSpec& spec,
               const FemOperators& ops, double s);

// Sampled validation of the declared constants: Lipschitz bound over random
// probe pairs and derivative against centered differences. Throws
// std::runtime_error on violation beyond the stated tolerances.
void validate_coefficients(const ScalarFunction& f, std::uint64_t seed,
                           std::size_t lipschitz_pairs = 10000,
                           std::size_t derivative_probes = 1000);

} // namespace milfem
