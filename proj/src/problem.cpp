#include "milfem/problem.hpp"

#include <cmath>
#include <stdexcept>

#include "milfem/rng.hpp"

namespace milfem {

namespace {

double fn_zero(double) { return 0.0; }
double fn_one(double) { return 1.0; }
double fn_identity(double u) { return u; }
double dfn_identity(double) { return 1.0; }
double fn_sin(double u) { return std::sin(u); }
double dfn_sin(double u) { return std::cos(u); }

double fn_rational_damping(double u) { return u / (1.0 + u * u); }
double dfn_rational_damping(double u) {
  const double d = 1.0 + u * u;
  return (1.0 - u * u) / (d * d);
}

double fn_soft_multiplicative(double u) {
  return 1.0 / std::sqrt(1.0 + u * u) + 0.1 * std::sin(u);
}
double dfn_soft_multiplicative(double u) {
  const double d = 1.0 + u * u;
  return -u / (d * std::sqrt(d)) + 0.1 * std::cos(u);
}

const ScalarFunction kRegistry[] = {
    {"zero", fn_zero, fn_zero, 0.0},
    {"one", fn_one, fn_zero, 0.0},
    {"identity", fn_identity, dfn_identity, 1.0},
    {"sin", fn_sin, dfn_sin, 1.0},
    {"rational_damping", fn_rational_damping, dfn_rational_damping, 1.0},
    {"soft_multiplicative", fn_soft_multiplicative, dfn_soft_multiplicative,
     0.5},
};

} // namespace

const ScalarFunction& scalar_function(const std::string& name) {
  for (const auto& f : kRegistry)
    if (f.name == name) return f;
  throw std::invalid_argument("scalar_function: unknown name '" + name + "'");
}

std::vector<std::string> scalar_function_names() {
  std::vector<std::string> names;
  for (const auto& f : kRegistry) names.push_back(f.name);
  return names;
}

ProblemSpec default_problem(std::size_t n_modes, std::size_t noise_modes) {
  ProblemSpec spec;
  spec.basis = laplacian_eigenpairs(n_modes);
  spec.drift.b = scalar_function("rational_damping");
  spec.diffusion.b = scalar_function("soft_multiplicative");
  spec.covariance = power_covariance(noise_modes, 2.0);
  spec.x0.coeff.assign(n_modes, 0.0);
  spec.x0.coeff[0] = 1.0;
  spec.x0.coeff[2] = 0.5;
  spec.T = 1.0;
  spec.r = 0.5;
  spec.p = 2.0;
  return spec;
}

GridFunctionH apply_drift(const GridFunctionH& x, const NemytskiiDrift& drift) {
  GridFunctionH y = x;
  auto* f = drift.b.value;
  for (double& v : y.nodal) v = f(v);
  return y;
}

GridFunctionH apply_diffusion_mode(const GridFunctionH& x, std::size_t mode,
                                   const ProblemSpec& spec,
                                   const FemOperators& ops) {
  if (mode == 0 || mode > spec.covariance.n_modes)
    throw std::invalid_argument("apply_diffusion_mode: mode out of range");
  GridFunctionH y = zero_grid_function(ops.mesh);
  auto* g = spec.diffusion.b.value;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double xi = ops.mesh.node(i);
    y.nodal[i] = g(x.nodal[i]) * spec.basis.eval(mode, xi);
  }
  return y;
}

double hs_norm(const GridFunctionH& x, const ProblemSpec& spec,
               const FemOperators& ops, double s) {
  double acc = 0.0;
  const SpectralLift lift(ops.mesh, spec.basis, lift_mode_cap(ops.mesh, spec.basis));
  for (std::size_t j = 1; j <= spec.covariance.n_modes; ++j) {
    const double mu = spec.covariance.mu[j - 1];
    if (mu == 0.0) continue;
    const GridFunctionH gphi = apply_diffusion_mode(x, j, spec, ops);
    double norm_s;
    if (s == 0.0) {
      norm_s = mass_norm(gphi, ops);
    } else {
      norm_s = fractional_norm(lift.apply(gphi), s, spec.basis);
    }
    acc += mu * norm_s * norm_s;
  }
  return std::sqrt(acc);
}

void validate_coefficients(const ScalarFunction& f, std::uint64_t seed,
                           std::size_t lipschitz_pairs,
                           std::size_t derivative_probes) {
  const rng::PathStream st{seed, 0};
  for (std::size_t i = 0; i < lipschitz_pairs; ++i) {
    const double u = 10.0 * (st.uniform(rng::DrawClass::probe, 0, 2 * i) - 0.5);
    const double v =
        10.0 * (st.uniform(rng::DrawClass::probe, 0, 2 * i + 1) - 0.5);
    const double lhs = std::abs(f.value(u) - f.value(v));
    if (lhs > f.lipschitz * std::abs(u - v) + 1e-12)
      throw std::runtime_error("validate_coefficients: Lipschitz bound violated for " +
                               f.name);
  }
  const double eps = 1e-5;
  for (std::size_t i = 0; i < derivative_probes; ++i) {
    const double u = 10.0 * (st.uniform(rng::DrawClass::probe, 1, i) - 0.5);
    const double fd = (f.value(u + eps) - f.value(u - eps)) / (2.0 * eps);
    const double scale = std::max(1.0, std::abs(f.deriv(u)));
    if (std::abs(fd - f.deriv(u)) > 1e-6 * scale)
      throw std::runtime_error("validate_coefficients: derivative mismatch for " +
                               f.name);
  }
}

} // namespace milfem
