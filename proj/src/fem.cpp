#include "milfem/fem.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "milfem/kernels.hpp"

namespace milfem {

namespace {

// 4-point Gauss-Legendre rule on [-1,1].
constexpr double kGaussNode[4] = {-0.8611363115940526, -0.3399810435848563,
                                  0.3399810435848563, 0.8611363115940526};
constexpr double kGaussWeight[4] = {0.3478548451374538, 0.6521451548625461,
                                    0.6521451548625461, 0.3478548451374538};

std::uint64_t key_of(double k) { return std::bit_cast<std::uint64_t>(k); }

} // namespace

Mesh1D make_mesh(std::size_t n_cells) {
  if (n_cells < 2) throw std::invalid_argument("make_mesh: n_cells must be >= 2");
  Mesh1D m;
  m.n_cells = n_cells;
  m.h = 1.0 / static_cast<double>(n_cells);
  return m;
}

GridFunctionH zero_grid_function(const Mesh1D& mesh) {
  GridFunctionH x;
  x.nodal.assign(mesh.n_nodes(), 0.0);
  return x;
}

void Tridiag::apply(const double* x, double* y) const {
  const std::size_t n = diag.size();
  if (n == 0) return;
  if (n == 1) {
    y[0] = diag[0] * x[0];
    return;
  }
  y[0] = diag[0] * x[0] + off[0] * x[1];
  for (std::size_t i = 1; i + 1 < n; ++i)
    y[i] = off[i - 1] * x[i - 1] + diag[i] * x[i] + off[i] * x[i + 1];
  y[n - 1] = off[n - 2] * x[n - 2] + diag[n - 1] * x[n - 1];
}

TridiagFactor factor_spd(const Tridiag& a) {
  const std::size_t n = a.diag.size();
  TridiagFactor f;
  f.d.resize(n);
  f.l.resize(n > 0 ? n - 1 : 0);
  if (n == 0) return f;
  f.d[0] = a.diag[0];
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (f.d[i] <= 0.0)
      throw std::runtime_error("factor_spd: matrix not positive definite");
    f.l[i] = a.off[i] / f.d[i];
    f.d[i + 1] = a.diag[i + 1] - f.l[i] * a.off[i];
  }
  if (f.d[n - 1] <= 0.0)
    throw std::runtime_error("factor_spd: matrix not positive definite");
  return f;
}

void TridiagFactor::solve(const double* rhs, double* x) const {
  const std::size_t n = d.size();
  if (n == 0) return;
  x[0] = rhs[0];
  for (std::size_t i = 1; i < n; ++i) x[i] = rhs[i] - l[i - 1] * x[i - 1];
  x[n - 1] /= d[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) x[i] = x[i] / d[i] - l[i] * x[i + 1];
}

void FemOperators::register_step(double k) {
  if (!(k > 0.0)) throw std::invalid_argument("register_step: k must be > 0");
  const std::uint64_t key = key_of(k);
  if (step_factors.contains(key)) return;
  Tridiag a;
  const std::size_t n = mesh.n_nodes();
  a.diag.resize(n);
  a.off.resize(n > 0 ? n - 1 : 0);
  for (std::size_t i = 0; i < n; ++i)
    a.diag[i] = mass.diag[i] + k * stiffness.diag[i];
  for (std::size_t i = 0; i + 1 < n; ++i)
    a.off[i] = mass.off[i] + k * stiffness.off[i];
  step_factors.emplace(key, factor_spd(a));
}

const TridiagFactor& FemOperators::step_factor(double k) const {
  const auto it = step_factors.find(key_of(k));
  if (it == step_factors.end())
    throw std::logic_error("FemOperators: step size not registered");
  return it->second;
}

FemOperators assemble(const Mesh1D& mesh) {
  FemOperators ops;
  ops.mesh = mesh;
  const std::size_t n = mesh.n_nodes();
  const double h = mesh.h;
  ops.mass.diag.assign(n, 2.0 * h / 3.0);
  ops.mass.off.assign(n > 0 ? n - 1 : 0, h / 6.0);
  ops.stiffness.diag.assign(n, 2.0 / h);
  ops.stiffness.off.assign(n > 0 ? n - 1 : 0, -1.0 / h);
  return ops;
}

GridFunctionH mass_apply(const GridFunctionH& x, const FemOperators& ops) {
  GridFunctionH y = zero_grid_function(ops.mesh);
  ops.mass.apply(x.nodal.data(), y.nodal.data());
  return y;
}

GridFunctionH stiffness_apply(const GridFunctionH& x, const FemOperators& ops) {
  GridFunctionH y = zero_grid_function(ops.mesh);
  ops.stiffness.apply(x.nodal.data(), y.nodal.data());
  return y;
}

double mass_inner(const GridFunctionH& x, const GridFunctionH& y,
                  const FemOperators& ops) {
  GridFunctionH my = mass_apply(y, ops);
  return kernels::dot(x.nodal.data(), my.nodal.data(), x.size());
}

double mass_norm(const GridFunctionH& x, const FemOperators& ops) {
  const double q = mass_inner(x, x, ops);
  return q > 0.0 ? std::sqrt(q) : 0.0;
}

double energy_norm(const GridFunctionH& x, const FemOperators& ops) {
  GridFunctionH kx = stiffness_apply(x, ops);
  const double q = kernels::dot(x.nodal.data(), kx.nodal.data(), x.size());
  return q > 0.0 ? std::sqrt(q) : 0.0;
}

GridFunctionH step_Skh(const GridFunctionH& x, double k,
                       const FemOperators& ops) {
  GridFunctionH rhs = mass_apply(x, ops);
  GridFunctionH y = zero_grid_function(ops.mesh);
  ops.step_factor(k).solve(rhs.nodal.data(), y.nodal.data());
  return y;
}

GridFunctionH project_Ph(const std::function<double(double)>& x,
                         const FemOperators& ops) {
  const Mesh1D& mesh = ops.mesh;
  const std::size_t n = mesh.n_nodes();
  const double h = mesh.h;
  std::vector<double> load(n, 0.0);
  for (std::size_t c = 0; c < mesh.n_cells; ++c) {
    const double a = static_cast<double>(c) * h;
    for (int q = 0; q < 4; ++q) {
      const double xi = a + 0.5 * h * (1.0 + kGaussNode[q]);
      const double w = 0.5 * h * kGaussWeight[q];
      const double fx = x(xi);
      const double up = (xi - a) / h; // hat rising to node c
      if (c + 1 < mesh.n_cells) load[c] += w * fx * up;
      if (c > 0) load[c - 1] += w * fx * (1.0 - up);
    }
  }
  GridFunctionH out = zero_grid_function(mesh);
  static thread_local std::map<std::uint64_t, TridiagFactor> mass_cache;
  // Mass solves recur per mesh; factor once per (thread, mesh size).
  const std::uint64_t key = mesh.n_cells;
  auto it = mass_cache.find(key);
  if (it == mass_cache.end())
    it = mass_cache.emplace(key, factor_spd(ops.mass)).first;
  it->second.solve(load.data(), out.nodal.data());
  return out;
}

GridFunctionH project_Ph(const SpectralVector& x, const EigenBasis& basis,
                         const FemOperators& ops) {
  return project_Ph(
      [&](double xi) { return milfem::evaluate(x, xi, basis); }, ops);
}

GridFunctionH project_Rh(const SpectralVector& x, const EigenBasis& basis,
                         const FemOperators& ops) {
  if (x.size() > basis.n_modes)
    throw std::invalid_argument("project_Rh: more coefficients than modes");
  const Mesh1D& mesh = ops.mesh;
  const std::size_t n = mesh.n_nodes();
  const double h = mesh.h;
  // <x, phi_i>_1 = int x'(xi) phi_i'(xi); phi_i' is +-1/h on the two cells.
  auto dx = [&](double xi) {
    double s = 0.0;
    constexpr double pi = 3.14159265358979323846;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double jpi = static_cast<double>(j + 1) * pi;
      s += x.coeff[j] * std::sqrt(2.0) * jpi * std::cos(jpi * xi);
    }
    return s;
  };
  std::vector<double> load(n, 0.0);
  for (std::size_t c = 0; c < mesh.n_cells; ++c) {
    const double a = static_cast<double>(c) * h;
    for (int q = 0; q < 4; ++q) {
      const double xi = a + 0.5 * h * (1.0 + kGaussNode[q]);
      const double w = 0.5 * h * kGaussWeight[q];
      const double dfx = dx(xi);
      if (c + 1 < mesh.n_cells) load[c] += w * dfx / h;
      if (c > 0) load[c - 1] -= w * dfx / h;
    }
  }
  GridFunctionH out = zero_grid_function(mesh);
  factor_spd(ops.stiffness).solve(load.data(), out.nodal.data());
  return out;
}

double evaluate(const GridFunctionH& x, double xi, const Mesh1D& mesh) {
  if (xi <= 0.0 || xi >= 1.0) return 0.0;
  const double pos = xi / mesh.h;
  const auto cell = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(cell);
  const std::size_t n = mesh.n_nodes();
  const double left = (cell == 0 || cell > n) ? 0.0 : x.nodal[cell - 1];
  const double right = (cell >= n) ? 0.0 : x.nodal[cell];
  return left + frac * (right - left);
}

GridFunctionH prolong(const GridFunctionH& x, const Mesh1D& coarse,
                      const Mesh1D& fine) {
  if (fine.n_cells % coarse.n_cells != 0)
    throw std::invalid_argument("prolong: meshes are not nested");
  const std::size_t f = fine.n_cells / coarse.n_cells;
  GridFunctionH out = zero_grid_function(fine);
  const std::size_t nc = coarse.n_nodes();
  for (std::size_t i = 0; i < fine.n_nodes(); ++i) {
    const std::size_t pos = i + 1; // fine node index in units of h_f
    const std::size_t c = pos / f;
    const std::size_t rem = pos % f;
    const double left = (c == 0 || c > nc) ? 0.0 : x.nodal[c - 1];
    if (rem == 0) {
      out.nodal[i] = left;
    } else {
      const double right = (c >= nc) ? 0.0 : x.nodal[c];
      out.nodal[i] =
          left + (right - left) * static_cast<double>(rem) / static_cast<double>(f);
    }
  }
  return out;
}

SpectralLift::SpectralLift(const Mesh1D& mesh, const EigenBasis& basis,
                           std::size_t n_modes)
    : mesh_(mesh), n_modes_(n_modes) {
  // Trapezoid points on the 4x refined mesh; boundary points drop out
  // (integrand vanishes there).
  const std::size_t pts = 4 * mesh.n_cells - 1;
  const double hq = mesh.h / 4.0;
  table_.resize(pts * n_modes);
  for (std::size_t t = 0; t < pts; ++t) {
    const double xi = static_cast<double>(t + 1) * hq;
    for (std::size_t j = 0; j < n_modes; ++j)
      table_[t * n_modes + j] = hq * basis.eval(j + 1, xi);
  }
}

SpectralVector SpectralLift::apply(const GridFunctionH& x) const {
  SpectralVector out;
  out.coeff.assign(n_modes_, 0.0);
  const std::size_t pts = 4 * mesh_.n_cells - 1;
  for (std::size_t t = 0; t < pts; ++t) {
    double u;
    if ((t + 1) % 4 == 0) {
      const std::size_t i = (t + 1) / 4 - 1;
      u = i < x.size() ? x.nodal[i] : 0.0;
    } else {
      u = evaluate(x, static_cast<double>(t + 1) * mesh_.h / 4.0, mesh_);
    }
    if (u != 0.0)
      kernels::axpy(out.coeff.data(), u, table_.data() + t * n_modes_,
                    n_modes_);
  }
  return out;
}

SpectralVector lift_to_spectral(const GridFunctionH& x, const Mesh1D& mesh,
                                const EigenBasis& basis, std::size_t n_modes) {
  return SpectralLift(mesh, basis, n_modes).apply(x);
}

std::size_t lift_mode_cap(const Mesh1D& mesh, const EigenBasis& basis) {
  return std::min<std::size_t>(basis.n_modes, 2 * mesh.n_cells);
}

SpectralVector error_operator_Fkh(double t, const SpectralVector& x, double k,
                                  const FemOperators& ops,
                                  const EigenBasis& basis) {
  if (!(t > 0.0))
    throw std::invalid_argument("error_operator_Fkh: t must be > 0");
  // t in [t_{j-1}, t_j) selects j backward Euler steps.
  const auto j = static_cast<std::size_t>(std::floor(t / k)) + 1;
  GridFunctionH u = project_Ph(x, basis, ops);
  for (std::size_t s = 0; s < j; ++s) u = step_Skh(u, k, ops);
  // Coefficients of the V_h state only up to the quadrature's resolution;
  // the exact flow keeps its full tail.
  const std::size_t cap = lift_mode_cap(ops.mesh, basis);
  SpectralVector out = lift_to_spectral(u, ops.mesh, basis, cap);
  out.coeff.resize(basis.n_modes, 0.0);
  const SpectralVector exact = apply_semigroup(x, t, basis);
  for (std::size_t m = 0; m < exact.size(); ++m) out.coeff[m] -= exact.coeff[m];
  return out;
}

std::vector<double> nodal_table(const EigenBasis& basis, const Mesh1D& mesh,
                                std::size_t modes,
                                const std::vector<double>* weights) {
  const std::size_t n = mesh.n_nodes();
  std::vector<double> table(n * modes);
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = mesh.node(i);
    for (std::size_t j = 0; j < modes; ++j) {
      const double w = weights != nullptr ? (*weights)[j] : 1.0;
      table[i * modes + j] = w * basis.eval(j + 1, xi);
    }
  }
  return table;
}

std::vector<double> spectral_load_matrix(const EigenBasis& basis,
                                         const FemOperators& ops,
                                         std::size_t modes) {
  const Mesh1D& mesh = ops.mesh;
  const std::size_t n = mesh.n_nodes();
  const double h = mesh.h;
  std::vector<double> load(n * modes, 0.0);
  for (std::size_t c = 0; c < mesh.n_cells; ++c) {
    const double a = static_cast<double>(c) * h;
    for (int q = 0; q < 4; ++q) {
      const double xi = a + 0.5 * h * (1.0 + kGaussNode[q]);
      const double w = 0.5 * h * kGaussWeight[q];
      const double up = (xi - a) / h;
      for (std::size_t j = 0; j < modes; ++j) {
        const double e = basis.eval(j + 1, xi);
        if (c + 1 < mesh.n_cells) load[c * modes + j] += w * e * up;
        if (c > 0) load[(c - 1) * modes + j] += w * e * (1.0 - up);
      }
    }
  }
  return load;
}

PencilEigen pencil_eigendecomposition(const FemOperators& ops) {
  const std::size_t n = ops.mesh.n_nodes();
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    K(i, i) = ops.stiffness.diag[i];
    M(i, i) = ops.mass.diag[i];
    if (i + 1 < n) {
      K(i, i + 1) = K(i + 1, i) = ops.stiffness.off[i];
      M(i, i + 1) = M(i + 1, i) = ops.mass.off[i];
    }
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(K, M);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("pencil_eigendecomposition failed");
  PencilEigen out;
  out.n = n;
  out.values.resize(n);
  out.vectors.resize(n * n);
  for (std::size_t m = 0; m < n; ++m) {
    out.values[m] = solver.eigenvalues()(m);
    for (std::size_t i = 0; i < n; ++i)
      out.vectors[m * n + i] = solver.eigenvectors()(i, m);
  }
  return out;
}

GridFunctionH apply_Ah_power(const GridFunctionH& x, double s,
                             const PencilEigen& eig, const FemOperators& ops) {
  const std::size_t n = eig.n;
  GridFunctionH mx = mass_apply(x, ops);
  GridFunctionH out = zero_grid_function(ops.mesh);
  for (std::size_t m = 0; m < n; ++m) {
    const double* v = eig.vectors.data() + m * n;
    const double c = std::pow(eig.values[m], s) *
                     kernels::dot(v, mx.nodal.data(), n);
    kernels::axpy(out.nodal.data(), c, v, n);
  }
  return out;
}

} // namespace milfem
