#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "milfem/spectral.hpp"

// Piecewise linear finite elements on a uniform mesh of (0,1) with
// homogeneous Dirichlet conditions. Interior hat-function coefficients only;
// mass and stiffness matrices are symmetric tridiagonal.
namespace milfem {

struct Mesh1D {
  std::size_t n_cells = 0;
  double h = 0.0;

  std::size_t n_nodes() const { return n_cells - 1; } // interior nodes
  double node(std::size_t i) const { return static_cast<double>(i + 1) * h; }
};

Mesh1D make_mesh(std::size_t n_cells);

/// Element of V_h: interior nodal coefficients, boundary values are zero.
struct GridFunctionH {
  std::vector<double> nodal;

  std::size_t size() const { return nodal.size(); }
  double& operator[](std::size_t i) { return nodal[i]; }
  double operator[](std::size_t i) const { return nodal[i]; }
};

GridFunctionH zero_grid_function(const Mesh1D& mesh);

// Symmetric tridiagonal matrix: diag[i], off[i] couples i and i+1.
struct Tridiag {
  std::vector<double> diag;
  std::vector<double> off;

  void apply(const double* x, double* y) const;
};

// LDL^T factorization of an SPD tridiagonal matrix.
struct TridiagFactor {
  std::vector<double> d;
  std::vector<double> l;

  void solve(const double* rhs, double* x) const;
};

TridiagFactor factor_spd(const Tridiag& a);

struct FemOperators {
  Mesh1D mesh;
  Tridiag mass;      // diag 2h/3, off h/6
  Tridiag stiffness; // diag 2/h, off -1/h

  // One factorization of (M + kK) per registered step size.
  std::map<std::uint64_t, TridiagFactor> step_factors;

  // Register k before any concurrent use; afterwards the object is immutable.
  void register_step(double k);
  const TridiagFactor& step_factor(double k) const;
};

FemOperators assemble(const Mesh1D& mesh);

// y = M x and y = K x.
GridFunctionH mass_apply(const GridFunctionH& x, const FemOperators& ops);
GridFunctionH stiffness_apply(const GridFunctionH& x, const FemOperators& ops);

// H-norm and inner product on V_h via the mass matrix.
double mass_norm(const GridFunctionH& x, const FemOperators& ops);
double mass_inner(const GridFunctionH& x, const GridFunctionH& y,
                  const FemOperators& ops);

// H^1-seminorm (energy norm) via the stiffness matrix.
double energy_norm(const GridFunctionH& x, const FemOperators& ops);

// One backward Euler step: solves (M + kK) c = M x. Requires register_step(k).
GridFunctionH step_Skh(const GridFunctionH& x, double k,
                       const FemOperators& ops);

// L2-orthogonal projection P_h: solves M c = <x, phi_i> with 4-point Gauss
// loads per cell.
GridFunctionH project_Ph(const std::function<double(double)>& x,
                         const FemOperators& ops);
GridFunctionH project_Ph(const SpectralVector& x, const EigenBasis& basis,
                         const FemOperators& ops);

// Ritz projection R_h: solves K c = <x, phi_i>_1.
GridFunctionH project_Rh(const SpectralVector& x, const EigenBasis& basis,
                         const FemOperators& ops);

// Piecewise linear point evaluation (zero outside interior nodes' support).
double evaluate(const GridFunctionH& x, double xi, const Mesh1D& mesh);

// Exact embedding of a coarse V_h function into a nested finer space.
// Throws std::invalid_argument unless fine.n_cells is a multiple of
// coarse.n_cells.
GridFunctionH prolong(const GridFunctionH& x, const Mesh1D& coarse,
                      const Mesh1D& fine);

// Spectral coefficients of a grid function by composite trapezoidal
// quadrature on the mesh refined 4x.
SpectralVector lift_to_spectral(const GridFunctionH& x, const Mesh1D& mesh,
                                const EigenBasis& basis, std::size_t n_modes);

// Highest mode the lift quadrature resolves without aliasing: 2 n_cells.
std::size_t lift_mode_cap(const Mesh1D& mesh, const EigenBasis& basis);

// Reusable quadrature table for repeated lifts on one mesh.
class SpectralLift {
public:
  SpectralLift(const Mesh1D& mesh, const EigenBasis& basis,
               std::size_t n_modes);
  SpectralVector apply(const GridFunctionH& x) const;

private:
  Mesh1D mesh_;
  std::size_t n_modes_;
  std::vector<double> table_; // (points x modes), weight folded in
};

// Fully discrete vs exact linear flow: S_{k,h}(t) P_h x - S(t) x, returned
// in spectral coordinates. Throws std::invalid_argument for t <= 0.
SpectralVector error_operator_Fkh(double t, const SpectralVector& x, double k,
                                  const FemOperators& ops,
                                  const EigenBasis& basis);

// Nodal values of basis functions: row-major (n_nodes x modes) table of
// weight_j * e_j(xi_i).
std::vector<double> nodal_table(const EigenBasis& basis, const Mesh1D& mesh,
                                std::size_t modes,
                                const std::vector<double>* weights = nullptr);

// Loads <e_j, phi_i> by the same 4-point Gauss rule project_Ph uses;
// row-major (n_nodes x modes).
std::vector<double> spectral_load_matrix(const EigenBasis& basis,
                                         const FemOperators& ops,
                                         std::size_t modes);

// Dense generalized eigendecomposition of (K, M) for small meshes; columns
// of `vectors` are M-orthonormal.
struct PencilEigen {
  std::vector<double> values;
  std::vector<double> vectors; // column-major n x n
  std::size_t n = 0;
};

PencilEigen pencil_eigendecomposition(const FemOperators& ops);

// A_h^s x via the pencil eigendecomposition (test/property use only).
GridFunctionH apply_Ah_power(const GridFunctionH& x, double s,
                             const PencilEigen& eig, const FemOperators& ops);

} // namespace milfem
