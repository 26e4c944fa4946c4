#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "milfem/fem.hpp"
#include "milfem/residual.hpp"
#include "milfem/rng.hpp"

using namespace milfem;

namespace {

GridFunctionH random_grid(const Mesh1D& mesh, std::uint64_t tag) {
  const rng::PathStream st{11, tag};
  GridFunctionH x = zero_grid_function(mesh);
  for (std::size_t i = 0; i < x.size(); ++i)
    x.nodal[i] = st.normal(rng::DrawClass::probe, 0, i);
  return x;
}

} // namespace

TEST_CASE("assembly stencils") {
  const Mesh1D mesh = make_mesh(4);
  const FemOperators ops = assemble(mesh);
  CHECK(ops.stiffness.diag[0] == doctest::Approx(8.0).epsilon(1e-14));
  CHECK(ops.stiffness.off[0] == doctest::Approx(-4.0).epsilon(1e-14));
  CHECK(ops.mass.diag[0] == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
  CHECK(ops.mass.off[0] == doctest::Approx(1.0 / 24.0).epsilon(1e-14));

  // Interior stiffness rows annihilate constants.
  const Mesh1D fine = make_mesh(16);
  const FemOperators fops = assemble(fine);
  for (std::size_t i = 1; i + 1 < fine.n_nodes(); ++i) {
    const double row_sum = fops.stiffness.off[i - 1] + fops.stiffness.diag[i] +
                           fops.stiffness.off[i];
    CHECK(std::abs(row_sum) < 1e-12);
  }

  // SPD on a small mesh.
  const PencilEigen eig = pencil_eigendecomposition(ops);
  for (double lam : eig.values) CHECK(lam > 0.0);
}

TEST_CASE("orthogonal projector") {
  const EigenBasis basis = laplacian_eigenpairs(64);
  const Mesh1D mesh = make_mesh(16);
  FemOperators ops = assemble(mesh);

  // Idempotence on V_h.
  const GridFunctionH member = random_grid(mesh, 1);
  const GridFunctionH again =
      project_Ph([&](double xi) { return evaluate(member, xi, mesh); }, ops);
  for (std::size_t i = 0; i < member.size(); ++i)
    CHECK(again.nodal[i] == doctest::Approx(member.nodal[i]).epsilon(1e-12));

  // Contraction in H.
  const rng::PathStream st{12, 0};
  for (std::uint64_t t = 0; t < 20; ++t) {
    SpectralVector x;
    x.coeff.resize(32);
    for (std::size_t j = 0; j < 32; ++j)
      x.coeff[j] = st.normal(rng::DrawClass::probe, t, j) /
                   static_cast<double>((j + 1) * (j + 1));
    const GridFunctionH px = project_Ph(x, basis, ops);
    CHECK(mass_norm(px, ops) <= fractional_norm(x, 0.0, basis) * (1 + 1e-10));
  }

  // O(h^2) rate on e_1: error ratio about 4 per mesh halving.
  const SpectralVector e1 = unit_mode(1, 4);
  double errs[2];
  std::size_t idx = 0;
  for (std::size_t cells : {64, 128}) {
    const Mesh1D m = make_mesh(cells);
    FemOperators o = assemble(m);
    const GridFunctionH p = project_Ph(e1, basis, o);
    errs[idx++] = h_distance(e1, p, m, basis);
  }
  CHECK(errs[0] / errs[1] > 3.6);
  CHECK(errs[0] / errs[1] < 4.4);
}

TEST_CASE("ritz projector") {
  const EigenBasis basis = laplacian_eigenpairs(64);

  // Energy-norm contraction and O(h^2) rate on sin(pi x) = e_1 / sqrt(2).
  SpectralVector x = unit_mode(1, 8);
  x.coeff[0] = 1.0 / std::sqrt(2.0);
  double errs[2];
  std::size_t idx = 0;
  for (std::size_t cells : {32, 64}) {
    const Mesh1D m = make_mesh(cells);
    FemOperators o = assemble(m);
    const GridFunctionH r = project_Rh(x, basis, o);
    CHECK(energy_norm(r, o) <= fractional_norm(x, 1.0, basis) * (1 + 1e-10));
    errs[idx++] = h_distance(x, r, m, basis);
  }
  CHECK(errs[0] / errs[1] > 3.6);
  CHECK(errs[0] / errs[1] < 4.4);
}

TEST_CASE("backward euler step") {
  const Mesh1D mesh = make_mesh(16);
  FemOperators ops = assemble(mesh);

  // k -> 0 limit returns the input.
  ops.register_step(1e-14);
  const GridFunctionH x = random_grid(mesh, 2);
  const GridFunctionH still = step_Skh(x, 1e-14, ops);
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(std::abs(still.nodal[i] - x.nodal[i]) < 1e-10);

  // Contraction over random inputs.
  ops.register_step(0.1);
  for (std::uint64_t t = 0; t < 100; ++t) {
    const GridFunctionH y = random_grid(mesh, 100 + t);
    CHECK(mass_norm(step_Skh(y, 0.1, ops), ops) <=
          mass_norm(y, ops) * (1 + 1e-12));
  }

  // n-fold application matches the pencil-eigendecomposition oracle.
  const EigenBasis basis = laplacian_eigenpairs(32);
  const double k = 1.0 / 64;
  ops.register_step(k);
  const PencilEigen eig = pencil_eigendecomposition(ops);
  const GridFunctionH u = project_Ph(unit_mode(1, 32), basis, ops);

  const std::size_t nn = mesh.n_nodes();
  const GridFunctionH mu = mass_apply(u, ops);
  std::vector<double> coords(nn);
  for (std::size_t m = 0; m < nn; ++m) {
    coords[m] = 0.0;
    for (std::size_t i = 0; i < nn; ++i)
      coords[m] += eig.vectors[m * nn + i] * mu.nodal[i];
  }
  const std::size_t n_steps = 20;
  GridFunctionH stepped = u;
  for (std::size_t s = 0; s < n_steps; ++s) stepped = step_Skh(stepped, k, ops);
  GridFunctionH oracle = zero_grid_function(mesh);
  for (std::size_t m = 0; m < nn; ++m) {
    const double decay =
        coords[m] / std::pow(1.0 + k * eig.values[m], double(n_steps));
    for (std::size_t i = 0; i < nn; ++i)
      oracle.nodal[i] += decay * eig.vectors[m * nn + i];
  }
  for (std::size_t i = 0; i < nn; ++i)
    CHECK(stepped.nodal[i] == doctest::Approx(oracle.nodal[i]).epsilon(1e-10));

  // The smallest pencil eigenvalue controls the asymptotic decay factor.
  const double rate =
      mass_norm(stepped, ops) / mass_norm(step_Skh(stepped, k, ops), ops);
  CHECK(rate == doctest::Approx(1.0 + k * eig.values[0]).epsilon(1e-6));
}

TEST_CASE("error operator") {
  const EigenBasis basis = laplacian_eigenpairs(128);
  const SpectralVector e1 = unit_mode(1, 128);

  SUBCASE("zero input and domain errors") {
    const Mesh1D mesh = make_mesh(16);
    FemOperators ops = assemble(mesh);
    SpectralVector zero;
    zero.coeff.assign(128, 0.0);
    ops.register_step(0.125);
    const SpectralVector out = error_operator_Fkh(0.5, zero, 0.125, ops, basis);
    for (double c : out.coeff) CHECK(c == 0.0);
    CHECK_THROWS_AS(error_operator_Fkh(0.0, zero, 0.125, ops, basis),
                    std::invalid_argument);
    CHECK_THROWS_AS(error_operator_Fkh(-1.0, zero, 0.125, ops, basis),
                    std::invalid_argument);
  }

  SUBCASE("coupled refinement rate at fixed t") {
    // ||F_{k,h}(0.5) e_1|| drops about 4x under (h,k) -> (h/2, k/4).
    double errs[3];
    std::size_t idx = 0;
    double k = 1.0 / 8;
    for (std::size_t cells : {8, 16, 32}) {
      const Mesh1D mesh = make_mesh(cells);
      FemOperators ops = assemble(mesh);
      ops.register_step(k);
      const SpectralVector d = error_operator_Fkh(0.5, e1, k, ops, basis);
      errs[idx++] = fractional_norm(d, 0.0, basis);
      k /= 4.0;
    }
    CHECK(errs[0] / errs[1] > 2.8);
    CHECK(errs[0] / errs[1] < 5.5);
    CHECK(errs[1] / errs[2] > 2.8);
    CHECK(errs[1] / errs[2] < 5.5);
  }
}

TEST_CASE("nesting and prolongation") {
  const Mesh1D coarse = make_mesh(8);
  const Mesh1D fine = make_mesh(16);
  FemOperators cops = assemble(coarse);
  FemOperators fops = assemble(fine);
  const GridFunctionH x = random_grid(coarse, 3);
  const GridFunctionH lifted = prolong(x, coarse, fine);
  CHECK(mass_norm(lifted, fops) ==
        doctest::Approx(mass_norm(x, cops)).epsilon(1e-12));
  for (double xi : {0.05, 0.33, 0.5, 0.77, 0.99})
    CHECK(evaluate(lifted, xi, fine) ==
          doctest::Approx(evaluate(x, xi, coarse)).epsilon(1e-13));
  CHECK_THROWS_AS(prolong(x, coarse, make_mesh(12)), std::invalid_argument);
}

TEST_CASE("spectral lift round trip") {
  const EigenBasis basis = laplacian_eigenpairs(64);
  const Mesh1D mesh = make_mesh(64);
  FemOperators ops = assemble(mesh);
  const GridFunctionH p = project_Ph(unit_mode(2, 64), basis, ops);
  const SpectralVector lifted = lift_to_spectral(p, mesh, basis, 8);
  CHECK(lifted.coeff[1] == doctest::Approx(1.0).epsilon(2e-3));
  CHECK(std::abs(lifted.coeff[0]) < 1e-6);
}

TEST_CASE("discrete negative norm estimate") {
  const EigenBasis basis = laplacian_eigenpairs(64);
  const rng::PathStream st{13, 0};
  for (std::size_t cells : {16, 64}) {
    const Mesh1D mesh = make_mesh(cells);
    FemOperators ops = assemble(mesh);
    const PencilEigen eig = pencil_eigendecomposition(ops);
    for (std::uint64_t t = 0; t < 20; ++t) {
      SpectralVector x;
      x.coeff.resize(48);
      for (std::size_t j = 0; j < 48; ++j)
        x.coeff[j] = st.normal(rng::DrawClass::probe, 50 + t, j) /
                     static_cast<double>(j + 1);
      const GridFunctionH px = project_Ph(x, basis, ops);
      const GridFunctionH weighted = apply_Ah_power(px, -0.5, eig, ops);
      CHECK(mass_norm(weighted, ops) <= fractional_norm(x, -1.0, basis) + 1e-8);
    }
  }
}

TEST_CASE("discrete smoothing property") {
  const Mesh1D mesh = make_mesh(48);
  FemOperators ops = assemble(mesh);
  const PencilEigen eig = pencil_eigendecomposition(ops);
  const double k = 1.0 / 32;
  ops.register_step(k);
  for (double rho : {0.5, 1.0}) {
    for (std::uint64_t t = 0; t < 5; ++t) {
      const GridFunctionH x = random_grid(mesh, 400 + t);
      GridFunctionH y = x;
      for (std::size_t j = 1; j <= 64; ++j) {
        y = step_Skh(y, k, ops);
        const GridFunctionH ay = apply_Ah_power(y, rho, eig, ops);
        const double tj = static_cast<double>(j) * k;
        CHECK(mass_norm(ay, ops) <=
              2.0 * std::pow(tj, -rho) * mass_norm(x, ops));
      }
    }
  }
}

TEST_CASE("fkh integral rate for smooth data") {
  // Small version of the deterministic acceptance criterion:
  // (int_0^T ||F_{k,h}(s) e_1||^2 ds)^{1/2} drops about 4x per coupled
  // (h, k) -> (h/2, k/4) refinement.
  const EigenBasis basis = laplacian_eigenpairs(64);
  const SpectralVector e1 = unit_mode(1, 64);
  const double T = 1.0;
  double prev = 0.0;
  double k = 1.0 / 16;
  for (std::size_t cells : {8, 16}) {
    const Mesh1D mesh = make_mesh(cells);
    FemOperators ops = assemble(mesh);
    ops.register_step(k);
    const std::size_t N = static_cast<std::size_t>(std::round(T / k));
    double acc = 0.0;
    for (std::size_t j = 1; j <= N; ++j) {
      for (double g : {-0.5773502691896257, 0.5773502691896257}) {
        const double t = (static_cast<double>(j) - 0.5 + 0.5 * g) * k;
        const SpectralVector d = error_operator_Fkh(t, e1, k, ops, basis);
        const double v = fractional_norm(d, 0.0, basis);
        acc += 0.5 * k * v * v;
      }
    }
    const double val = std::sqrt(acc);
    if (prev > 0.0) {
      CHECK(prev / val > 3.0);
      CHECK(prev / val < 5.5);
    }
    prev = val;
    k /= 4.0;
  }
}
