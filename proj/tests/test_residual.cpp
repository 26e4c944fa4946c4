#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "milfem/residual.hpp"
#include "milfem/rng.hpp"

using namespace milfem;

namespace {

SchemeConfig small_config(double k, std::size_t cells) {
  SchemeConfig config;
  config.variant = Variant::milstein;
  config.grid = make_time_grid(k, 1.0);
  config.mesh = make_mesh(cells);
  return config;
}

GridProcess random_process(const SchemeConfig& config, std::uint64_t tag) {
  const rng::PathStream st{31, tag};
  GridProcess z;
  z.grid = config.grid;
  z.states.assign(config.grid.n_steps + 1, zero_grid_function(config.mesh));
  for (std::size_t n = 0; n <= config.grid.n_steps; ++n)
    for (std::size_t i = 0; i < config.mesh.n_nodes(); ++i)
      z.states[n].nodal[i] =
          st.normal(rng::DrawClass::probe, n, i) /
          static_cast<double>(1 + n);
  return z;
}

} // namespace

TEST_CASE("residual of arbitrary fields and reconstruction") {
  ProblemSpec problem = default_problem(64, 8);
  const SchemeConfig config = small_config(1.0 / 8, 8);
  FemOperators ops = assemble(config.mesh);
  const SchemeRunner runner(problem, config, ops);
  const WienerPath path =
      sample_path(problem.covariance, config.grid.k, 8, 41, 0);

  SUBCASE("zero field exposes the negated increments") {
    GridProcess zero;
    zero.grid = config.grid;
    zero.states.assign(9, zero_grid_function(config.mesh));
    const ResidualField r = residual(zero, runner, path);
    for (std::size_t i = 0; i < config.mesh.n_nodes(); ++i)
      CHECK(r.values[0].nodal[i] == -runner.initial_state().nodal[i]);
    const GridFunctionH zero_state = zero_grid_function(config.mesh);
    for (std::size_t n = 1; n <= 8; ++n) {
      const GridFunctionH phi =
          runner.increment_phi(zero_state, n - 1, path);
      for (std::size_t i = 0; i < phi.size(); ++i)
        CHECK(r.values[n].nodal[i] == -phi.nodal[i]);
    }
  }

  SUBCASE("variation of constants round trip") {
    const GridProcess z = random_process(config, 1);
    const ResidualField v = residual(z, runner, path);
    const GridProcess back = reconstruct_from_residual(v, runner, path);
    for (std::size_t n = 0; n <= 8; ++n)
      for (std::size_t i = 0; i < config.mesh.n_nodes(); ++i)
        CHECK(std::abs(back.states[n].nodal[i] - z.states[n].nodal[i]) <=
              1e-10);
  }

  SUBCASE("grid mismatch rejected") {
    GridProcess z = random_process(config, 2);
    z.grid.n_steps = 4;
    z.states.resize(5);
    CHECK_THROWS_AS(residual(z, runner, path), std::invalid_argument);
  }
}

TEST_CASE("spijker norm") {
  const SchemeConfig config = small_config(1.0 / 4, 8);
  FemOperators ops = assemble(config.mesh);
  ops.register_step(config.grid.k);

  SUBCASE("zero field") {
    ResidualField v;
    v.grid = config.grid;
    v.values.assign(5, zero_grid_function(config.mesh));
    const NormReport rep = grid_norms({v, v}, ops, 2.0);
    CHECK(rep.spijker.value == 0.0);
    CHECK(rep.sup.value == 0.0);
  }

  SUBCASE("mass only at t_0") {
    ResidualField v;
    v.grid = config.grid;
    v.values.assign(5, zero_grid_function(config.mesh));
    v.values[0].nodal[2] = 3.0;
    const double expect = mass_norm(v.values[0], ops);
    const NormReport rep = grid_norms({v}, ops, 2.0);
    CHECK(rep.spijker.value == doctest::Approx(expect).epsilon(1e-13));
  }

  SUBCASE("norm axioms on the sampled representation") {
    const rng::PathStream st{32, 0};
    auto make_field = [&](std::uint64_t tag) {
      ResidualField v;
      v.grid = config.grid;
      v.values.assign(5, zero_grid_function(config.mesh));
      for (std::size_t n = 0; n <= 4; ++n)
        for (std::size_t i = 0; i < config.mesh.n_nodes(); ++i)
          v.values[n].nodal[i] = st.normal(rng::DrawClass::probe, tag * 10 + n, i);
      return v;
    };
    std::vector<ResidualField> a, b, sum, scaled;
    for (std::uint64_t m = 0; m < 8; ++m) {
      a.push_back(make_field(2 * m));
      b.push_back(make_field(2 * m + 1));
      ResidualField s = a.back();
      ResidualField sc = a.back();
      for (std::size_t n = 0; n <= 4; ++n)
        for (std::size_t i = 0; i < config.mesh.n_nodes(); ++i) {
          s.values[n].nodal[i] += b.back().values[n].nodal[i];
          sc.values[n].nodal[i] *= -2.5;
        }
      sum.push_back(std::move(s));
      scaled.push_back(std::move(sc));
    }
    const double na = grid_norms(a, ops, 2.0).spijker.value;
    const double nb = grid_norms(b, ops, 2.0).spijker.value;
    const double nsum = grid_norms(sum, ops, 2.0).spijker.value;
    const double nscaled = grid_norms(scaled, ops, 2.0).spijker.value;
    CHECK(nscaled == doctest::Approx(2.5 * na).epsilon(1e-12));
    CHECK(nsum <= na + nb + 1e-12);
    CHECK(na > 0.0);
  }
}

TEST_CASE("sup norm") {
  const SchemeConfig config = small_config(1.0 / 4, 8);
  FemOperators ops = assemble(config.mesh);

  SUBCASE("deterministic constant field") {
    GridProcess z;
    z.grid = config.grid;
    z.states.assign(5, zero_grid_function(config.mesh));
    for (auto& s : z.states) s.nodal[3] = 2.0;
    const double expect = mass_norm(z.states[0], ops);
    const LpEstimate est = sup_norm_processes({z, z, z}, ops, 2.0);
    CHECK(est.value == doctest::Approx(expect).epsilon(1e-13));
    CHECK(est.se == 0.0);
  }

  SUBCASE("p = 2 equals per-node rms") {
    std::vector<GridProcess> zs;
    const rng::PathStream st{33, 0};
    for (std::uint64_t m = 0; m < 16; ++m) {
      GridProcess z;
      z.grid = config.grid;
      z.states.assign(5, zero_grid_function(config.mesh));
      z.states[2].nodal[0] = st.normal(rng::DrawClass::probe, 1, m);
      zs.push_back(std::move(z));
    }
    double rms = 0.0;
    for (const auto& z : zs) {
      const double v = mass_norm(z.states[2], ops);
      rms += v * v / 16.0;
    }
    const LpEstimate est = sup_norm_processes(zs, ops, 2.0);
    CHECK(est.value == doctest::Approx(std::sqrt(rms)).epsilon(1e-12));
  }

  SUBCASE("gaussian surrogate hits the analytic moment") {
    // Scalar N(0,1) embedded in one basis hat; p = 2 estimate must sit
    // within 3 standard errors of ||phi||_H.
    std::vector<GridProcess> zs;
    const rng::PathStream st{34, 0};
    const std::size_t M = 4000;
    for (std::uint64_t m = 0; m < M; ++m) {
      GridProcess z;
      z.grid = config.grid;
      z.states.assign(5, zero_grid_function(config.mesh));
      z.states[1].nodal[4] = st.normal(rng::DrawClass::probe, 2, m);
      zs.push_back(std::move(z));
    }
    GridFunctionH hat = zero_grid_function(config.mesh);
    hat.nodal[4] = 1.0;
    const double analytic = mass_norm(hat, ops); // E[z^2] = 1
    const LpEstimate est = sup_norm_processes(zs, ops, 2.0);
    CHECK(std::abs(est.value - analytic) <= 3.0 * est.se);
  }
}

TEST_CASE("two-sided ratio conventions") {
  CHECK(two_sided_ratio(0.5, 0.5) == 1.0);
  CHECK(two_sided_ratio(0.0, 0.0) == 1.0);
  CHECK(two_sided_ratio(1.0, 0.25) == 4.0);
  CHECK_THROWS_AS(two_sided_ratio(1.0, 0.0), std::runtime_error);
}

TEST_CASE("discrete gronwall checker") {
  const double k = 0.125;

  SUBCASE("bounded sequence with no coupling") {
    const std::vector<double> x(9, 0.7);
    const GronwallResult r = gronwall_check(x, 1.0, 0.0, 1.0, k);
    CHECK(r.holds);
    CHECK(r.implied_constant <= 1.0);
  }

  SUBCASE("violation is located") {
    std::vector<double> x(9, 0.1);
    x[3] = 99.0;
    const GronwallResult r = gronwall_check(x, 1.0, 0.05, 0.5, k);
    CHECK_FALSE(r.holds);
    CHECK(r.violation_index == 3);
  }

  SUBCASE("equality-saturated sequence against the direct recursion") {
    const double C1 = 1.0, C2 = 0.8, eta = 0.5;
    std::vector<double> x;
    for (std::size_t n = 0; n < 16; ++n) {
      double bound = C1;
      for (std::size_t j = 1; j <= n; ++j)
        bound += C2 * k *
                 std::pow((static_cast<double>(n - j) + 1.0) * k, -1.0 + eta) *
                 x[j - 1];
      x.push_back(bound);
    }
    const GronwallResult r = gronwall_check(x, C1, C2, eta, k);
    CHECK(r.holds);
    // The implied constant equals max x_n / C1 from the recursion itself.
    CHECK(r.implied_constant == doctest::Approx(x.back() / C1).epsilon(1e-12));
    CHECK(std::isfinite(r.implied_constant));
  }

  SUBCASE("domain errors") {
    const std::vector<double> x(4, 0.5);
    CHECK_THROWS_AS(gronwall_check(x, 0.0, 1.0, 0.5, k), std::invalid_argument);
    CHECK_THROWS_AS(gronwall_check(x, 1.0, 1.0, 1.5, k), std::invalid_argument);
  }
}

TEST_CASE("burkholder constant") {
  CHECK(burkholder_constant(2.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(burkholder_constant(4.0) ==
        doctest::Approx(std::sqrt(6.0) * 4.0 / 3.0).epsilon(1e-14));
  double prev = 0.0;
  for (double p : {2.0, 3.0, 4.0, 6.0, 8.0}) {
    const double c = burkholder_constant(p);
    CHECK(c >= prev);
    prev = c;
  }
  CHECK_THROWS_AS(burkholder_constant(1.5), std::invalid_argument);
}

TEST_CASE("telescoping identity") {
  const EigenBasis basis = laplacian_eigenpairs(16);

  SUBCASE("single step is trivially exact") {
    const Mesh1D mesh = make_mesh(16);
    FemOperators ops = assemble(mesh);
    CHECK(telescoping_check(ops, basis, 0.125, 1, 8) <= 1e-12);
  }

  SUBCASE("diagonal surrogate") {
    CHECK(telescoping_check_diagonal({1.0, 4.0, 9.0, 100.0}, 0.1, 12) <= 1e-13);
  }

  SUBCASE("default dense instance") {
    const Mesh1D mesh = make_mesh(32);
    FemOperators ops = assemble(mesh);
    const double dev = telescoping_check(ops, basis, 1.0 / 8, 8, 16);
    std::printf("telescoping deviation (n=8, 32 cells): %.3e\n", dev);
    CHECK(dev <= 1e-10);
  }
}

TEST_CASE("consistency decomposition") {
  ProblemSpec problem = default_problem(64, 16);

  SUBCASE("zero-noise linear problem kills terms 3-5") {
    ProblemSpec linear = problem;
    linear.drift.b = scalar_function("zero");
    linear.diffusion.b = scalar_function("zero");
    const SchemeConfig coarse = small_config(1.0 / 8, 16);
    const SchemeConfig fine = small_config(1.0 / 32, 16);
    FemOperators ops = assemble(coarse.mesh);
    const ConsistencyReport rep =
        consistency_terms(linear, coarse, fine, ops, 4, 4, 17);
    CHECK(rep.drift_semigroup == 0.0);
    CHECK(rep.diffusion_semigroup == 0.0);
    CHECK(rep.increment == 0.0);
    CHECK(rep.initial > 0.0);
    CHECK(rep.semigroup_x0 > 0.0);
  }

  SUBCASE("initial term halves like h^2 for smooth data") {
    const SchemeConfig c16 = small_config(1.0 / 8, 16);
    const SchemeConfig f16 = small_config(1.0 / 32, 16);
    const SchemeConfig c32 = small_config(1.0 / 8, 32);
    const SchemeConfig f32 = small_config(1.0 / 32, 32);
    FemOperators ops16 = assemble(c16.mesh);
    FemOperators ops32 = assemble(c32.mesh);
    const double e16 =
        consistency_terms(problem, c16, f16, ops16, 4, 1, 18).initial;
    const double e32 =
        consistency_terms(problem, c32, f32, ops32, 4, 1, 18).initial;
    CHECK(e16 / e32 > 3.6);
    CHECK(e16 / e32 < 4.4);
  }

  SUBCASE("five terms dominate the residual norm") {
    const SchemeConfig coarse = small_config(1.0 / 8, 16);
    const SchemeConfig fine = small_config(1.0 / 64, 16);
    FemOperators ops = assemble(coarse.mesh);
    const ConsistencyReport rep =
        consistency_terms(problem, coarse, fine, ops, 8, 64, 19);
    std::printf("consistency terms: %.3e %.3e %.3e %.3e %.3e vs residual %.3e\n",
                rep.initial, rep.semigroup_x0, rep.drift_semigroup,
                rep.diffusion_semigroup, rep.increment,
                rep.residual_norm.value);
    CHECK(rep.total() >=
          rep.residual_norm.value - 3.0 * rep.residual_norm.se);
  }

  SUBCASE("mismatched grids rejected") {
    const SchemeConfig coarse = small_config(1.0 / 8, 16);
    const SchemeConfig fine = small_config(1.0 / 24, 16);
    FemOperators ops = assemble(coarse.mesh);
    CHECK_THROWS_AS(consistency_terms(problem, coarse, fine, ops, 4, 2, 20),
                    std::invalid_argument);
  }
}
