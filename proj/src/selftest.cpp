#include "milfem/selftest.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "milfem/harness.hpp"
#include "milfem/residual.hpp"
#include "milfem/rng.hpp"

namespace milfem {

namespace {

SpectralVector random_spectral(const rng::PathStream& st, std::uint64_t tag,
                               std::size_t modes, double decay) {
  SpectralVector x;
  x.coeff.resize(modes);
  for (std::size_t j = 0; j < modes; ++j)
    x.coeff[j] = st.normal(rng::DrawClass::probe, tag, j) *
                 std::pow(static_cast<double>(j + 1), -decay);
  return x;
}

bool projector_checks(std::uint64_t seed, std::string& detail) {
  const EigenBasis basis = laplacian_eigenpairs(64);
  const Mesh1D mesh = make_mesh(32);
  FemOperators ops = assemble(mesh);
  const rng::PathStream st{seed, 1};

  // Idempotence: project a V_h member through its point evaluator.
  GridFunctionH member = zero_grid_function(mesh);
  for (std::size_t i = 0; i < member.size(); ++i)
    member.nodal[i] = st.normal(rng::DrawClass::probe, 100, i);
  const GridFunctionH reproj = project_Ph(
      [&](double xi) { return evaluate(member, xi, mesh); }, ops);
  for (std::size_t i = 0; i < member.size(); ++i)
    if (std::abs(reproj.nodal[i] - member.nodal[i]) > 1e-10) {
      detail = "P_h not idempotent on V_h";
      return false;
    }

  // Contraction and H^1 stability over random smooth functions.
  double worst_ratio = 0.0;
  for (std::uint64_t t = 0; t < 100; ++t) {
    const SpectralVector x = random_spectral(st, 200 + t, 48, 1.5);
    const GridFunctionH px = project_Ph(x, basis, ops);
    const double nx = fractional_norm(x, 0.0, basis);
    if (mass_norm(px, ops) > nx * (1.0 + 1e-8)) {
      detail = "P_h expanded the H-norm";
      return false;
    }
    const double h1 = fractional_norm(x, 1.0, basis);
    if (h1 > 0.0) worst_ratio = std::max(worst_ratio, energy_norm(px, ops) / h1);
  }
  if (worst_ratio > 2.0) {
    detail = "P_h H^1 stability ratio " + std::to_string(worst_ratio);
    return false;
  }
  detail = "H^1 stability ratio " + std::to_string(worst_ratio);
  return true;
}

bool negative_norm_check(std::uint64_t seed, std::string& detail) {
  const EigenBasis basis = laplacian_eigenpairs(64);
  const rng::PathStream st{seed, 2};
  for (std::size_t cells : {16, 32, 64}) {
    const Mesh1D mesh = make_mesh(cells);
    FemOperators ops = assemble(mesh);
    const PencilEigen eig = pencil_eigendecomposition(ops);
    for (std::uint64_t t = 0; t < 25; ++t) {
      const SpectralVector x = random_spectral(st, 10 * cells + t, 48, 1.0);
      const GridFunctionH px = project_Ph(x, basis, ops);
      const GridFunctionH half = apply_Ah_power(px, -0.5, eig, ops);
      const double lhs = mass_norm(half, ops);
      const double rhs = fractional_norm(x, -1.0, basis);
      if (lhs > rhs + 1e-8) {
        detail = "||A_h^{-1/2} P_h x|| = " + std::to_string(lhs) +
                 " > ||x||_{-1} = " + std::to_string(rhs);
        return false;
      }
    }
  }
  return true;
}

bool smoothing_check(std::uint64_t, std::string& detail) {
  // sup over the pencil spectrum of t_j^rho lambda^rho (1+k lambda)^{-j}.
  const Mesh1D mesh = make_mesh(64);
  FemOperators ops = assemble(mesh);
  const PencilEigen eig = pencil_eigendecomposition(ops);
  double worst = 0.0;
  for (double rho : {0.5, 1.0}) {
    for (double k : {1.0 / 16, 1.0 / 64, 1.0 / 256}) {
      for (std::size_t j = 1; j <= 64; ++j) {
        const double tj = static_cast<double>(j) * k;
        for (double lam : eig.values) {
          const double c = std::pow(tj, rho) * std::pow(lam, rho) /
                           std::pow(1.0 + k * lam, static_cast<double>(j));
          worst = std::max(worst, c);
        }
      }
    }
  }
  detail = "measured smoothing constant " + std::to_string(worst);
  return worst <= 2.0;
}

bool gronwall_checks(std::uint64_t, std::string& detail) {
  const double k = 0.125;
  std::vector<double> x(9, 0.5);
  const GronwallResult ok = gronwall_check(x, 1.0, 0.0, 0.5, k);
  if (!ok.holds || ok.implied_constant > 1.0) {
    detail = "bounded sequence rejected";
    return false;
  }
  x[3] = 50.0;
  const GronwallResult bad = gronwall_check(x, 1.0, 0.1, 0.5, k);
  if (bad.holds || bad.violation_index != 3) {
    detail = "violation at n=3 not reported";
    return false;
  }
  return true;
}

bool spijker_oracle_check(std::uint64_t seed, std::string& detail) {
  const Mesh1D mesh = make_mesh(8);
  FemOperators ops = assemble(mesh);
  const double k = 0.25;
  ops.register_step(k);
  const std::size_t nn = mesh.n_nodes();
  const std::size_t N = 4;

  Eigen::MatrixXd M(nn, nn), K(nn, nn);
  M.setZero();
  K.setZero();
  for (std::size_t i = 0; i < nn; ++i) {
    M(i, i) = ops.mass.diag[i];
    K(i, i) = ops.stiffness.diag[i];
    if (i + 1 < nn) {
      M(i, i + 1) = M(i + 1, i) = ops.mass.off[i];
      K(i, i + 1) = K(i + 1, i) = ops.stiffness.off[i];
    }
  }
  const Eigen::MatrixXd Skh = (M + k * K).ldlt().solve(M);

  const rng::PathStream st{seed, 3};
  for (std::uint64_t path = 0; path < 2; ++path) {
    ResidualField field;
    field.grid.k = k;
    field.grid.n_steps = N;
    field.values.assign(N + 1, zero_grid_function(mesh));
    for (std::size_t n = 0; n <= N; ++n)
      for (std::size_t i = 0; i < nn; ++i)
        field.values[n].nodal[i] =
            st.normal(rng::DrawClass::probe, 300 + path, n * nn + i);

    const std::vector<double> fast = propagated_residual_norms(field, ops);
    for (std::size_t n = 1; n <= N; ++n) {
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(nn);
      for (std::size_t j = 1; j <= n; ++j) {
        Eigen::VectorXd v(nn);
        for (std::size_t i = 0; i < nn; ++i) v(i) = field.values[j].nodal[i];
        for (std::size_t a = 0; a < n - j; ++a) v = Skh * v;
        sum += v;
      }
      const double brute = std::sqrt(sum.dot(M * sum));
      if (std::abs(brute - fast[n]) > 1e-12 * std::max(1.0, brute)) {
        detail = "partial sum mismatch at n=" + std::to_string(n);
        return false;
      }
    }
  }
  return true;
}

bool nemytskii_checks(std::uint64_t seed, std::string& detail) {
  for (const std::string& name : scalar_function_names()) {
    try {
      validate_coefficients(scalar_function(name), seed);
    } catch (const std::exception& e) {
      detail = e.what();
      return false;
    }
  }
  return true;
}

bool rng_reproducibility_check(std::uint64_t seed, std::string& detail) {
  // Same small study on 1 and 4 workers must emit identical CSV bytes.
  ExperimentPlan plan;
  plan.problem = default_problem(64, 16);
  plan.study = StudyKind::two_sided;
  plan.k_ladder = {1.0 / 4, 1.0 / 8, 1.0 / 16};
  plan.n_cells = 16;
  plan.ref_time_factor = 4;
  plan.n_paths = 8;
  plan.seed = seed;
  plan.threads = 1;
  const std::string csv1 = report_csv(run_experiment(plan));
  plan.threads = 4;
  const std::string csv4 = report_csv(run_experiment(plan));
  if (csv1 != csv4) {
    detail = "CSV differs between 1 and 4 workers";
    return false;
  }

  // Out-of-order draws reproduce in-order path sampling bit for bit.
  const CovarianceSpectrum spec = power_covariance(16, 2.0);
  const WienerPath path = sample_path(spec, 0.125, 8, seed, 7);
  const rng::PathStream st{seed, 7};
  for (std::size_t n = path.n_steps; n-- > 0;) {
    for (std::size_t j = path.n_modes; j-- > 0;) {
      double z[4];
      st.normal4(rng::DrawClass::increment, n, j / 4, z);
      const double expect = std::sqrt(0.125) * z[j % 4];
      if (path.increment(n, j) != expect) {
        detail = "draw order changed increment values";
        return false;
      }
    }
  }
  return true;
}

} // namespace

std::vector<SelftestResult> run_selftest(
    std::uint64_t seed,
    const std::function<void(const SelftestResult&)>& on_result) {
  using Check = bool (*)(std::uint64_t, std::string&);
  const std::pair<const char*, Check> checks[] = {
      {"projector idempotence and contraction", projector_checks},
      {"discrete negative norm estimate", negative_norm_check},
      {"discrete smoothing bound", smoothing_check},
      {"discrete Gronwall checker", gronwall_checks},
      {"Spijker partial sums vs dense oracle", spijker_oracle_check},
      {"Nemytskii coefficient validation", nemytskii_checks},
      {"RNG reproducibility across workers", rng_reproducibility_check},
  };
  std::vector<SelftestResult> results;
  for (const auto& [name, check] : checks) {
    SelftestResult r;
    r.name = name;
    try {
      r.ok = check(seed, r.detail);
    } catch (const std::exception& e) {
      r.ok = false;
      r.detail = e.what();
    }
    if (on_result) on_result(r);
    results.push_back(std::move(r));
  }
  return results;
}

} // namespace milfem
