#include "milfem/scheme.hpp"

#include <cmath>
#include <stdexcept>

#include "milfem/errors.hpp"
#include "milfem/kernels.hpp"

namespace milfem {

TimeGrid make_time_grid(double k, double T) {
  if (!(k > 0.0) || !(T > 0.0))
    throw std::invalid_argument("make_time_grid: k and T must be positive");
  if (k > T) throw std::invalid_argument("make_time_grid: k exceeds T");
  TimeGrid grid;
  grid.k = k;
  // N_k k <= T < (N_k + 1) k, robust against T/k being integral up to
  // rounding.
  auto n = static_cast<std::size_t>(std::floor(T / k));
  const double ratio = T / k;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) < 1e-9 * rounded)
    n = static_cast<std::size_t>(rounded);
  if (static_cast<double>(n) * k > T) --n;
  grid.n_steps = n;
  return grid;
}

GammaProcess::GammaProcess(const GridFunctionH& frozen_state,
                           const ProblemSpec& problem, const Mesh1D& mesh,
                           const WienerPath& fine, std::size_t coarse_step,
                           std::size_t factor,
                           const std::vector<double>& weighted_table,
                           std::size_t modes)
    : fine_(&fine),
      table_(&weighted_table),
      first_fine_step_(coarse_step * factor),
      factor_(factor),
      modes_(modes),
      n_nodes_(mesh.n_nodes()) {
  frozen_g_.resize(n_nodes_);
  auto* g = problem.diffusion.b.value;
  for (std::size_t i = 0; i < n_nodes_; ++i)
    frozen_g_[i] = g(frozen_state.nodal[i]);
}

GridFunctionH GammaProcess::at(std::size_t q) const {
  GridFunctionH out;
  out.nodal.assign(n_nodes_, 0.0);
  if (q == 0) return out;
  if (q > factor_) throw std::invalid_argument("GammaProcess: q beyond the step");
  std::vector<double> partial(modes_, 0.0);
  for (std::size_t s = 0; s < q; ++s) {
    const double* row =
        fine_->incr.data() + (first_fine_step_ + s) * fine_->n_modes;
    kernels::axpy(partial.data(), 1.0, row, modes_);
  }
  kernels::modal_superpose(out.nodal.data(), table_->data(), partial.data(),
                           n_nodes_, modes_);
  for (std::size_t i = 0; i < n_nodes_; ++i) out.nodal[i] *= frozen_g_[i];
  return out;
}

namespace {

std::size_t clamp_modes(std::size_t wanted, std::size_t available) {
  return wanted < available ? wanted : available;
}

} // namespace

SchemeRunner::SchemeRunner(const ProblemSpec& problem,
                           const SchemeConfig& config, FemOperators& ops)
    : problem_(&problem), ops_(&ops), config_(config) {
  const std::size_t all = problem.covariance.n_modes;
  switch (config.variant) {
    case Variant::milstein:
      euler_modes_ = all;
      milstein_modes_ = all;
      break;
    case Variant::euler_maruyama:
      euler_modes_ = all;
      milstein_modes_ = 0;
      break;
    case Variant::truncated_milstein: {
      if (config.J == 0)
        throw std::invalid_argument("SchemeRunner: truncated variant needs J >= 1");
      // W^{J^2} in the Euler term, W^J in the Milstein term, both clamped to
      // the model spectrum.
      const std::size_t j2 =
          config.J >= 65536 ? all : clamp_modes(config.J * config.J, all);
      euler_modes_ = j2;
      milstein_modes_ = clamp_modes(config.J, all);
      break;
    }
  }
  levy_terms_ = config.levy_terms;
  if (levy_terms_ == 0)
    levy_terms_ = static_cast<std::size_t>(std::ceil(1.0 / config.grid.k));

  ops.register_step(config.grid.k);
  initial_ = project_Ph(problem.x0, problem.basis, ops);

  std::vector<double> sqrt_mu(euler_modes_);
  for (std::size_t j = 0; j < euler_modes_; ++j)
    sqrt_mu[j] = std::sqrt(problem.covariance.mu[j]);
  table_euler_ = nodal_table(problem.basis, config.mesh, euler_modes_, &sqrt_mu);

  if (milstein_modes_ > 0) {
    if (milstein_modes_ == euler_modes_) {
      table_mil_ = table_euler_;
    } else {
      std::vector<double> w(sqrt_mu.begin(), sqrt_mu.begin() + milstein_modes_);
      table_mil_ = nodal_table(problem.basis, config.mesh, milstein_modes_, &w);
    }
    const std::size_t n = config.mesh.n_nodes();
    qdiag_mil_.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = table_mil_.data() + i * milstein_modes_;
      qdiag_mil_[i] = kernels::sumsq(row, milstein_modes_);
    }
  }
}

void SchemeRunner::check_path(const WienerPath& path) const {
  if (std::abs(path.k - config_.grid.k) > 1e-12 * config_.grid.k)
    throw std::invalid_argument("SchemeRunner: path step size does not match grid");
  if (path.n_steps < config_.grid.n_steps)
    throw std::invalid_argument("SchemeRunner: path too short for grid");
  if (path.n_modes < euler_modes_)
    throw std::invalid_argument("SchemeRunner: path carries too few noise modes");
}

void SchemeRunner::nodal_increment(const GridFunctionH& x, std::size_t step,
                                   const WienerPath& path, double* out) const {
  const std::size_t n = config_.mesh.n_nodes();
  const double k = config_.grid.k;
  const double* db = path.incr.data() + step * path.n_modes;

  std::vector<double> diffusion_field(n);
  kernels::modal_superpose(diffusion_field.data(), table_euler_.data(), db, n,
                           euler_modes_);

  auto* bf = problem_->drift.b.value;
  auto* bg = problem_->diffusion.b.value;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = x.nodal[i];
    out[i] = -k * bf(u) + bg(u) * diffusion_field[i];
  }

  if (milstein_modes_ == 0) return;
  auto* dbg = problem_->diffusion.b.deriv;
  if (config_.levy == LevyMode::zero) {
    // Double sum collapsed through the exact symmetry
    // I_{(i,j)} + I_{(j,i)} = dbeta_i dbeta_j.
    std::vector<double> dmil;
    const double* dm = diffusion_field.data();
    if (milstein_modes_ != euler_modes_) {
      dmil.resize(n);
      kernels::modal_superpose(dmil.data(), table_mil_.data(), db, n,
                               milstein_modes_);
      dm = dmil.data();
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double u = x.nodal[i];
      out[i] += 0.5 * dbg(u) * bg(u) * (dm[i] * dm[i] - k * qdiag_mil_[i]);
    }
  } else {
    std::vector<double> L(milstein_modes_ * milstein_modes_);
    step_iterated_integrals(path, step, milstein_modes_, levy_terms_,
                            LevyMode::sampled, L.data());
    std::vector<double> s(n);
    kernels::rowwise_quad_form(s.data(), table_mil_.data(), L.data(), n,
                               milstein_modes_);
    for (std::size_t i = 0; i < n; ++i) {
      const double u = x.nodal[i];
      out[i] += dbg(u) * bg(u) * s[i];
    }
  }
}

GridFunctionH SchemeRunner::increment_phi(const GridFunctionH& x,
                                          std::size_t step,
                                          const WienerPath& path) const {
  check_path(path);
  GridFunctionH incr = zero_grid_function(config_.mesh);
  nodal_increment(x, step, path, incr.nodal.data());
  return step_Skh(incr, config_.grid.k, *ops_);
}

IncrementParts SchemeRunner::increment_parts(const GridFunctionH& x,
                                             std::size_t step,
                                             const WienerPath& path) const {
  check_path(path);
  const std::size_t n = config_.mesh.n_nodes();
  const double k = config_.grid.k;
  const double* db = path.incr.data() + step * path.n_modes;
  IncrementParts parts;

  GridFunctionH tmp = zero_grid_function(config_.mesh);
  auto* bf = problem_->drift.b.value;
  for (std::size_t i = 0; i < n; ++i) tmp.nodal[i] = -k * bf(x.nodal[i]);
  parts.drift = step_Skh(tmp, k, *ops_);

  std::vector<double> field(n);
  kernels::modal_superpose(field.data(), table_euler_.data(), db, n,
                           euler_modes_);
  auto* bg = problem_->diffusion.b.value;
  for (std::size_t i = 0; i < n; ++i) tmp.nodal[i] = bg(x.nodal[i]) * field[i];
  parts.euler = step_Skh(tmp, k, *ops_);

  parts.milstein = zero_grid_function(config_.mesh);
  if (milstein_modes_ > 0) {
    GridFunctionH full = increment_phi(x, step, path);
    for (std::size_t i = 0; i < n; ++i)
      parts.milstein.nodal[i] =
          full.nodal[i] - parts.drift.nodal[i] - parts.euler.nodal[i];
  }
  return parts;
}

GridFunctionH SchemeRunner::milstein_term_from_matrix(
    const GridFunctionH& x, const double* iterated) const {
  const std::size_t n = config_.mesh.n_nodes();
  GridFunctionH tmp = zero_grid_function(config_.mesh);
  std::vector<double> s(n);
  kernels::rowwise_quad_form(s.data(), table_mil_.data(), iterated, n,
                             milstein_modes_);
  auto* bg = problem_->diffusion.b.value;
  auto* dbg = problem_->diffusion.b.deriv;
  for (std::size_t i = 0; i < n; ++i)
    tmp.nodal[i] = dbg(x.nodal[i]) * bg(x.nodal[i]) * s[i];
  return step_Skh(tmp, config_.grid.k, *ops_);
}

GridProcess SchemeRunner::run(const WienerPath& path) const {
  check_path(path);
  GridProcess proc;
  proc.grid = config_.grid;
  proc.seed = path.seed;
  proc.path_index = path.path_index;
  proc.states.reserve(config_.grid.n_steps + 1);
  proc.states.push_back(initial_);
  const std::size_t n = config_.mesh.n_nodes();
  for (std::size_t step = 0; step < config_.grid.n_steps; ++step) {
    GridFunctionH next = step_Skh(proc.states.back(), config_.grid.k, *ops_);
    const GridFunctionH phi = increment_phi(proc.states.back(), step, path);
    for (std::size_t i = 0; i < n; ++i) next.nodal[i] += phi.nodal[i];
    for (std::size_t i = 0; i < n; ++i)
      if (!std::isfinite(next.nodal[i]))
        throw BlowupError("scheme state non-finite at step " +
                              std::to_string(step + 1),
                          step + 1);
    proc.states.push_back(std::move(next));
  }
  return proc;
}

std::vector<GridFunctionH> SchemeRunner::run_strided(const WienerPath& path,
                                                     std::size_t stride) const {
  check_path(path);
  if (stride == 0 || config_.grid.n_steps % stride != 0)
    throw std::invalid_argument("run_strided: stride must divide the step count");
  std::vector<GridFunctionH> kept;
  kept.reserve(config_.grid.n_steps / stride + 1);
  kept.push_back(initial_);
  GridFunctionH state = initial_;
  const std::size_t n = config_.mesh.n_nodes();
  for (std::size_t step = 0; step < config_.grid.n_steps; ++step) {
    GridFunctionH next = step_Skh(state, config_.grid.k, *ops_);
    const GridFunctionH phi = increment_phi(state, step, path);
    for (std::size_t i = 0; i < n; ++i) next.nodal[i] += phi.nodal[i];
    for (std::size_t i = 0; i < n; ++i)
      if (!std::isfinite(next.nodal[i]))
        throw BlowupError("scheme state non-finite at step " +
                              std::to_string(step + 1),
                          step + 1);
    state = std::move(next);
    if ((step + 1) % stride == 0) kept.push_back(state);
  }
  return kept;
}

GridProcess run_scheme(const ProblemSpec& problem, const SchemeConfig& config,
                       FemOperators& ops, const WienerPath& path) {
  return SchemeRunner(problem, config, ops).run(path);
}

StabilityReport verify_increment_stability(const ProblemSpec& problem,
                                           const SchemeConfig& config,
                                           FemOperators& ops,
                                           std::size_t n_paths,
                                           std::uint64_t seed) {
  SchemeRunner runner(problem, config, ops);
  const std::size_t N = config.grid.n_steps;
  const double k = config.grid.k;
  const double p = problem.p;
  const GridFunctionH zero = zero_grid_function(config.mesh);

  // || sum_{j=m}^n S^{n-j} Phi(0) ||_{L_p} <= C (t_n - t_{m-1})^{1/2}:
  // accumulate the rolling propagated sums for every m.
  std::vector<double> pmean((N + 1) * (N + 1), 0.0); // [m*(N+1)+n] E|.|^p
  // Difference bound with Y = scheme output, Z = 0: collect both sides of
  // the squared inequality per n.
  std::vector<double> lhs_mean(N + 1, 0.0);
  std::vector<std::vector<double>> ynorm_mean(N + 1); // per n, |Y(t_j)| terms
  std::vector<double> ymean((N + 1), 0.0);            // E |Y(t_{j})|^p

  for (std::size_t pi = 0; pi < n_paths; ++pi) {
    const WienerPath path =
        sample_path(problem.covariance, k, N, seed, pi);
    std::vector<GridFunctionH> phi0(N);
    for (std::size_t j = 0; j < N; ++j)
      phi0[j] = runner.increment_phi(zero, j, path);
    for (std::size_t m = 1; m <= N; ++m) {
      GridFunctionH s = zero;
      for (std::size_t nn = m; nn <= N; ++nn) {
        s = step_Skh(s, k, ops);
        for (std::size_t i = 0; i < s.size(); ++i)
          s.nodal[i] += phi0[nn - 1].nodal[i];
        pmean[m * (N + 1) + nn] +=
            std::pow(mass_norm(s, ops), p) / static_cast<double>(n_paths);
      }
    }

    const GridProcess y = runner.run(path);
    GridFunctionH diff_acc = zero;
    for (std::size_t nn = 1; nn <= N; ++nn) {
      diff_acc = step_Skh(diff_acc, k, ops);
      const GridFunctionH py =
          runner.increment_phi(y.states[nn - 1], nn - 1, path);
      const GridFunctionH pz = phi0[nn - 1];
      for (std::size_t i = 0; i < diff_acc.size(); ++i)
        diff_acc.nodal[i] += py.nodal[i] - pz.nodal[i];
      lhs_mean[nn] +=
          std::pow(mass_norm(diff_acc, ops), p) / static_cast<double>(n_paths);
    }
    for (std::size_t j = 0; j < N; ++j)
      ymean[j] += std::pow(mass_norm(y.states[j], ops), p) /
                  static_cast<double>(n_paths);
  }

  StabilityReport report;
  for (std::size_t m = 1; m <= N; ++m)
    for (std::size_t nn = m; nn <= N; ++nn) {
      const double lp = std::pow(pmean[m * (N + 1) + nn], 1.0 / p);
      const double span = std::sqrt(static_cast<double>(nn - m + 1) * k);
      if (span > 0.0)
        report.c_phi_zero = std::max(report.c_phi_zero, lp / span);
    }
  for (std::size_t nn = 1; nn <= N; ++nn) {
    const double lhs2 = std::pow(std::pow(lhs_mean[nn], 1.0 / p), 2.0);
    double rhs = 0.0;
    for (std::size_t j = 1; j <= nn; ++j) {
      const double tdiff = (static_cast<double>(nn) - static_cast<double>(j) + 1.0) * k;
      rhs += k / std::sqrt(tdiff) *
             std::pow(std::pow(ymean[j - 1], 1.0 / p), 2.0);
    }
    if (rhs > 0.0)
      report.c_phi_lip = std::max(report.c_phi_lip, std::sqrt(lhs2 / rhs));
  }
  report.c_phi = std::max(report.c_phi_zero, report.c_phi_lip);
  return report;
}

} // namespace milfem
