#pragma once

#include <cstdint>
#include <vector>

#include "milfem/fem.hpp"
#include "milfem/noise.hpp"
#include "milfem/problem.hpp"

// The one-step recursion X(t_n) = S_k X(t_{n-1}) + Phi(X(t_{n-1}), t_{n-1}, k)
// with the Milstein-Galerkin increment, its truncated-noise variant and a
// linearly implicit Euler-Maruyama baseline.
namespace milfem {

struct TimeGrid {
  double k = 0.0;
  std::size_t n_steps = 0; // N_k with N_k k <= T < (N_k + 1) k

  double node(std::size_t n) const { return static_cast<double>(n) * k; }
};

TimeGrid make_time_grid(double k, double T);

enum class Variant { milstein, euler_maruyama, truncated_milstein };

struct SchemeConfig {
  Variant variant = Variant::milstein;
  TimeGrid grid;
  Mesh1D mesh;
  std::size_t J = 0;          // truncation parameter (truncated variant only)
  std::size_t levy_terms = 0; // 0 picks ceil(1/k) in sampled mode
  LevyMode levy = LevyMode::zero;
};

/// Adapted grid function produced by one path of the scheme.
struct GridProcess {
  TimeGrid grid;
  std::vector<GridFunctionH> states; // n_steps + 1 entries
  std::uint64_t seed = 0;
  std::uint64_t path_index = 0;

  const GridFunctionH& at(std::size_t n) const { return states[n]; }
};

// sigma -> int_{t*}^{sigma} g(Y(t*)) dW over one coarse step, evaluated on
// the fine sub-grid. Gamma(t*) = 0; mode coefficients are partial sums of
// fine increments against the frozen diffusion state.
class GammaProcess {
public:
  GammaProcess(const GridFunctionH& frozen_state, const ProblemSpec& problem,
               const Mesh1D& mesh, const WienerPath& fine,
               std::size_t coarse_step, std::size_t factor,
               const std::vector<double>& weighted_table, std::size_t modes);

  // Value at sigma = t* + q k_fine; q = 0 gives the zero function.
  GridFunctionH at(std::size_t q) const;

private:
  const WienerPath* fine_;
  const std::vector<double>* table_;
  std::vector<double> frozen_g_; // b_g(Y(t*)) at the nodes
  std::size_t first_fine_step_;
  std::size_t factor_;
  std::size_t modes_;
  std::size_t n_nodes_;
};

struct IncrementParts {
  GridFunctionH drift;    // -k S_{k,h} P_h f(x)
  GridFunctionH euler;    // S_{k,h} P_h g(x) dW
  GridFunctionH milstein; // S_{k,h} P_h double stochastic integral term
};

// Precomputed nodal tables and factorizations for one (problem, config)
// pair; immutable after construction and shared across path workers.
class SchemeRunner {
public:
  SchemeRunner(const ProblemSpec& problem, const SchemeConfig& config,
               FemOperators& ops);

  const SchemeConfig& config() const { return config_; }
  const ProblemSpec& problem() const { return *problem_; }
  const FemOperators& ops() const { return *ops_; }

  std::size_t euler_modes() const { return euler_modes_; }
  std::size_t milstein_modes() const { return milstein_modes_; }
  std::size_t levy_terms() const { return levy_terms_; }

  // xi_h = P_h X_0.
  const GridFunctionH& initial_state() const { return initial_; }

  // Phi_h(x, t_step, k) for the noise slice [t_step, t_step + k] of `path`.
  GridFunctionH increment_phi(const GridFunctionH& x, std::size_t step,
                              const WienerPath& path) const;

  IncrementParts increment_parts(const GridFunctionH& x, std::size_t step,
                                 const WienerPath& path) const;

  // Milstein term from an explicit iterated-integral matrix (m x m with
  // m = milstein_modes()); exposed for noise-linearity tests.
  GridFunctionH milstein_term_from_matrix(const GridFunctionH& x,
                                          const double* iterated) const;

  // Full recursion from P_h X_0; throws BlowupError on non-finite states
  // and std::invalid_argument if the path does not cover the grid.
  GridProcess run(const WienerPath& path) const;

  // Same recursion retaining only every stride-th state (t_0 included);
  // stride must divide the step count.
  std::vector<GridFunctionH> run_strided(const WienerPath& path,
                                         std::size_t stride) const;

private:
  void check_path(const WienerPath& path) const;
  void nodal_increment(const GridFunctionH& x, std::size_t step,
                       const WienerPath& path, double* out) const;

  const ProblemSpec* problem_;
  const FemOperators* ops_;
  SchemeConfig config_;
  std::size_t euler_modes_ = 0;
  std::size_t milstein_modes_ = 0;
  std::size_t levy_terms_ = 0;
  GridFunctionH initial_;
  std::vector<double> table_euler_; // n_nodes x euler_modes, sqrt(mu) e_j
  std::vector<double> table_mil_;   // n_nodes x milstein_modes
  std::vector<double> qdiag_mil_;   // sum_j mu_j e_j(xi_i)^2 over milstein modes
};

// Convenience wrapper: build a runner and integrate one path.
GridProcess run_scheme(const ProblemSpec& problem, const SchemeConfig& config,
                       FemOperators& ops, const WienerPath& path);

/// Monte Carlo estimates of the nonlinear stability inequalities for the
/// concrete increment function.
struct StabilityReport {
  double c_phi_zero = 0.0; // from the Phi(0, t, k) propagated-sum bound
  double c_phi_lip = 0.0;  // from the propagated-difference bound
  double c_phi = 0.0;      // smallest admissible constant observed
};

StabilityReport verify_increment_stability(const ProblemSpec& problem,
                                           const SchemeConfig& config,
                                           FemOperators& ops,
                                           std::size_t n_paths,
                                           std::uint64_t seed);

} // namespace milfem
