#pragma once

#include <cstdint>
#include <vector>

#include "milfem/scheme.hpp"

// Residual operators, the stochastic Spijker norm and sup norm with Monte
// Carlo standard errors, the five-term truncation-error decomposition, the
// discrete Gronwall checker and the Burkholder constant.
namespace milfem {

/// Monte Carlo estimate with its standard error.
struct LpEstimate {
  double value = 0.0;
  double se = 0.0;
};

/// R_k[Z] evaluated at every grid node of one path.
struct ResidualField {
  TimeGrid grid;
  std::vector<GridFunctionH> values; // n_steps + 1
};

struct NormReport {
  LpEstimate spijker;
  LpEstimate sup;
  double p = 2.0;
  std::size_t n_paths = 0;
};

// R_k[Z](t_0) = Z(t_0) - xi_h, R_k[Z](t_n) = Z(t_n) - S_k Z(t_{n-1})
// - Phi(Z(t_{n-1}), t_{n-1}, k). Exactly zero on scheme output.
ResidualField residual(const GridProcess& Z, const SchemeRunner& runner,
                       const WienerPath& path);

// Discrete variation-of-constants reconstruction: the inverse of R_k.
GridProcess reconstruct_from_residual(const ResidualField& V,
                                      const SchemeRunner& runner,
                                      const WienerPath& path);

/// Per-node scalar samples across paths; Lp reduction with standard errors.
class NodeSampleSet {
public:
  explicit NodeSampleSet(std::size_t n_nodes) : samples_(n_nodes) {}

  // Preallocated form for parallel writers: slots indexed by path.
  NodeSampleSet(std::size_t n_nodes, std::size_t n_paths)
      : samples_(n_nodes, std::vector<double>(n_paths, 0.0)) {}

  void add_path(const std::vector<double>& per_node);
  void set_path(std::size_t path, const std::vector<double>& per_node);
  std::size_t n_paths() const {
    return samples_.empty() ? 0 : samples_[0].size();
  }
  std::size_t n_nodes() const { return samples_.size(); }

  LpEstimate node(std::size_t i, double p) const;
  // max over nodes of the per-node Lp estimates; se taken at the argmax.
  LpEstimate max_over_nodes(double p) const;

private:
  std::vector<std::vector<double>> samples_; // [node][path]
};

// Lp estimate from raw nonnegative samples: (mean x^p)^{1/p}, delta-method se.
LpEstimate lp_estimate(const std::vector<double>& samples, double p);

// ||Z(t_n)||_H per node for one path.
std::vector<double> state_norms(const GridProcess& Z, const FemOperators& ops);

// Propagated partial sums of a residual field: index 0 holds ||V(t_0)||,
// index n >= 1 holds || sum_{j<=n} S_k^{n-j} V(t_j) ||. One sweep, O(N)
// solves.
std::vector<double> propagated_residual_norms(const ResidualField& V,
                                              const FemOperators& ops);

// Spijker and sup norm of per-path fields (batch form; the harness uses the
// accumulators directly for streaming).
NormReport grid_norms(const std::vector<ResidualField>& fields,
                      const FemOperators& ops, double p);

LpEstimate sup_norm_processes(const std::vector<GridProcess>& zs,
                              const FemOperators& ops, double p);

// err / res with the conventions of the two-sided estimate: both zero gives
// 1, res = 0 with err > 0 throws std::runtime_error.
double two_sided_ratio(double err, double res);

struct GronwallResult {
  bool holds = false;
  std::size_t violation_index = 0; // first n violating the hypothesis
  double implied_constant = 0.0;   // max_n x_n / C1
};

// Verifies x_n <= C1 + C2 k sum_{j<=n} (t_n - t_{j-1})^{-1+eta} x_{j-1}.
GronwallResult gronwall_check(const std::vector<double>& x, double C1,
                              double C2, double eta, double k);

// C(p) = (p(p-1)/2)^{1/2} (p/(p-1))^{p/2-1}; p >= 2.
double burkholder_constant(double p);

// Max entrywise deviation of
//   sum_{j<=n} S_k^{n-j} (S(k) - S_k) S(t_{j-1}) = S(t_n) - S_k^n
// evaluated as dense matrices over the first m spectral modes lifted into
// V_h. Small instances only.
double telescoping_check(FemOperators& ops, const EigenBasis& basis, double k,
                         std::size_t n, std::size_t m);

// Scalar surrogate of the same identity with diagonal S and S_k.
double telescoping_check_diagonal(const std::vector<double>& lambdas, double k,
                                  std::size_t n);

/// The five summands dominating the local truncation error, with the mild
/// solution replaced by a fine-grid reference on the same mesh.
struct ConsistencyReport {
  double initial = 0.0;
  double semigroup_x0 = 0.0;
  double drift_semigroup = 0.0;
  double diffusion_semigroup = 0.0;
  double increment = 0.0;
  // Spijker norm of the restricted reference's residual, for the inequality
  // check.
  LpEstimate residual_norm;

  double total() const {
    return initial + semigroup_x0 + drift_semigroup + diffusion_semigroup +
           increment;
  }
};

// Fine and coarse configs must share the mesh; the fine grid must refine the
// coarse one by `time_factor`.
ConsistencyReport consistency_terms(const ProblemSpec& problem,
                                    const SchemeConfig& coarse,
                                    const SchemeConfig& fine,
                                    FemOperators& ops, std::size_t time_factor,
                                    std::size_t n_paths, std::uint64_t seed);

// H-distance between a spectral function and a grid function by composite
// Gauss quadrature on the 4x refined mesh.
double h_distance(const SpectralVector& x, const GridFunctionH& u,
                  const Mesh1D& mesh, const EigenBasis& basis);

} // namespace milfem
