#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "milfem/rng.hpp"
#include "milfem/spectral.hpp"

// Trace-class Q-Wiener noise sampled through its Karhunen-Loeve expansion in
// the eigenbasis of A, nested-grid coarsening, and iterated Ito integrals
// with a truncated Fourier Levy-area sampler.
namespace milfem {

/// Eigenvalues mu_j of the covariance operator Q; phi_j = e_j of the basis.
struct CovarianceSpectrum {
  std::size_t n_modes = 0;
  std::vector<double> mu; // nonincreasing, summable
  double beta = 0.0;      // decay exponent of the default mu_j = j^-beta
  double alpha = 0.0;     // noise-truncation rate implied by beta

  double trace() const;
  // trace of Q - Q_J (tail beyond mode J).
  double tail_trace(std::size_t J) const;
};

// mu_j = j^-beta; requires beta > 1 (trace class).
CovarianceSpectrum power_covariance(std::size_t n_modes, double beta);

// Q_J: tail modes beyond J zeroed.
CovarianceSpectrum truncate(const CovarianceSpectrum& spec, std::size_t J);

/// Brownian increments per (step, mode) on an equidistant grid.
struct WienerPath {
  double k = 0.0;
  std::size_t n_steps = 0;
  std::size_t n_modes = 0;
  std::uint64_t seed = 0;
  std::uint64_t path_index = 0;
  std::vector<double> incr; // [step * n_modes + mode]

  double increment(std::size_t step, std::size_t mode) const {
    return incr[step * n_modes + mode];
  }
  // W_mode(t_n) by telescoping the increments.
  double endpoint(std::size_t mode) const;
};

// Increments N(0,k) from counter-based streams keyed by
// (seed, path_index, step, mode); output independent of evaluation order.
WienerPath sample_path(const CovarianceSpectrum& spec, double k,
                       std::size_t n_steps, std::uint64_t seed,
                       std::uint64_t path_index);

// Sum groups of `factor` fine increments into coarse ones (exact).
WienerPath coarsen(const WienerPath& path, std::size_t factor);

/// I_{(i,j)} = int int dbeta_i dbeta_j per step, for modes i,j <= m.
struct IteratedIntegrals {
  std::size_t n_steps = 0;
  std::size_t m = 0;
  double k = 0.0;
  bool sampled_levy = false;
  std::vector<double> vals; // [step * m * m + i * m + j]

  const double* step_matrix(std::size_t step) const {
    return vals.data() + step * m * m;
  }
  double value(std::size_t step, std::size_t i, std::size_t j) const {
    return vals[step * m * m + i * m + j];
  }
};

// Levy-area truncation control for the Milstein double integral.
enum class LevyMode {
  // Antisymmetric part set to zero. Valid whenever the double sum is
  // consumed through coefficients symmetric in the mode pair, which holds
  // for every Nemytskii diffusion here; the quadratic form annihilates the
  // Levy area identically.
  zero,
  // Antisymmetric part sampled by the K-term Fourier expansion.
  sampled,
};

// All steps materialized; memory is n_steps * J^2 doubles. The diagonal is
// exact via the Ito formula, off-diagonal entries satisfy
// I_{(i,j)} + I_{(j,i)} = dbeta_i dbeta_j by construction.
IteratedIntegrals iterated_integrals(const WienerPath& path, std::size_t J,
                                     std::size_t levy_terms,
                                     LevyMode mode = LevyMode::sampled);

// One step's m x m matrix written into `out` (size m*m).
void step_iterated_integrals(const WienerPath& path, std::size_t step,
                             std::size_t m, std::size_t levy_terms,
                             LevyMode mode, double* out);

// Brute-force oracle: Riemann-Ito double sum over the sub-increments of one
// step, plus the K-term Fourier reconstruction from the same sub-path.
// Test-only machinery for validating the sampler's truncation error.
struct SubgridOracle {
  std::vector<double> exact;   // m x m Riemann-Ito double sum
  std::vector<double> fourier; // m x m K-term reconstruction
};

SubgridOracle subgrid_oracle(double k, std::size_t m, std::size_t n_sub,
                             std::size_t levy_terms, const rng::PathStream& st,
                             std::uint64_t step);

// Binary path dump (little-endian doubles; header k, N_k, J, seed).
void dump_path(const WienerPath& path, const std::string& file);
WienerPath load_path(const std::string& file);

} // namespace milfem
