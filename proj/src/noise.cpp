#include "milfem/noise.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "milfem/kernels.hpp"

static_assert(std::endian::native == std::endian::little,
              "path dump format assumes a little-endian host");

namespace milfem {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

double CovarianceSpectrum::trace() const {
  double s = 0.0;
  for (double m : mu) s += m;
  return s;
}

double CovarianceSpectrum::tail_trace(std::size_t J) const {
  double s = 0.0;
  for (std::size_t j = J; j < mu.size(); ++j) s += mu[j];
  return s;
}

CovarianceSpectrum power_covariance(std::size_t n_modes, double beta) {
  if (n_modes == 0)
    throw std::invalid_argument("power_covariance: n_modes must be >= 1");
  if (!(beta > 1.0))
    throw std::invalid_argument("power_covariance: beta must exceed 1 (trace class)");
  CovarianceSpectrum spec;
  spec.n_modes = n_modes;
  spec.beta = beta;
  spec.alpha = beta - 1.0;
  spec.mu.resize(n_modes);
  for (std::size_t j = 1; j <= n_modes; ++j)
    spec.mu[j - 1] = std::pow(static_cast<double>(j), -beta);
  return spec;
}

CovarianceSpectrum truncate(const CovarianceSpectrum& spec, std::size_t J) {
  CovarianceSpectrum out = spec;
  for (std::size_t j = J; j < out.mu.size(); ++j) out.mu[j] = 0.0;
  return out;
}

namespace {

// Balanced pairwise sum; the grouping makes dyadic coarsening compose
// bit-exactly (coarsen by 2 twice == coarsen by 4).
double pairwise_sum(const double* v, std::size_t n, std::size_t stride) {
  if (n == 1) return v[0];
  const std::size_t half = n / 2;
  return pairwise_sum(v, half, stride) +
         pairwise_sum(v + half * stride, n - half, stride);
}

} // namespace

double WienerPath::endpoint(std::size_t mode) const {
  if (n_steps == 0) return 0.0;
  return pairwise_sum(incr.data() + mode, n_steps, n_modes);
}

WienerPath sample_path(const CovarianceSpectrum& spec, double k,
                       std::size_t n_steps, std::uint64_t seed,
                       std::uint64_t path_index) {
  if (!(k > 0.0)) throw std::invalid_argument("sample_path: k must be > 0");
  if (n_steps == 0)
    throw std::invalid_argument("sample_path: need at least one step");
  WienerPath path;
  path.k = k;
  path.n_steps = n_steps;
  path.n_modes = spec.n_modes;
  path.seed = seed;
  path.path_index = path_index;
  path.incr.resize(n_steps * spec.n_modes);
  const rng::PathStream st{seed, path_index};
  const double sqrt_k = std::sqrt(k);
  for (std::size_t n = 0; n < n_steps; ++n) {
    double* row = path.incr.data() + n * spec.n_modes;
    std::size_t j = 0;
    for (; j + 4 <= spec.n_modes; j += 4) {
      double z[4];
      st.normal4(rng::DrawClass::increment, n, j / 4, z);
      row[j] = sqrt_k * z[0];
      row[j + 1] = sqrt_k * z[1];
      row[j + 2] = sqrt_k * z[2];
      row[j + 3] = sqrt_k * z[3];
    }
    if (j < spec.n_modes) {
      double z[4];
      st.normal4(rng::DrawClass::increment, n, j / 4, z);
      for (std::size_t l = 0; j < spec.n_modes; ++j, ++l) row[j] = sqrt_k * z[l];
    }
  }
  return path;
}

WienerPath coarsen(const WienerPath& path, std::size_t factor) {
  if (factor == 0 || path.n_steps % factor != 0)
    throw std::invalid_argument("coarsen: factor must divide the step count");
  if (factor == 1) return path;
  WienerPath out;
  out.k = path.k * static_cast<double>(factor);
  out.n_steps = path.n_steps / factor;
  out.n_modes = path.n_modes;
  out.seed = path.seed;
  out.path_index = path.path_index;

  if ((factor & (factor - 1)) == 0) {
    // Power-of-two factor: halve level by level (contiguous, vectorizable);
    // the grouping equals the balanced pairwise tree.
    std::vector<double> buf = path.incr;
    std::size_t steps = path.n_steps;
    const std::size_t m = path.n_modes;
    while (steps > out.n_steps) {
      for (std::size_t s = 0; s < steps / 2; ++s) {
        const double* a = buf.data() + (2 * s) * m;
        const double* b = buf.data() + (2 * s + 1) * m;
        double* dst = buf.data() + s * m;
        for (std::size_t j = 0; j < m; ++j) dst[j] = a[j] + b[j];
      }
      steps /= 2;
    }
    buf.resize(out.n_steps * m);
    out.incr = std::move(buf);
  } else {
    out.incr.resize(out.n_steps * out.n_modes);
    for (std::size_t s = 0; s < out.n_steps; ++s)
      for (std::size_t j = 0; j < out.n_modes; ++j)
        out.incr[s * out.n_modes + j] = pairwise_sum(
            path.incr.data() + s * factor * path.n_modes + j, factor,
            path.n_modes);
  }
  return out;
}

void step_iterated_integrals(const WienerPath& path, std::size_t step,
                             std::size_t m, std::size_t levy_terms,
                             LevyMode mode, double* out) {
  if (m > path.n_modes)
    throw std::invalid_argument("step_iterated_integrals: more modes than path carries");
  const double k = path.k;
  const double* db = path.incr.data() + step * path.n_modes;
  // Symmetric part: (dbeta_i dbeta_j - k delta_ij) / 2. Halving first keeps
  // I_(ij) + I_(ji) = fl(dbeta_i dbeta_j) exact (scaling by 0.5 commutes with
  // rounding).
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out + i * m;
    const double half_dbi = 0.5 * db[i];
    for (std::size_t j = 0; j < m; ++j) row[j] = half_dbi * db[j];
    row[i] -= 0.5 * k;
  }
  if (mode == LevyMode::zero || m < 2) return;
  if (levy_terms == 0)
    throw std::invalid_argument("step_iterated_integrals: levy_terms must be >= 1 in sampled mode");

  const rng::PathStream st{path.seed, path.path_index};
  std::vector<double> ar(m), br(m), c0(m, 0.0);
  std::vector<double> area(m * m, 0.0);
  const double sqrt_var_base = std::sqrt(k) / (kPi * std::sqrt(2.0));
  for (std::size_t r = 1; r <= levy_terms; ++r) {
    const double sd = sqrt_var_base / static_cast<double>(r);
    for (std::size_t j = 0; j < m; ++j) {
      double z[4];
      st.normal4(rng::DrawClass::levy_fourier, step, j * levy_terms + (r - 1),
                 z);
      ar[j] = sd * z[0];
      br[j] = sd * z[1];
      c0[j] -= 2.0 * ar[j];
    }
    kernels::antisym_rank2_accumulate(area.data(), ar.data(), br.data(),
                                      kPi * static_cast<double>(r), m);
  }
  std::vector<double> dbv(db, db + m);
  kernels::antisym_rank2_accumulate(area.data(), c0.data(), dbv.data(), 0.5, m);

  // Fold the area in pairwise, nudging the lower entry so that
  // I_(ij) + I_(ji) reproduces fl(dbeta_i dbeta_j) bit for bit.
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const double s = out[i * m + j]; // == out[j*m+i], the symmetric half
      const double total = s + s;
      const double a = area[i * m + j];
      double u = s + a;
      double v = total - u;
      for (int attempt = 0; attempt < 4 && u + v != total; ++attempt)
        v = std::nextafter(v, u + v < total
                                  ? std::numeric_limits<double>::infinity()
                                  : -std::numeric_limits<double>::infinity());
      if (u + v != total) {
        u = s;
        v = s;
      }
      out[i * m + j] = u;
      out[j * m + i] = v;
    }
  }
}

IteratedIntegrals iterated_integrals(const WienerPath& path, std::size_t J,
                                     std::size_t levy_terms, LevyMode mode) {
  IteratedIntegrals out;
  out.n_steps = path.n_steps;
  out.m = J;
  out.k = path.k;
  out.sampled_levy = (mode == LevyMode::sampled);
  out.vals.resize(path.n_steps * J * J);
  for (std::size_t n = 0; n < path.n_steps; ++n)
    step_iterated_integrals(path, n, J, levy_terms, mode,
                            out.vals.data() + n * J * J);
  return out;
}

SubgridOracle subgrid_oracle(double k, std::size_t m, std::size_t n_sub,
                             std::size_t levy_terms, const rng::PathStream& st,
                             std::uint64_t step) {
  SubgridOracle oracle;
  oracle.exact.assign(m * m, 0.0);
  oracle.fourier.assign(m * m, 0.0);
  const double dt = k / static_cast<double>(n_sub);
  const double sd = std::sqrt(dt);

  // Sub-increments and running path values beta_j(t_q).
  std::vector<double> dz(n_sub * m);
  for (std::size_t q = 0; q < n_sub; ++q)
    for (std::size_t j = 0; j < m; ++j)
      dz[q * m + j] =
          sd * st.normal(rng::DrawClass::oracle_subgrid, step, q * m + j);
  std::vector<double> beta((n_sub + 1) * m, 0.0);
  for (std::size_t q = 0; q < n_sub; ++q)
    for (std::size_t j = 0; j < m; ++j)
      beta[(q + 1) * m + j] = beta[q * m + j] + dz[q * m + j];

  // Left-point Riemann-Ito double sum.
  for (std::size_t q = 0; q < n_sub; ++q) {
    const double* b = beta.data() + q * m;
    const double* d = dz.data() + q * m;
    for (std::size_t i = 0; i < m; ++i) {
      double* row = oracle.exact.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) row[j] += b[i] * d[j];
    }
  }

  // K-term Fourier reconstruction from the same sub-path: bridge
  // coefficients by rectangle quadrature, then the sampler's formula.
  const double* dbeta = beta.data() + n_sub * m;
  for (std::size_t i = 0; i < m; ++i) {
    double* row = oracle.fourier.data() + i * m;
    for (std::size_t j = 0; j < m; ++j) row[j] = 0.5 * dbeta[i] * dbeta[j];
    row[i] -= 0.5 * k;
  }
  std::vector<double> ar(m), br(m), c0(m, 0.0), dbv(dbeta, dbeta + m);
  for (std::size_t r = 1; r <= levy_terms; ++r) {
    const double w = 2.0 * kPi * static_cast<double>(r) / k;
    for (std::size_t j = 0; j < m; ++j) {
      double ca = 0.0, cb = 0.0;
      for (std::size_t q = 1; q < n_sub; ++q) {
        const double t = static_cast<double>(q) * dt;
        const double bridge = beta[q * m + j] - t / k * dbeta[j];
        ca += bridge * std::cos(w * t);
        cb += bridge * std::sin(w * t);
      }
      ar[j] = 2.0 / k * dt * ca;
      br[j] = 2.0 / k * dt * cb;
      c0[j] -= 2.0 * ar[j];
    }
    kernels::antisym_rank2_accumulate(oracle.fourier.data(), ar.data(),
                                      br.data(), kPi * static_cast<double>(r),
                                      m);
  }
  kernels::antisym_rank2_accumulate(oracle.fourier.data(), c0.data(),
                                    dbv.data(), 0.5, m);
  return oracle;
}

void dump_path(const WienerPath& path, const std::string& file) {
  std::FILE* f = std::fopen(file.c_str(), "wb");
  if (f == nullptr)
    throw std::runtime_error("dump_path: cannot open " + file);
  const std::uint64_t n_steps = path.n_steps;
  const std::uint64_t n_modes = path.n_modes;
  std::fwrite(&path.k, sizeof(double), 1, f);
  std::fwrite(&n_steps, sizeof(std::uint64_t), 1, f);
  std::fwrite(&n_modes, sizeof(std::uint64_t), 1, f);
  std::fwrite(&path.seed, sizeof(std::uint64_t), 1, f);
  std::fwrite(path.incr.data(), sizeof(double), path.incr.size(), f);
  std::fclose(f);
}

WienerPath load_path(const std::string& file) {
  std::FILE* f = std::fopen(file.c_str(), "rb");
  if (f == nullptr)
    throw std::runtime_error("load_path: cannot open " + file);
  WienerPath path;
  std::uint64_t n_steps = 0, n_modes = 0;
  bool ok = std::fread(&path.k, sizeof(double), 1, f) == 1 &&
            std::fread(&n_steps, sizeof(std::uint64_t), 1, f) == 1 &&
            std::fread(&n_modes, sizeof(std::uint64_t), 1, f) == 1 &&
            std::fread(&path.seed, sizeof(std::uint64_t), 1, f) == 1;
  if (ok) {
    path.n_steps = n_steps;
    path.n_modes = n_modes;
    path.incr.resize(n_steps * n_modes);
    ok = std::fread(path.incr.data(), sizeof(double), path.incr.size(), f) ==
         path.incr.size();
  }
  std::fclose(f);
  if (!ok) throw std::runtime_error("load_path: truncated file " + file);
  return path;
}

} // namespace milfem
