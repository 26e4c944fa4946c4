#pragma once

#include <cstddef>
#include <string_view>

// Data-parallel inner loops of the solver. Every kernel has a scalar
// reference implementation and an AVX2/FMA variant; the active backend is
// chosen once at startup from CPUID and can be overridden for equivalence
// testing. Results of the two backends agree up to floating point
// reassociation (tests pin the tolerance).
namespace milfem::kernels {

enum class Backend { scalar, avx2 };

// Backend selected at startup (avx2 when the CPU supports it).
Backend active_backend();

// Force a backend; throws std::invalid_argument if unsupported on this CPU.
void set_backend(Backend b);

bool cpu_has_avx2();

std::string_view backend_name(Backend b);

// y[i] += a * x[i]
void axpy(double* y, double a, const double* x, std::size_t n);

double dot(const double* x, const double* y, std::size_t n);

double sumsq(const double* x, std::size_t n);

// out[i] = sum_j table[i*m + j] * w[j]  (row-major n x m table).
// Superimposes m weighted basis columns onto n nodes; the per-step hot loop
// of the diffusion term.
void modal_superpose(double* out, const double* table, const double* w,
                     std::size_t n, std::size_t m);

// out[i] = sum_{a,b} phi[i*m+a] * L[a*m+b] * phi[i*m+b]
// Row-wise quadratic form against the iterated-integral matrix; the general
// Milstein double sum over mode pairs, O(n * m^2).
void rowwise_quad_form(double* out, const double* phi, const double* L,
                       std::size_t n, std::size_t m);

// A[a*m+b] += w * (u[a]*v[b] - v[a]*u[b])   for a,b < m.
// One Fourier term of the Levy-area expansion.
void antisym_rank2_accumulate(double* A, const double* u, const double* v,
                              double w, std::size_t m);

namespace detail {
// Scalar reference implementations, exposed for equivalence tests.
void axpy_scalar(double*, double, const double*, std::size_t);
double dot_scalar(const double*, const double*, std::size_t);
double sumsq_scalar(const double*, std::size_t);
void modal_superpose_scalar(double*, const double*, const double*,
                            std::size_t, std::size_t);
void rowwise_quad_form_scalar(double*, const double*, const double*,
                              std::size_t, std::size_t);
void antisym_rank2_accumulate_scalar(double*, const double*, const double*,
                                     double, std::size_t);

void axpy_avx2(double*, double, const double*, std::size_t);
double dot_avx2(const double*, const double*, std::size_t);
double sumsq_avx2(const double*, std::size_t);
void modal_superpose_avx2(double*, const double*, const double*, std::size_t,
                          std::size_t);
void rowwise_quad_form_avx2(double*, const double*, const double*,
                            std::size_t, std::size_t);
void antisym_rank2_accumulate_avx2(double*, const double*, const double*,
                                   double, std::size_t);
} // namespace detail

} // namespace milfem::kernels
