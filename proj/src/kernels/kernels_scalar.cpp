#include "milfem/kernels.hpp"

namespace milfem::kernels::detail {

void axpy_scalar(double* y, double a, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

double sumsq_scalar(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * x[i];
  return s;
}

void modal_superpose_scalar(double* out, const double* table, const double* w,
                            std::size_t n, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = table + i * m;
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += row[j] * w[j];
    out[i] = s;
  }
}

void rowwise_quad_form_scalar(double* out, const double* phi, const double* L,
                              std::size_t n, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* p = phi + i * m;
    double acc = 0.0;
    for (std::size_t a = 0; a < m; ++a) {
      const double* Lrow = L + a * m;
      double inner = 0.0;
      for (std::size_t b = 0; b < m; ++b) inner += Lrow[b] * p[b];
      acc += p[a] * inner;
    }
    out[i] = acc;
  }
}

void antisym_rank2_accumulate_scalar(double* A, const double* u,
                                     const double* v, double w,
                                     std::size_t m) {
  for (std::size_t a = 0; a < m; ++a) {
    const double wu = w * u[a];
    const double wv = w * v[a];
    double* row = A + a * m;
    for (std::size_t b = 0; b < m; ++b) row[b] += wu * v[b] - wv * u[b];
  }
}

} // namespace milfem::kernels::detail
