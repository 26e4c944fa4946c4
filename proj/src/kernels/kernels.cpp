#include "milfem/kernels.hpp"

#include <atomic>
#include <stdexcept>

namespace milfem::kernels {

namespace {

struct Table {
  void (*axpy)(double*, double, const double*, std::size_t);
  double (*dot)(const double*, const double*, std::size_t);
  double (*sumsq)(const double*, std::size_t);
  void (*modal_superpose)(double*, const double*, const double*, std::size_t,
                          std::size_t);
  void (*rowwise_quad_form)(double*, const double*, const double*, std::size_t,
                            std::size_t);
  void (*antisym_rank2_accumulate)(double*, const double*, const double*,
                                   double, std::size_t);
};

constexpr Table kScalar{
    detail::axpy_scalar,          detail::dot_scalar,
    detail::sumsq_scalar,         detail::modal_superpose_scalar,
    detail::rowwise_quad_form_scalar, detail::antisym_rank2_accumulate_scalar};

constexpr Table kAvx2{
    detail::axpy_avx2,          detail::dot_avx2,
    detail::sumsq_avx2,         detail::modal_superpose_avx2,
    detail::rowwise_quad_form_avx2, detail::antisym_rank2_accumulate_avx2};

std::atomic<const Table*> g_table{nullptr};
std::atomic<Backend> g_backend{Backend::scalar};

const Table& table() {
  const Table* t = g_table.load(std::memory_order_acquire);
  if (t == nullptr) {
    if (cpu_has_avx2()) {
      g_backend.store(Backend::avx2, std::memory_order_relaxed);
      g_table.store(&kAvx2, std::memory_order_release);
      return kAvx2;
    }
    g_backend.store(Backend::scalar, std::memory_order_relaxed);
    g_table.store(&kScalar, std::memory_order_release);
    return kScalar;
  }
  return *t;
}

} // namespace

bool cpu_has_avx2() {
#if (defined(__x86_64__) || defined(__i386__)) && defined(__GNUC__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend active_backend() {
  table();
  return g_backend.load(std::memory_order_relaxed);
}

void set_backend(Backend b) {
  if (b == Backend::avx2 && !cpu_has_avx2())
    throw std::invalid_argument("kernels: AVX2 backend not supported on this CPU");
  g_backend.store(b, std::memory_order_relaxed);
  g_table.store(b == Backend::avx2 ? &kAvx2 : &kScalar,
                std::memory_order_release);
}

std::string_view backend_name(Backend b) {
  return b == Backend::avx2 ? "avx2" : "scalar";
}

void axpy(double* y, double a, const double* x, std::size_t n) {
  table().axpy(y, a, x, n);
}

double dot(const double* x, const double* y, std::size_t n) {
  return table().dot(x, y, n);
}

double sumsq(const double* x, std::size_t n) { return table().sumsq(x, n); }

void modal_superpose(double* out, const double* t, const double* w,
                     std::size_t n, std::size_t m) {
  table().modal_superpose(out, t, w, n, m);
}

void rowwise_quad_form(double* out, const double* phi, const double* L,
                       std::size_t n, std::size_t m) {
  table().rowwise_quad_form(out, phi, L, n, m);
}

void antisym_rank2_accumulate(double* A, const double* u, const double* v,
                              double w, std::size_t m) {
  table().antisym_rank2_accumulate(A, u, v, w, m);
}

} // namespace milfem::kernels
