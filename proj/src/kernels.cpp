#include "rotir/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>

namespace rotir::kernels {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double dot_rev_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[-static_cast<std::ptrdiff_t>(i)] * b[i];
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale_scalar(double alpha, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void matvec_scalar(const double* a, const double* x, double* y,
                   std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_scalar(a + r * cols, x, cols);
}

void matvec_t_scalar(const double* a, const double* x, double* y,
                     std::size_t rows, std::size_t cols) {
  std::memset(y, 0, cols * sizeof(double));
  for (std::size_t r = 0; r < rows; ++r) axpy_scalar(x[r], a + r * cols, y, cols);
}

void ger_scalar(double* a, double alpha, const double* u, const double* v,
                std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) axpy_scalar(alpha * u[r], v, a + r * cols, cols);
}

const Vtable kScalar{
    "scalar",   dot_scalar,      dot_rev_scalar, axpy_scalar,
    scale_scalar, matvec_scalar, matvec_t_scalar, ger_scalar,
};

std::atomic<const Vtable*> g_active{nullptr};

const Vtable* resolve_auto() {
  if (const char* env = std::getenv("ROTIR_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return &kScalar;
    if (std::strcmp(env, "avx2") == 0 && avx2_vtable() != nullptr) return avx2_vtable();
  }
  if (const Vtable* v = avx2_vtable()) return v;
  return &kScalar;
}

const Vtable& active() {
  const Vtable* v = g_active.load(std::memory_order_acquire);
  if (v == nullptr) {
    v = resolve_auto();
    g_active.store(v, std::memory_order_release);
  }
  return *v;
}

}  // namespace

const Vtable& scalar_vtable() noexcept { return kScalar; }

bool avx2_available() noexcept { return avx2_vtable() != nullptr; }

void select_backend(Backend b) {
  switch (b) {
    case Backend::Auto:
      g_active.store(resolve_auto(), std::memory_order_release);
      return;
    case Backend::Scalar:
      g_active.store(&kScalar, std::memory_order_release);
      return;
    case Backend::Avx2:
      if (const Vtable* v = avx2_vtable()) {
        g_active.store(v, std::memory_order_release);
        return;
      }
      throw std::invalid_argument("kernels: AVX2 backend not available on this CPU/build");
  }
  throw std::invalid_argument("kernels: unknown backend");
}

std::string_view active_backend() noexcept { return active().name; }

double dot(const double* a, const double* b, std::size_t n) noexcept {
  return active().dot(a, b, n);
}

double dot_rev(const double* a, const double* b, std::size_t n) noexcept {
  return active().dot_rev(a, b, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept {
  active().axpy(alpha, x, y, n);
}

void scale(double alpha, double* x, std::size_t n) noexcept { active().scale(alpha, x, n); }

void matvec(const double* a, const double* x, double* y, std::size_t rows,
            std::size_t cols) noexcept {
  active().matvec(a, x, y, rows, cols);
}

void matvec_t(const double* a, const double* x, double* y, std::size_t rows,
              std::size_t cols) noexcept {
  active().matvec_t(a, x, y, rows, cols);
}

void ger(double* a, double alpha, const double* u, const double* v, std::size_t rows,
         std::size_t cols) noexcept {
  active().ger(a, alpha, u, v, rows, cols);
}

}  // namespace rotir::kernels
