#pragma once

#include <cstddef>
#include <string_view>

// Dense double-precision kernels used by the identification inner loops.
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2/FMA variant. The variant is picked once at runtime; the scalar and
// vector paths are equivalence-tested against each other in the test suite.
namespace rotir::kernels {

enum class Backend { Auto, Scalar, Avx2 };

// Selects the implementation set. Auto picks the widest instruction set the
// CPU supports. The ROTIR_KERNELS environment variable ("scalar" or "avx2")
// overrides Auto at first use. Throws std::invalid_argument when an
// unavailable backend is requested.
void select_backend(Backend b);
std::string_view active_backend() noexcept;
bool avx2_available() noexcept;

// sum_i a[i] * b[i]
double dot(const double* a, const double* b, std::size_t n) noexcept;

// Correlation tap: sum_{i<n} a[-i] * b[i]. `a` points at the newest sample
// of a signal stored oldest-to-newest, so a[-i] walks backwards in time.
double dot_rev(const double* a, const double* b, std::size_t n) noexcept;

// y[i] += alpha * x[i]
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;

// x[i] *= alpha
void scale(double alpha, double* x, std::size_t n) noexcept;

// y = A x for row-major A (rows x cols); y has `rows` entries.
void matvec(const double* a, const double* x, double* y,
            std::size_t rows, std::size_t cols) noexcept;

// y = A^T x for row-major A (rows x cols); y has `cols` entries.
void matvec_t(const double* a, const double* x, double* y,
              std::size_t rows, std::size_t cols) noexcept;

// Rank-1 update A += alpha * u v^T for row-major A (rows x cols).
void ger(double* a, double alpha, const double* u, const double* v,
         std::size_t rows, std::size_t cols) noexcept;

inline double sum_sq(const double* x, std::size_t n) noexcept { return dot(x, x, n); }

// Implementation table, one entry per backend. Exposed for the dispatcher
// and the equivalence tests.
struct Vtable {
  std::string_view name;
  double (*dot)(const double*, const double*, std::size_t);
  double (*dot_rev)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*scale)(double, double*, std::size_t);
  void (*matvec)(const double*, const double*, double*, std::size_t, std::size_t);
  void (*matvec_t)(const double*, const double*, double*, std::size_t, std::size_t);
  void (*ger)(double*, double, const double*, const double*, std::size_t, std::size_t);
};

const Vtable& scalar_vtable() noexcept;
const Vtable* avx2_vtable() noexcept;  // nullptr when unavailable

}  // namespace rotir::kernels
