#include "qp/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>
#define QP_HAVE_AVX2_BUILD 1
#endif
#if defined(__ARM_NEON) || defined(__aarch64__)
#include <arm_neon.h>
#define QP_HAVE_NEON_BUILD 1
#endif

namespace qp::kernels {

namespace scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void matvec(const double* w, std::size_t rows, std::size_t cols,
            const double* x, double* y) {
  for (std::size_t i = 0; i < rows; ++i) y[i] = dot(w + i * cols, x, cols);
}

void matvec_t(const double* w, std::size_t rows, std::size_t cols,
              const double* x, double* y) {
  std::memset(y, 0, cols * sizeof(double));
  for (std::size_t i = 0; i < rows; ++i) axpy(x[i], w + i * cols, y, cols);
}

void ger(const double* u, std::size_t rows, const double* v, std::size_t cols,
         double* w) {
  for (std::size_t i = 0; i < rows; ++i) axpy(u[i], v, w + i * cols, cols);
}

} // namespace scalar

#ifdef QP_HAVE_AVX2_BUILD
namespace avx2 {

__attribute__((target("avx2,fma")))
double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  __m128d lo = _mm256_castpd256_pd128(acc);
  __m128d hi = _mm256_extractf128_pd(acc, 1);
  lo = _mm_add_pd(lo, hi);
  double s = _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

__attribute__((target("avx2,fma")))
void axpy(double alpha, const double* x, double* y, std::size_t n) {
  __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i,
                     _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i),
                                     _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

__attribute__((target("avx2,fma")))
void matvec(const double* w, std::size_t rows, std::size_t cols,
            const double* x, double* y) {
  for (std::size_t i = 0; i < rows; ++i) y[i] = avx2::dot(w + i * cols, x, cols);
}

__attribute__((target("avx2,fma")))
void matvec_t(const double* w, std::size_t rows, std::size_t cols,
              const double* x, double* y) {
  std::memset(y, 0, cols * sizeof(double));
  for (std::size_t i = 0; i < rows; ++i) avx2::axpy(x[i], w + i * cols, y, cols);
}

__attribute__((target("avx2,fma")))
void ger(const double* u, std::size_t rows, const double* v, std::size_t cols,
         double* w) {
  for (std::size_t i = 0; i < rows; ++i) avx2::axpy(u[i], v, w + i * cols, cols);
}

} // namespace avx2
#endif // QP_HAVE_AVX2_BUILD

#ifdef QP_HAVE_NEON_BUILD
namespace neon {

double dot(const double* a, const double* b, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    acc = vfmaq_f64(acc, vld1q_f64(a + i), vld1q_f64(b + i));
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void matvec(const double* w, std::size_t rows, std::size_t cols,
            const double* x, double* y) {
  for (std::size_t i = 0; i < rows; ++i) y[i] = neon::dot(w + i * cols, x, cols);
}

void matvec_t(const double* w, std::size_t rows, std::size_t cols,
              const double* x, double* y) {
  std::memset(y, 0, cols * sizeof(double));
  for (std::size_t i = 0; i < rows; ++i) neon::axpy(x[i], w + i * cols, y, cols);
}

void ger(const double* u, std::size_t rows, const double* v, std::size_t cols,
         double* w) {
  for (std::size_t i = 0; i < rows; ++i) neon::axpy(u[i], v, w + i * cols, cols);
}

} // namespace neon
#endif // QP_HAVE_NEON_BUILD

namespace {

struct Backend {
  const char* name;
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*matvec)(const double*, std::size_t, std::size_t, const double*, double*);
  void (*matvec_t)(const double*, std::size_t, std::size_t, const double*, double*);
  void (*ger)(const double*, std::size_t, const double*, std::size_t, double*);
};

constexpr Backend kScalar{"scalar", scalar::dot, scalar::axpy,
                          scalar::matvec, scalar::matvec_t, scalar::ger};
#ifdef QP_HAVE_AVX2_BUILD
constexpr Backend kAvx2{"avx2", avx2::dot, avx2::axpy,
                        avx2::matvec, avx2::matvec_t, avx2::ger};
#endif
#ifdef QP_HAVE_NEON_BUILD
constexpr Backend kNeon{"neon", neon::dot, neon::axpy,
                        neon::matvec, neon::matvec_t, neon::ger};
#endif

const Backend* find(const char* name) {
  if (std::strcmp(name, "scalar") == 0) return &kScalar;
#ifdef QP_HAVE_AVX2_BUILD
  if (std::strcmp(name, "avx2") == 0 && __builtin_cpu_supports("avx2") &&
      __builtin_cpu_supports("fma"))
    return &kAvx2;
#endif
#ifdef QP_HAVE_NEON_BUILD
  if (std::strcmp(name, "neon") == 0) return &kNeon;
#endif
  return nullptr;
}

const Backend* detect() {
  if (const char* env = std::getenv("QP_KERNEL")) {
    if (const Backend* b = find(env)) return b;
  }
#ifdef QP_HAVE_AVX2_BUILD
  if (const Backend* b = find("avx2")) return b;
#endif
#ifdef QP_HAVE_NEON_BUILD
  return &kNeon;
#endif
  return &kScalar;
}

const Backend* g_backend = detect();

} // namespace

const char* active() { return g_backend->name; }

bool select(const char* name) {
  const Backend* b = find(name);
  if (!b) return false;
  g_backend = b;
  return true;
}

double dot(const double* a, const double* b, std::size_t n) {
  return g_backend->dot(a, b, n);
}
void axpy(double alpha, const double* x, double* y, std::size_t n) {
  g_backend->axpy(alpha, x, y, n);
}
void matvec(const double* w, std::size_t rows, std::size_t cols,
            const double* x, double* y) {
  g_backend->matvec(w, rows, cols, x, y);
}
void matvec_t(const double* w, std::size_t rows, std::size_t cols,
              const double* x, double* y) {
  g_backend->matvec_t(w, rows, cols, x, y);
}
void ger(const double* u, std::size_t rows, const double* v, std::size_t cols,
         double* w) {
  g_backend->ger(u, rows, v, cols, w);
}

void tanh_vec(const double* z, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(z[i]);
}

} // namespace qp::kernels
