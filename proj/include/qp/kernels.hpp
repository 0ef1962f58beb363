#pragma once

#include <cstddef>

// Dense double-precision kernels used by the hot loops (layer evaluation,
// nested backprop, quadrature sums). Scalar reference implementations plus
// AVX2/NEON variants selected once at startup; QP_KERNEL=scalar|avx2|neon
// overrides the autodetected choice.

namespace qp::kernels {

// Name of the active backend ("scalar", "avx2", "neon").
const char* active();

// Force a backend by name; returns false if unavailable on this machine.
bool select(const char* name);

double dot(const double* a, const double* b, std::size_t n);

// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);

// y = W x, W row-major (rows x cols)
void matvec(const double* w, std::size_t rows, std::size_t cols,
            const double* x, double* y);

// y = W^T x, W row-major (rows x cols), x of length rows, y of length cols
void matvec_t(const double* w, std::size_t rows, std::size_t cols,
              const double* x, double* y);

// W += u v^T (rank-1 accumulate), W row-major (rows x cols)
void ger(const double* u, std::size_t rows, const double* v, std::size_t cols,
         double* w);

// out[i] = tanh(z[i]) — scalar libm on every backend so results are
// bit-identical across backends.
void tanh_vec(const double* z, double* out, std::size_t n);

} // namespace qp::kernels
