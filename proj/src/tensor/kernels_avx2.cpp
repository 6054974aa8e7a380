// Compiled with -mavx2 -mfma; only reached after a CPUID check.
#include "map2seq/tensor/kernels.hpp"

#if defined(MAP2SEQ_HAVE_AVX2_KERNELS)

#include <immintrin.h>

namespace map2seq::tensor::kernels::avx2 {
namespace {

template <typename T>
struct Vec;

template <>
struct Vec<float> {
    using Reg = __m256;
    static constexpr std::size_t kWidth = 8;
    static Reg load(const float* p) { return _mm256_loadu_ps(p); }
    static void store(float* p, Reg v) { _mm256_storeu_ps(p, v); }
    static Reg set1(float v) { return _mm256_set1_ps(v); }
    static Reg zero() { return _mm256_setzero_ps(); }
    static Reg fmadd(Reg a, Reg b, Reg c) { return _mm256_fmadd_ps(a, b, c); }
    static Reg add(Reg a, Reg b) { return _mm256_add_ps(a, b); }
    static Reg mul(Reg a, Reg b) { return _mm256_mul_ps(a, b); }
    static float hsum(Reg v) {
        __m128 lo = _mm256_castps256_ps128(v);
        __m128 hi = _mm256_extractf128_ps(v, 1);
        lo = _mm_add_ps(lo, hi);
        __m128 shuf = _mm_movehdup_ps(lo);
        __m128 sums = _mm_add_ps(lo, shuf);
        shuf = _mm_movehl_ps(shuf, sums);
        sums = _mm_add_ss(sums, shuf);
        return _mm_cvtss_f32(sums);
    }
};

template <>
struct Vec<double> {
    using Reg = __m256d;
    static constexpr std::size_t kWidth = 4;
    static Reg load(const double* p) { return _mm256_loadu_pd(p); }
    static void store(double* p, Reg v) { _mm256_storeu_pd(p, v); }
    static Reg set1(double v) { return _mm256_set1_pd(v); }
    static Reg zero() { return _mm256_setzero_pd(); }
    static Reg fmadd(Reg a, Reg b, Reg c) { return _mm256_fmadd_pd(a, b, c); }
    static Reg add(Reg a, Reg b) { return _mm256_add_pd(a, b); }
    static Reg mul(Reg a, Reg b) { return _mm256_mul_pd(a, b); }
    static double hsum(Reg v) {
        __m128d lo = _mm256_castpd256_pd128(v);
        __m128d hi = _mm256_extractf128_pd(v, 1);
        lo = _mm_add_pd(lo, hi);
        __m128d high64 = _mm_unpackhi_pd(lo, lo);
        return _mm_cvtsd_f64(_mm_add_sd(lo, high64));
    }
};

template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
    using V = Vec<T>;
    constexpr std::size_t W = V::kWidth;
    const auto va = V::set1(alpha);
    std::size_t i = 0;
    for (; i + 2 * W <= n; i += 2 * W) {
        V::store(y + i, V::fmadd(va, V::load(x + i), V::load(y + i)));
        V::store(y + i + W, V::fmadd(va, V::load(x + i + W), V::load(y + i + W)));
    }
    for (; i + W <= n; i += W) V::store(y + i, V::fmadd(va, V::load(x + i), V::load(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
T dot(std::size_t n, const T* x, const T* y) {
    using V = Vec<T>;
    constexpr std::size_t W = V::kWidth;
    auto acc0 = V::zero(), acc1 = V::zero();
    std::size_t i = 0;
    for (; i + 2 * W <= n; i += 2 * W) {
        acc0 = V::fmadd(V::load(x + i), V::load(y + i), acc0);
        acc1 = V::fmadd(V::load(x + i + W), V::load(y + i + W), acc1);
    }
    for (; i + W <= n; i += W) acc0 = V::fmadd(V::load(x + i), V::load(y + i), acc0);
    T s = V::hsum(V::add(acc0, acc1));
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

// 4 x (2W) register block of C accumulated over k; `a_at(i, p)` abstracts
// the layout of A so the same block serves A*B and A^T*B.
template <typename T, typename AAt>
void gemm_block_4x2(std::size_t i0, std::size_t j0, std::size_t n, std::size_t k, AAt a_at, const T* b,
                    T* c) {
    using V = Vec<T>;
    constexpr std::size_t W = V::kWidth;
    typename V::Reg acc[4][2];
    for (std::size_t r = 0; r < 4; ++r) {
        acc[r][0] = V::load(c + (i0 + r) * n + j0);
        acc[r][1] = V::load(c + (i0 + r) * n + j0 + W);
    }
    for (std::size_t p = 0; p < k; ++p) {
        const auto b0 = V::load(b + p * n + j0);
        const auto b1 = V::load(b + p * n + j0 + W);
        for (std::size_t r = 0; r < 4; ++r) {
            const auto a = V::set1(a_at(i0 + r, p));
            acc[r][0] = V::fmadd(a, b0, acc[r][0]);
            acc[r][1] = V::fmadd(a, b1, acc[r][1]);
        }
    }
    for (std::size_t r = 0; r < 4; ++r) {
        V::store(c + (i0 + r) * n + j0, acc[r][0]);
        V::store(c + (i0 + r) * n + j0 + W, acc[r][1]);
    }
}

template <typename T, typename AAt>
void gemm_generic(std::size_t m, std::size_t n, std::size_t k, AAt a_at, const T* b, T* c) {
    constexpr std::size_t W = Vec<T>::kWidth;
    const std::size_t m4 = m - m % 4;
    const std::size_t n2w = n - n % (2 * W);
    for (std::size_t i0 = 0; i0 < m4; i0 += 4) {
        for (std::size_t j0 = 0; j0 < n2w; j0 += 2 * W) gemm_block_4x2<T>(i0, j0, n, k, a_at, b, c);
    }
    // Column tail for the blocked rows, then the remaining rows.
    if (n2w < n) {
        for (std::size_t i = 0; i < m4; ++i) {
            for (std::size_t p = 0; p < k; ++p) axpy<T>(n - n2w, a_at(i, p), b + p * n + n2w, c + i * n + n2w);
        }
    }
    for (std::size_t i = m4; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) axpy<T>(n, a_at(i, p), b + p * n, c + i * n);
    }
}

template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
    gemm_generic<T>(m, n, k, [a, k](std::size_t i, std::size_t p) { return a[i * k + p]; }, b, c);
}

template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
    gemm_generic<T>(m, n, k, [a, m](std::size_t i, std::size_t p) { return a[p * m + i]; }, b, c);
}

template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
    using V = Vec<T>;
    constexpr std::size_t W = V::kWidth;
    const std::size_t kw = k - k % W;
    for (std::size_t i = 0; i < m; ++i) {
        const T* ai = a + i * k;
        std::size_t j = 0;
        for (; j + 4 <= n; j += 4) {
            auto s0 = V::zero(), s1 = V::zero(), s2 = V::zero(), s3 = V::zero();
            const T* b0 = b + (j + 0) * k;
            const T* b1 = b + (j + 1) * k;
            const T* b2 = b + (j + 2) * k;
            const T* b3 = b + (j + 3) * k;
            for (std::size_t p = 0; p < kw; p += W) {
                const auto av = V::load(ai + p);
                s0 = V::fmadd(av, V::load(b0 + p), s0);
                s1 = V::fmadd(av, V::load(b1 + p), s1);
                s2 = V::fmadd(av, V::load(b2 + p), s2);
                s3 = V::fmadd(av, V::load(b3 + p), s3);
            }
            T r0 = V::hsum(s0), r1 = V::hsum(s1), r2 = V::hsum(s2), r3 = V::hsum(s3);
            for (std::size_t p = kw; p < k; ++p) {
                r0 += ai[p] * b0[p];
                r1 += ai[p] * b1[p];
                r2 += ai[p] * b2[p];
                r3 += ai[p] * b3[p];
            }
            T* ci = c + i * n + j;
            ci[0] += r0;
            ci[1] += r1;
            ci[2] += r2;
            ci[3] += r3;
        }
        for (; j < n; ++j) c[i * n + j] += dot<T>(k, ai, b + j * k);
    }
}

template <typename T>
void add_inplace(std::size_t n, const T* x, T* y) {
    using V = Vec<T>;
    constexpr std::size_t W = V::kWidth;
    std::size_t i = 0;
    for (; i + W <= n; i += W) V::store(y + i, V::add(V::load(x + i), V::load(y + i)));
    for (; i < n; ++i) y[i] += x[i];
}

template <typename T>
void scale_inplace(std::size_t n, T alpha, T* y) {
    using V = Vec<T>;
    constexpr std::size_t W = V::kWidth;
    const auto va = V::set1(alpha);
    std::size_t i = 0;
    for (; i + W <= n; i += W) V::store(y + i, V::mul(va, V::load(y + i)));
    for (; i < n; ++i) y[i] *= alpha;
}

template <typename T>
const KernelTable<T> kTable{Isa::kAvx2,  gemm_nn<T>, gemm_nt<T>,      gemm_tn<T>,
                            axpy<T>,     dot<T>,     add_inplace<T>, scale_inplace<T>};

}  // namespace

template <typename T>
const KernelTable<T>& table() {
    return kTable<T>;
}

template const KernelTable<float>& table<float>();
template const KernelTable<double>& table<double>();

}  // namespace map2seq::tensor::kernels::avx2

#endif
