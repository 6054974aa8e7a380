#pragma once

// Dense inner-loop kernels. Every routine has a scalar reference version
// and, on x86-64, an AVX2+FMA version; the active table is chosen once at
// startup from CPUID and can be pinned with MAP2SEQ_ISA=scalar|avx2.
//
// All matrices are row-major and densely packed. The gemm variants
// accumulate into C (C += ...), they never overwrite it.

#include <cstddef>
#include <string_view>

namespace map2seq::tensor::kernels {

enum class Isa { kScalar, kAvx2 };

std::string_view isa_name(Isa isa);

template <typename T>
struct KernelTable {
    Isa isa;
    // C[m x n] += A[m x k] * B[k x n]
    void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c);
    // C[m x n] += A[m x k] * B[n x k]^T
    void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c);
    // C[m x n] += A[k x m]^T * B[k x n]
    void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c);
    // y += alpha * x
    void (*axpy)(std::size_t n, T alpha, const T* x, T* y);
    T (*dot)(std::size_t n, const T* x, const T* y);
    // y = x + y elementwise
    void (*add_inplace)(std::size_t n, const T* x, T* y);
    // y *= alpha
    void (*scale_inplace)(std::size_t n, T alpha, T* y);
};

// Highest ISA the running CPU supports.
Isa detected_isa();
bool isa_available(Isa isa);

template <typename T>
const KernelTable<T>& table(Isa isa);

// Table used by tensor ops.
template <typename T>
const KernelTable<T>& active();

// Pins the active ISA (tests, benchmarks). Throws if unavailable.
void set_active_isa(Isa isa);
Isa active_isa();

namespace scalar {
template <typename T>
const KernelTable<T>& table();
}

#if defined(__x86_64__) || defined(_M_X64)
#define MAP2SEQ_HAVE_AVX2_KERNELS 1
namespace avx2 {
template <typename T>
const KernelTable<T>& table();
}
#endif

}  // namespace map2seq::tensor::kernels
