#include "map2seq/tensor/kernels.hpp"

namespace map2seq::tensor::kernels::scalar {
namespace {

template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
    for (std::size_t i = 0; i < m; ++i) {
        T* ci = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const T aip = a[i * k + p];
            const T* bp = b + p * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            T s = 0;
            for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[j * k + p];
            c[i * n + j] += s;
        }
    }
}

template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
    for (std::size_t p = 0; p < k; ++p) {
        const T* bp = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const T api = a[p * m + i];
            T* ci = c + i * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
        }
    }
}

template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
T dot(std::size_t n, const T* x, const T* y) {
    T s = 0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

template <typename T>
void add_inplace(std::size_t n, const T* x, T* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += x[i];
}

template <typename T>
void scale_inplace(std::size_t n, T alpha, T* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] *= alpha;
}

template <typename T>
constexpr KernelTable<T> kTable{Isa::kScalar,  gemm_nn<T>, gemm_nt<T>,      gemm_tn<T>,
                                axpy<T>,       dot<T>,     add_inplace<T>, scale_inplace<T>};

}  // namespace

template <typename T>
const KernelTable<T>& table() {
    return kTable<T>;
}

template const KernelTable<float>& table<float>();
template const KernelTable<double>& table<double>();

}  // namespace map2seq::tensor::kernels::scalar
