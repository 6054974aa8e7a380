#include "map2seq/tensor/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "map2seq/errors.hpp"
#include "map2seq/rng.hpp"
#include "map2seq/tensor/kernels.hpp"

namespace map2seq::tensor {

namespace {

thread_local bool g_grad_enabled = true;

#ifdef NDEBUG
bool g_finite_checks = false;
#else
bool g_finite_checks = true;
#endif

template <typename T>
const kernels::KernelTable<T>& K() {
    return kernels::active<T>();
}

std::string shape_of(std::size_t r, std::size_t c) {
    return "(" + std::to_string(r) + "x" + std::to_string(c) + ")";
}

template <typename T>
[[noreturn]] void shape_fail(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_str() + " and " + b.shape_str());
}

template <typename T>
void require_defined(const char* op, const Tensor<T>& a) {
    if (!a.defined()) throw ShapeError(std::string(op) + ": undefined tensor operand");
}

// Allocates an op result; wires parents only when recording is on and some
// input needs a gradient.
template <typename T>
Tensor<T> make_result(const char* op, std::size_t rows, std::size_t cols,
                      std::initializer_list<const Tensor<T>*> inputs) {
    auto node = std::make_shared<Node<T>>();
    node->rows = rows;
    node->cols = cols;
    node->value.assign(rows * cols, T(0));
    node->op = op;
    for (const Tensor<T>* in : inputs)
        if (in->node()->consumed)
            throw Error("graph_consumed", std::string(op) + ": operand belongs to an already differentiated graph");
    if (g_grad_enabled) {
        for (const Tensor<T>* in : inputs)
            if (in->requires_grad()) node->requires_grad = true;
        if (node->requires_grad)
            for (const Tensor<T>* in : inputs) node->parents.push_back(in->shared());
    }
    return Tensor<T>(std::move(node));
}

template <typename T>
Tensor<T> make_result_vec(const char* op, std::size_t rows, std::size_t cols, const std::vector<Tensor<T>>& inputs) {
    auto node = std::make_shared<Node<T>>();
    node->rows = rows;
    node->cols = cols;
    node->value.assign(rows * cols, T(0));
    node->op = op;
    for (const auto& in : inputs)
        if (in.node()->consumed)
            throw Error("graph_consumed", std::string(op) + ": operand belongs to an already differentiated graph");
    if (g_grad_enabled) {
        for (const auto& in : inputs)
            if (in.requires_grad()) node->requires_grad = true;
        if (node->requires_grad)
            for (const auto& in : inputs) node->parents.push_back(in.shared());
    }
    return Tensor<T>(std::move(node));
}

template <typename T>
void check_finite(const Tensor<T>& t) {
    if (!g_finite_checks) return;
    for (T v : t.data())
        if (!std::isfinite(v)) throw NumericError(std::string("non-finite value produced by ") + t.node()->op);
}

// Parent gradient buffer if that parent participates, else nullptr.
template <typename T>
T* pgrad(Node<T>& self, std::size_t i) {
    Node<T>& p = *self.parents[i];
    if (!p.requires_grad) return nullptr;
    return p.ensure_grad().data();
}

template <typename T>
const T* pval(Node<T>& self, std::size_t i) {
    return self.parents[i]->value.data();
}

template <typename T>
Tensor<T> finish(Tensor<T> out) {
    check_finite(out);
    return out;
}

}  // namespace

// --- Tensor -----------------------------------------------------------------

template <typename T>
Tensor<T> Tensor<T>::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
    return full(rows, cols, T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(std::size_t rows, std::size_t cols, T value, bool requires_grad) {
    auto node = std::make_shared<Node<T>>();
    node->rows = rows;
    node->cols = cols;
    node->value.assign(rows * cols, value);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::from(std::size_t rows, std::size_t cols, std::vector<T> data, bool requires_grad) {
    if (data.size() != rows * cols)
        throw ShapeError("tensor data has " + std::to_string(data.size()) + " values for shape " +
                         shape_of(rows, cols));
    auto node = std::make_shared<Node<T>>();
    node->rows = rows;
    node->cols = cols;
    node->value = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

template <typename T>
std::string Tensor<T>::shape_str() const {
    return node_ ? shape_of(node_->rows, node_->cols) : std::string("(undefined)");
}

template <typename T>
T Tensor<T>::item() const {
    if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_str());
    return node_->value[0];
}

template <typename T>
void Tensor<T>::zero_grad() {
    std::fill(node_->grad.begin(), node_->grad.end(), T(0));
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }
void set_finite_checks(bool enabled) { g_finite_checks = enabled; }
bool finite_checks() { return g_finite_checks; }

// --- ops --------------------------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    require_defined("matmul", a);
    require_defined("matmul", b);
    if (a.cols() != b.rows()) shape_fail("matmul", a, b);
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    auto out = make_result<T>("matmul", m, n, {&a, &b});
    K<T>().gemm_nn(m, n, k, a.data().data(), b.data().data(), out.data().data());
    if (out.requires_grad()) {
        out.node()->backward = [m, n, k](Node<T>& self) {
            const T* dc = self.grad.data();
            if (T* da = pgrad(self, 0)) K<T>().gemm_nt(m, k, n, dc, pval(self, 1), da);
            if (T* db = pgrad(self, 1)) K<T>().gemm_tn(k, n, m, pval(self, 0), dc, db);
        };
    }
    return finish(out);
}

template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
    require_defined("matmul_nt", a);
    require_defined("matmul_nt", b);
    if (a.cols() != b.cols()) shape_fail("matmul_nt", a, b);
    const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
    auto out = make_result<T>("matmul_nt", m, n, {&a, &b});
    K<T>().gemm_nt(m, n, k, a.data().data(), b.data().data(), out.data().data());
    if (out.requires_grad()) {
        out.node()->backward = [m, n, k](Node<T>& self) {
            const T* dc = self.grad.data();
            if (T* da = pgrad(self, 0)) K<T>().gemm_nn(m, k, n, dc, pval(self, 1), da);
            if (T* db = pgrad(self, 1)) K<T>().gemm_tn(n, k, m, dc, pval(self, 0), db);
        };
    }
    return finish(out);
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    require_defined("add", a);
    require_defined("add", b);
    if (a.rows() != b.rows() || a.cols() != b.cols()) shape_fail("add", a, b);
    auto out = make_result<T>("add", a.rows(), a.cols(), {&a, &b});
    auto o = out.data();
    std::copy(b.data().begin(), b.data().end(), o.begin());
    K<T>().add_inplace(o.size(), a.data().data(), o.data());
    if (out.requires_grad()) {
        out.node()->backward = [](Node<T>& self) {
            const std::size_t n = self.grad.size();
            for (std::size_t i = 0; i < 2; ++i)
                if (T* g = pgrad(self, i)) K<T>().add_inplace(n, self.grad.data(), g);
        };
    }
    return finish(out);
}

template <typename T>
Tensor<T> add_row(const Tensor<T>& a, const Tensor<T>& row) {
    require_defined("add_row", a);
    require_defined("add_row", row);
    if (row.rows() != 1 || row.cols() != a.cols()) shape_fail("add_row", a, row);
    const std::size_t m = a.rows(), n = a.cols();
    auto out = make_result<T>("add_row", m, n, {&a, &row});
    auto o = out.data();
    std::copy(a.data().begin(), a.data().end(), o.begin());
    for (std::size_t i = 0; i < m; ++i) K<T>().add_inplace(n, row.data().data(), o.data() + i * n);
    if (out.requires_grad()) {
        out.node()->backward = [m, n](Node<T>& self) {
            const T* dc = self.grad.data();
            if (T* ga = pgrad(self, 0)) K<T>().add_inplace(m * n, dc, ga);
            if (T* gr = pgrad(self, 1))
                for (std::size_t i = 0; i < m; ++i) K<T>().add_inplace(n, dc + i * n, gr);
        };
    }
    return finish(out);
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    require_defined("mul", a);
    require_defined("mul", b);
    if (a.rows() != b.rows() || a.cols() != b.cols()) shape_fail("mul", a, b);
    auto out = make_result<T>("mul", a.rows(), a.cols(), {&a, &b});
    auto o = out.data();
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
    if (out.requires_grad()) {
        out.node()->backward = [](Node<T>& self) {
            const std::size_t n = self.grad.size();
            const T* dc = self.grad.data();
            const T* xa = pval(self, 0);
            const T* xb = pval(self, 1);
            if (T* ga = pgrad(self, 0))
                for (std::size_t i = 0; i < n; ++i) ga[i] += dc[i] * xb[i];
            if (T* gb = pgrad(self, 1))
                for (std::size_t i = 0; i < n; ++i) gb[i] += dc[i] * xa[i];
        };
    }
    return finish(out);
}

template <typename T>
Tensor<T> mul_col(const Tensor<T>& a, const Tensor<T>& col) {
    require_defined("mul_col", a);
    require_defined("mul_col", col);
    if (col.cols() != 1 || col.rows() != a.rows()) shape_fail("mul_col", a, col);
    const std::size_t m = a.rows(), n = a.cols();
    auto out = make_result<T>("mul_col", m, n, {&a, &col});
    auto o = out.data();
    auto x = a.data();
    auto w = col.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) o[i * n + j] = x[i * n + j] * w[i];
    if (out.requires_grad()) {
        out.node()->backward = [m, n](Node<T>& self) {
            const T* dc = self.grad.data();
            const T* xa = pval(self, 0);
            const T* xw = pval(self, 1);
            if (T* ga = pgrad(self, 0))
                for (std::size_t i = 0; i < m; ++i) K<T>().axpy(n, xw[i], dc + i * n, ga + i * n);
            if (T* gw = pgrad(self, 1))
                for (std::size_t i = 0; i < m; ++i) gw[i] += K<T>().dot(n, dc + i * n, xa + i * n);
        };
    }
    return finish(out);
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
    return affine(a, s, T(0));
}

template <typename T>
Tensor<T> affine(const Tensor<T>& a, T s, T b) {
    require_defined("affine", a);
    auto out = make_result<T>("affine", a.rows(), a.cols(), {&a});
    auto o = out.data();
    auto x = a.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = s * x[i] + b;
    if (out.requires_grad()) {
        out.node()->backward = [s](Node<T>& self) {
            if (T* g = pgrad(self, 0)) K<T>().axpy(self.grad.size(), s, self.grad.data(), g);
        };
    }
    return finish(out);
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
    return leaky_relu(a, T(0));
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& a, T slope) {
    require_defined("leaky_relu", a);
    auto out = make_result<T>(slope == T(0) ? "relu" : "leaky_relu", a.rows(), a.cols(), {&a});
    auto o = out.data();
    auto x = a.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] > T(0) ? x[i] : slope * x[i];
    if (out.requires_grad()) {
        out.node()->backward = [slope](Node<T>& self) {
            T* g = pgrad(self, 0);
            if (!g) return;
            const T* x = pval(self, 0);
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                g[i] += self.grad[i] * (x[i] > T(0) ? T(1) : slope);
        };
    }
    return finish(out);
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
    require_defined("sigmoid", a);
    auto out = make_result<T>("sigmoid", a.rows(), a.cols(), {&a});
    auto o = out.data();
    auto x = a.data();
    for (std::size_t i = 0; i < o.size(); ++i) {
        // Split on sign so exp never overflows.
        if (x[i] >= T(0)) {
            o[i] = T(1) / (T(1) + std::exp(-x[i]));
        } else {
            const T e = std::exp(x[i]);
            o[i] = e / (T(1) + e);
        }
    }
    if (out.requires_grad()) {
        out.node()->backward = [](Node<T>& self) {
            T* g = pgrad(self, 0);
            if (!g) return;
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                const T y = self.value[i];
                g[i] += self.grad[i] * y * (T(1) - y);
            }
        };
    }
    return finish(out);
}

template <typename T>
Tensor<T> log(const Tensor<T>& a) {
    require_defined("log", a);
    auto out = make_result<T>("log", a.rows(), a.cols(), {&a});
    auto o = out.data();
    auto x = a.data();
    for (std::size_t i = 0; i < o.size(); ++i) {
        if (!(x[i] > T(0))) throw NumericError("log of non-positive value " + std::to_string(x[i]));
        o[i] = std::log(x[i]);
    }
    if (out.requires_grad()) {
        out.node()->backward = [](Node<T>& self) {
            T* g = pgrad(self, 0);
            if (!g) return;
            const T* x = pval(self, 0);
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] / x[i];
        };
    }
    return finish(out);
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& a, const Mask* allowed) {
    require_defined("softmax_rows", a);
    const std::size_t m = a.rows(), n = a.cols();
    if (allowed && allowed->size() != m * n)
        throw ShapeError("softmax_rows: mask has " + std::to_string(allowed->size()) + " entries for shape " +
                         a.shape_str());
    auto out = make_result<T>("softmax_rows", m, n, {&a});
    auto o = out.data();
    auto x = a.data();
    for (std::size_t i = 0; i < m; ++i) {
        T* row = o.data() + i * n;
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t k = i * n + j;
            row[j] = (allowed && !(*allowed)[k]) ? static_cast<T>(kMaskedLogit) : x[k];
            mx = std::max(mx, row[j]);
        }
        T total = 0;
        for (std::size_t j = 0; j < n; ++j) {
            row[j] = std::exp(row[j] - mx);
            total += row[j];
        }
        for (std::size_t j = 0; j < n; ++j) row[j] /= total;
    }
    if (out.requires_grad()) {
        out.node()->backward = [m, n](Node<T>& self) {
            T* g = pgrad(self, 0);
            if (!g) return;
            for (std::size_t i = 0; i < m; ++i) {
                const T* y = self.value.data() + i * n;
                const T* dy = self.grad.data() + i * n;
                const T s = K<T>().dot(n, y, dy);
                for (std::size_t j = 0; j < n; ++j) g[i * n + j] += y[j] * (dy[j] - s);
            }
        };
    }
    return finish(out);
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& a, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
    require_defined("layer_norm", a);
    const std::size_t m = a.rows(), n = a.cols();
    if (gamma.rows() != 1 || gamma.cols() != n) shape_fail("layer_norm", a, gamma);
    if (beta.rows() != 1 || beta.cols() != n) shape_fail("layer_norm", a, beta);
    auto out = make_result<T>("layer_norm", m, n, {&a, &gamma, &beta});
    // Normalized inputs and inverse std are kept for the backward pass.
    auto xhat = std::make_shared<std::vector<T>>(m * n);
    auto inv_std = std::make_shared<std::vector<T>>(m);
    auto x = a.data();
    auto gm = gamma.data();
    auto bt = beta.data();
    auto o = out.data();
    for (std::size_t i = 0; i < m; ++i) {
        const T* row = x.data() + i * n;
        T mean = 0;
        for (std::size_t j = 0; j < n; ++j) mean += row[j];
        mean /= static_cast<T>(n);
        T var = 0;
        for (std::size_t j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
        var /= static_cast<T>(n);
        const T is = T(1) / std::sqrt(var + eps);
        (*inv_std)[i] = is;
        for (std::size_t j = 0; j < n; ++j) {
            const T h = (row[j] - mean) * is;
            (*xhat)[i * n + j] = h;
            o[i * n + j] = h * gm[j] + bt[j];
        }
    }
    if (out.requires_grad()) {
        out.node()->backward = [m, n, xhat, inv_std](Node<T>& self) {
            const T* dy = self.grad.data();
            const T* gm = pval(self, 1);
            if (T* ga = pgrad(self, 0)) {
                std::vector<T> dh(n);
                for (std::size_t i = 0; i < m; ++i) {
                    T mean_dh = 0, mean_dh_h = 0;
                    for (std::size_t j = 0; j < n; ++j) {
                        dh[j] = dy[i * n + j] * gm[j];
                        mean_dh += dh[j];
                        mean_dh_h += dh[j] * (*xhat)[i * n + j];
                    }
                    mean_dh /= static_cast<T>(n);
                    mean_dh_h /= static_cast<T>(n);
                    for (std::size_t j = 0; j < n; ++j)
                        ga[i * n + j] += (*inv_std)[i] * (dh[j] - mean_dh - (*xhat)[i * n + j] * mean_dh_h);
                }
            }
            if (T* gg = pgrad(self, 1))
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) gg[j] += dy[i * n + j] * (*xhat)[i * n + j];
            if (T* gb = pgrad(self, 2))
                for (std::size_t i = 0; i < m; ++i) K<T>().add_inplace(n, dy + i * n, gb);
        };
    }
    return finish(out);
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& a, const std::vector<std::size_t>& idx) {
    require_defined("gather_rows", a);
    const std::size_t n = a.cols();
    for (std::size_t r : idx)
        if (r >= a.rows())
            throw ShapeError("gather_rows: row " + std::to_string(r) + " out of range for " + a.shape_str());
    auto out = make_result<T>("gather_rows", idx.size(), n, {&a});
    auto o = out.data();
    auto x = a.data();
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::copy_n(x.data() + idx[i] * n, n, o.data() + i * n);
    if (out.requires_grad()) {
        out.node()->backward = [idx, n](Node<T>& self) {
            T* g = pgrad(self, 0);
            if (!g) return;
            for (std::size_t i = 0; i < idx.size(); ++i)
                K<T>().add_inplace(n, self.grad.data() + i * n, g + idx[i] * n);
        };
    }
    return finish(out);
}

template <typename T>
Tensor<T> embedding(const Tensor<T>& table, const std::vector<std::size_t>& ids) {
    return gather_rows(table, ids);
}

template <typename T>
Tensor<T> scatter_add_rows(const Tensor<T>& a, const std::vector<std::size_t>& idx, std::size_t out_rows) {
    require_defined("scatter_add_rows", a);
    if (idx.size() != a.rows())
        throw ShapeError("scatter_add_rows: " + std::to_string(idx.size()) + " targets for " + a.shape_str());
    const std::size_t n = a.cols();
    for (std::size_t r : idx)
        if (r >= out_rows)
            throw ShapeError("scatter_add_rows: target row " + std::to_string(r) + " >= " + std::to_string(out_rows));
    auto out = make_result<T>("scatter_add_rows", out_rows, n, {&a});
    auto o = out.data();
    auto x = a.data();
    for (std::size_t i = 0; i < idx.size(); ++i) K<T>().add_inplace(n, x.data() + i * n, o.data() + idx[i] * n);
    if (out.requires_grad()) {
        out.node()->backward = [idx, n](Node<T>& self) {
            T* g = pgrad(self, 0);
            if (!g) return;
            for (std::size_t i = 0; i < idx.size(); ++i)
                K<T>().add_inplace(n, self.grad.data() + idx[i] * n, g + i * n);
        };
    }
    return finish(out);
}

template <typename T>
Tensor<T> segment_softmax(const Tensor<T>& scores, const std::vector<std::size_t>& segment, std::size_t n) {
    require_defined("segment_softmax", scores);
    if (scores.cols() != 1 || segment.size() != scores.rows())
        throw ShapeError("segment_softmax: expects E x 1 scores with E segment ids, got " + scores.shape_str());
    for (std::size_t s : segment)
        if (s >= n) throw ShapeError("segment_softmax: segment id " + std::to_string(s) + " >= " + std::to_string(n));
    const std::size_t e = segment.size();
    auto out = make_result<T>("segment_softmax", e, 1, {&scores});
    auto o = out.data();
    auto x = scores.data();
    std::vector<T> mx(n, -std::numeric_limits<T>::infinity());
    std::vector<T> total(n, T(0));
    for (std::size_t i = 0; i < e; ++i) mx[segment[i]] = std::max(mx[segment[i]], x[i]);
    for (std::size_t i = 0; i < e; ++i) {
        o[i] = std::exp(x[i] - mx[segment[i]]);
        total[segment[i]] += o[i];
    }
    for (std::size_t i = 0; i < e; ++i) o[i] /= total[segment[i]];
    if (out.requires_grad()) {
        out.node()->backward = [segment, n](Node<T>& self) {
            T* g = pgrad(self, 0);
            if (!g) return;
            std::vector<T> s(n, T(0));
            for (std::size_t i = 0; i < segment.size(); ++i) s[segment[i]] += self.value[i] * self.grad[i];
            for (std::size_t i = 0; i < segment.size(); ++i)
                g[i] += self.value[i] * (self.grad[i] - s[segment[i]]);
        };
    }
    return finish(out);
}

template <typename T>
Tensor<T> gather_blocks(const Tensor<T>& a, const std::vector<std::size_t>& idx,
                        const std::vector<std::size_t>& block, std::size_t width) {
    require_defined("gather_blocks", a);
    if (idx.size() != block.size()) throw ShapeError("gather_blocks: index and block lists differ in length");
    const std::size_t n = a.cols();
    for (std::size_t i = 0; i < idx.size(); ++i)
        if (idx[i] >= a.rows() || (block[i] + 1) * width > n)
            throw ShapeError("gather_blocks: entry " + std::to_string(i) + " out of range for " + a.shape_str());
    auto out = make_result<T>("gather_blocks", idx.size(), width, {&a});
    auto o = out.data();
    auto x = a.data();
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::copy_n(x.data() + idx[i] * n + block[i] * width, width, o.data() + i * width);
    if (out.requires_grad()) {
        out.node()->backward = [idx, block, width, n](Node<T>& self) {
            T* g = pgrad(self, 0);
            if (!g) return;
            for (std::size_t i = 0; i < idx.size(); ++i)
                K<T>().add_inplace(width, self.grad.data() + i * width, g + idx[i] * n + block[i] * width);
        };
    }
    return finish(out);
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no operands");
    const std::size_t m = parts[0].rows();
    std::vector<std::size_t> offsets;
    std::size_t total = 0;
    for (const auto& p : parts) {
        require_defined("concat_cols", p);
        if (p.rows() != m) shape_fail("concat_cols", parts[0], p);
        offsets.push_back(total);
        total += p.cols();
    }
    auto out = make_result_vec<T>("concat_cols", m, total, parts);
    auto o = out.data();
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const std::size_t w = parts[k].cols();
        auto x = parts[k].data();
        for (std::size_t i = 0; i < m; ++i) std::copy_n(x.data() + i * w, w, o.data() + i * total + offsets[k]);
    }
    if (out.requires_grad()) {
        out.node()->backward = [m, total, offsets](Node<T>& self) {
            for (std::size_t k = 0; k < self.parents.size(); ++k) {
                T* g = pgrad(self, k);
                if (!g) continue;
                const std::size_t w = self.parents[k]->cols;
                for (std::size_t i = 0; i < m; ++i)
                    K<T>().add_inplace(w, self.grad.data() + i * total + offsets[k], g + i * w);
            }
        };
    }
    return finish(out);
}

template <typename T>
Tensor<T> slice(const Tensor<T>& a, std::size_t r0, std::size_t nr, std::size_t c0, std::size_t nc) {
    require_defined("slice", a);
    if (r0 + nr > a.rows() || c0 + nc > a.cols())
        throw ShapeError("slice [" + std::to_string(r0) + "+" + std::to_string(nr) + ", " + std::to_string(c0) +
                         "+" + std::to_string(nc) + "] out of range for " + a.shape_str());
    const std::size_t n = a.cols();
    auto out = make_result<T>("slice", nr, nc, {&a});
    auto o = out.data();
    auto x = a.data();
    for (std::size_t i = 0; i < nr; ++i) std::copy_n(x.data() + (r0 + i) * n + c0, nc, o.data() + i * nc);
    if (out.requires_grad()) {
        out.node()->backward = [r0, nr, c0, nc, n](Node<T>& self) {
            T* g = pgrad(self, 0);
            if (!g) return;
            for (std::size_t i = 0; i < nr; ++i)
                K<T>().add_inplace(nc, self.grad.data() + i * nc, g + (r0 + i) * n + c0);
        };
    }
    return finish(out);
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& a, double p, std::uint64_t seed, bool training) {
    require_defined("dropout", a);
    if (p < 0.0 || p >= 1.0) throw ConfigError("dropout probability must be in [0, 1), got " + std::to_string(p));
    if (!training || p == 0.0) return a;
    const std::size_t n = a.size();
    auto keep = std::make_shared<std::vector<T>>(n);
    const T kept = static_cast<T>(1.0 / (1.0 - p));
    for (std::size_t i = 0; i < n; ++i) (*keep)[i] = unit_double(counter_hash(seed, i)) >= p ? kept : T(0);
    auto out = make_result<T>("dropout", a.rows(), a.cols(), {&a});
    auto o = out.data();
    auto x = a.data();
    for (std::size_t i = 0; i < n; ++i) o[i] = x[i] * (*keep)[i];
    if (out.requires_grad()) {
        out.node()->backward = [keep](Node<T>& self) {
            T* g = pgrad(self, 0);
            if (!g) return;
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * (*keep)[i];
        };
    }
    return finish(out);
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& a) {
    require_defined("sum_all", a);
    auto out = make_result<T>("sum_all", 1, 1, {&a});
    T total = 0;
    for (T v : a.data()) total += v;
    out.data()[0] = total;
    if (out.requires_grad()) {
        out.node()->backward = [](Node<T>& self) {
            T* g = pgrad(self, 0);
            if (!g) return;
            const T d = self.grad[0];
            const std::size_t n = self.parents[0]->value.size();
            for (std::size_t i = 0; i < n; ++i) g[i] += d;
        };
    }
    return finish(out);
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& a) {
    require_defined("mean_all", a);
    if (a.size() == 0) throw ShapeError("mean_all of empty tensor");
    return scale(sum_all(a), T(1) / static_cast<T>(a.size()));
}

template <typename T>
Tensor<T> pick(const Tensor<T>& a, const std::vector<std::size_t>& col_per_row) {
    require_defined("pick", a);
    if (col_per_row.size() != a.rows())
        throw ShapeError("pick: " + std::to_string(col_per_row.size()) + " indices for " + a.shape_str());
    const std::size_t n = a.cols();
    for (std::size_t c : col_per_row)
        if (c >= n) throw ShapeError("pick: column " + std::to_string(c) + " out of range for " + a.shape_str());
    auto out = make_result<T>("pick", a.rows(), 1, {&a});
    auto o = out.data();
    auto x = a.data();
    for (std::size_t i = 0; i < a.rows(); ++i) o[i] = x[i * n + col_per_row[i]];
    if (out.requires_grad()) {
        out.node()->backward = [col_per_row, n](Node<T>& self) {
            T* g = pgrad(self, 0);
            if (!g) return;
            for (std::size_t i = 0; i < col_per_row.size(); ++i) g[i * n + col_per_row[i]] += self.grad[i];
        };
    }
    return finish(out);
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const Tensor<T>& target) {
    require_defined("cross_entropy", logits);
    require_defined("cross_entropy", target);
    if (logits.rows() != target.rows() || logits.cols() != target.cols()) shape_fail("cross_entropy", logits, target);
    const std::size_t m = logits.rows(), n = logits.cols();
    if (m == 0) throw ShapeError("cross_entropy over zero rows");
    auto out = make_result<T>("cross_entropy", 1, 1, {&logits, &target});
    auto probs = std::make_shared<std::vector<T>>(m * n);
    auto x = logits.data();
    auto t = target.data();
    T loss = 0;
    for (std::size_t i = 0; i < m; ++i) {
        const T* row = x.data() + i * n;
        T mx = *std::max_element(row, row + n);
        T total = 0;
        for (std::size_t j = 0; j < n; ++j) total += std::exp(row[j] - mx);
        const T lse = mx + std::log(total);
        for (std::size_t j = 0; j < n; ++j) {
            (*probs)[i * n + j] = std::exp(row[j] - lse);
            if (t[i * n + j] != T(0)) loss -= t[i * n + j] * (row[j] - lse);
        }
    }
    out.data()[0] = loss / static_cast<T>(m);
    if (out.requires_grad()) {
        out.node()->backward = [m, n, probs](Node<T>& self) {
            const T d = self.grad[0] / static_cast<T>(m);
            const T* t = pval(self, 1);
            if (T* g = pgrad(self, 0)) {
                for (std::size_t i = 0; i < m; ++i) {
                    T mass = 0;
                    for (std::size_t j = 0; j < n; ++j) mass += t[i * n + j];
                    for (std::size_t j = 0; j < n; ++j)
                        g[i * n + j] += d * ((*probs)[i * n + j] * mass - t[i * n + j]);
                }
            }
            if (T* gt = pgrad(self, 1))
                for (std::size_t k = 0; k < m * n; ++k) gt[k] -= d * std::log((*probs)[k]);
        };
    }
    return finish(out);
}

template <typename T>
void backward(Tensor<T>& loss) {
    if (!loss.defined()) throw ShapeError("backward on undefined tensor");
    if (loss.size() != 1) throw ShapeError("backward needs a 1x1 loss, got " + loss.shape_str());
    Node<T>* root = loss.node();
    if (root->consumed) throw Error("graph_consumed", "backward already ran through this loss");
    if (!root->requires_grad) throw Error("no_grad", "loss does not depend on any parameter");

    // Iterative post-order DFS; children visited in parent-list order so the
    // schedule is identical from run to run.
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    std::vector<std::pair<Node<T>*, std::size_t>> stack{{root, 0}};
    seen.insert(root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node<T>* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->ensure_grad()[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* node = *it;
        if (node->backward && !node->grad.empty()) {
            node->backward(*node);
            if (g_finite_checks)
                for (auto& p : node->parents)
                    for (T v : p->grad)
                        if (!std::isfinite(v))
                            throw NumericError(std::string("non-finite gradient flowing out of ") + node->op);
        }
    }
    // Interior nodes release their closures and buffers; leaves keep grads.
    for (Node<T>* node : order) {
        if (!node->backward) continue;
        node->backward = nullptr;
        node->parents.clear();
        node->grad.clear();
        node->grad.shrink_to_fit();
        node->consumed = true;
    }
    root->consumed = true;
}

#define MAP2SEQ_INSTANTIATE_TENSOR(T)                                                                     \
    template class Tensor<T>;                                                                             \
    template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                        \
    template Tensor<T> matmul_nt(const Tensor<T>&, const Tensor<T>&);                                     \
    template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                           \
    template Tensor<T> add_row(const Tensor<T>&, const Tensor<T>&);                                       \
    template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                           \
    template Tensor<T> mul_col(const Tensor<T>&, const Tensor<T>&);                                       \
    template Tensor<T> scale(const Tensor<T>&, T);                                                        \
    template Tensor<T> affine(const Tensor<T>&, T, T);                                                    \
    template Tensor<T> relu(const Tensor<T>&);                                                            \
    template Tensor<T> leaky_relu(const Tensor<T>&, T);                                                   \
    template Tensor<T> sigmoid(const Tensor<T>&);                                                         \
    template Tensor<T> log(const Tensor<T>&);                                                             \
    template Tensor<T> softmax_rows(const Tensor<T>&, const Mask*);                                       \
    template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);               \
    template Tensor<T> gather_rows(const Tensor<T>&, const std::vector<std::size_t>&);                    \
    template Tensor<T> embedding(const Tensor<T>&, const std::vector<std::size_t>&);                      \
    template Tensor<T> scatter_add_rows(const Tensor<T>&, const std::vector<std::size_t>&, std::size_t);  \
    template Tensor<T> segment_softmax(const Tensor<T>&, const std::vector<std::size_t>&, std::size_t);   \
    template Tensor<T> gather_blocks(const Tensor<T>&, const std::vector<std::size_t>&,                   \
                                     const std::vector<std::size_t>&, std::size_t);                       \
    template Tensor<T> concat_cols(const std::vector<Tensor<T>>&);                                        \
    template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t, std::size_t, std::size_t);       \
    template Tensor<T> dropout(const Tensor<T>&, double, std::uint64_t, bool);                            \
    template Tensor<T> sum_all(const Tensor<T>&);                                                         \
    template Tensor<T> mean_all(const Tensor<T>&);                                                        \
    template Tensor<T> pick(const Tensor<T>&, const std::vector<std::size_t>&);                           \
    template Tensor<T> cross_entropy(const Tensor<T>&, const Tensor<T>&);                                 \
    template void backward(Tensor<T>&);

MAP2SEQ_INSTANTIATE_TENSOR(float)
MAP2SEQ_INSTANTIATE_TENSOR(double)

}  // namespace map2seq::tensor
