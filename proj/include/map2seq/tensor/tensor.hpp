#pragma once

// Two-dimensional tensors with tape-free reverse-mode differentiation.
//
// A Tensor is a shared handle to a node holding the value, the optional
// gradient buffer and, for op results, the parents plus a closure that
// pushes the node's gradient into them. backward() orders the reachable
// nodes topologically and runs the closures once; the graph is consumed.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace map2seq::tensor {

template <typename T>
struct Node {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> value;
    std::vector<T> grad;  // empty until first touched
    bool requires_grad = false;
    bool consumed = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    std::vector<T>& ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), T(0));
        return grad;
    }
};

template <typename T>
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

    static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
    static Tensor full(std::size_t rows, std::size_t cols, T value, bool requires_grad = false);
    static Tensor from(std::size_t rows, std::size_t cols, std::vector<T> data, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(node_); }
    std::size_t rows() const { return node_->rows; }
    std::size_t cols() const { return node_->cols; }
    std::size_t size() const { return node_->value.size(); }
    std::string shape_str() const;

    std::span<T> data() { return node_->value; }
    std::span<const T> data() const { return node_->value; }
    T at(std::size_t r, std::size_t c) const { return node_->value[r * node_->cols + c]; }
    T item() const;

    bool requires_grad() const { return node_->requires_grad; }
    bool has_grad() const { return !node_->grad.empty(); }
    // Zero-filled view when no gradient has been accumulated yet.
    std::span<T> grad() { return node_->ensure_grad(); }
    void zero_grad();

    Node<T>* node() const { return node_.get(); }
    const std::shared_ptr<Node<T>>& shared() const { return node_; }

private:
    std::shared_ptr<Node<T>> node_;
};

// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

// When on, every op result is checked for NaN/Inf and a NumericError names
// the op. Defaults to on in debug builds.
void set_finite_checks(bool enabled);
bool finite_checks();

// Allowed-entry mask for softmax_rows, row-major, 1 = keep.
using Mask = std::vector<std::uint8_t>;
inline constexpr double kMaskedLogit = -1e9;

template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b);  // a * b^T
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> add_row(const Tensor<T>& a, const Tensor<T>& row);   // broadcast 1 x n
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul_col(const Tensor<T>& a, const Tensor<T>& col);   // row i scaled by col[i]
template <typename T> Tensor<T> scale(const Tensor<T>& a, T s);
template <typename T> Tensor<T> affine(const Tensor<T>& a, T s, T b);                // s * a + b
template <typename T> Tensor<T> relu(const Tensor<T>& a);
template <typename T> Tensor<T> leaky_relu(const Tensor<T>& a, T slope);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& a);
template <typename T> Tensor<T> log(const Tensor<T>& a);
template <typename T> Tensor<T> softmax_rows(const Tensor<T>& a, const Mask* allowed = nullptr);
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& a, const Tensor<T>& gamma, const Tensor<T>& beta, T eps = T(1e-5));
template <typename T> Tensor<T> gather_rows(const Tensor<T>& a, const std::vector<std::size_t>& idx);
template <typename T> Tensor<T> embedding(const Tensor<T>& table, const std::vector<std::size_t>& ids);
template <typename T>
Tensor<T> scatter_add_rows(const Tensor<T>& a, const std::vector<std::size_t>& idx, std::size_t out_rows);
// Softmax of an E x 1 column within groups given by `segment` (values < n).
template <typename T>
Tensor<T> segment_softmax(const Tensor<T>& scores, const std::vector<std::size_t>& segment, std::size_t n);
// Row e of the result is columns [block[e]*width, +width) of row idx[e].
template <typename T>
Tensor<T> gather_blocks(const Tensor<T>& a, const std::vector<std::size_t>& idx,
                        const std::vector<std::size_t>& block, std::size_t width);
template <typename T> Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts);
template <typename T>
Tensor<T> slice(const Tensor<T>& a, std::size_t r0, std::size_t nr, std::size_t c0, std::size_t nc);
template <typename T> Tensor<T> dropout(const Tensor<T>& a, double p, std::uint64_t seed, bool training);
template <typename T> Tensor<T> sum_all(const Tensor<T>& a);
template <typename T> Tensor<T> mean_all(const Tensor<T>& a);
template <typename T> Tensor<T> pick(const Tensor<T>& a, const std::vector<std::size_t>& col_per_row);
// Mean over rows of -sum_j target[i,j] * log_softmax(logits)[i,j].
template <typename T> Tensor<T> cross_entropy(const Tensor<T>& logits, const Tensor<T>& target);

// Runs reverse accumulation from a 1 x 1 loss. Leaf gradients accumulate
// across calls; a loss node can be differentiated only once.
template <typename T> void backward(Tensor<T>& loss);

}  // namespace map2seq::tensor
