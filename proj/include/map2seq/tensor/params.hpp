#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "map2seq/tensor/tensor.hpp"

namespace map2seq::tensor {

enum class Init {
    kFanIn,      // uniform(-1/sqrt(rows), 1/sqrt(rows)); weights are used as x * W
    kEmbedding,  // uniform(-1/sqrt(cols), 1/sqrt(cols))
    kZeros,
    kOnes,
};

// FNV-1a over the name; mixes the parameter identity into its init stream.
std::uint64_t name_hash(const std::string& name);

// Named parameters in registration order. Initial values depend only on the
// store seed and each parameter's name, so adding a parameter never shifts
// the values of the others.
template <typename T>
class ParameterStore {
public:
    explicit ParameterStore(std::uint64_t seed = 0) : seed_(seed) {}

    Tensor<T> add(const std::string& name, std::size_t rows, std::size_t cols, Init init, bool trainable = true);
    Tensor<T> get(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    const std::vector<std::string>& names() const { return names_; }
    const std::vector<Tensor<T>>& tensors() const { return tensors_; }
    bool trainable(std::size_t i) const { return trainable_[i]; }
    std::size_t size() const { return tensors_.size(); }
    std::size_t scalar_count() const;
    std::uint64_t seed() const { return seed_; }

    void zero_grad();
    void scale_grad(T factor);

private:
    std::uint64_t seed_;
    std::vector<std::string> names_;
    std::vector<Tensor<T>> tensors_;
    std::vector<bool> trainable_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace map2seq::tensor
