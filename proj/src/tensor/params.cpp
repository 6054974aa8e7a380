#include "map2seq/tensor/params.hpp"

#include <cmath>

#include "map2seq/errors.hpp"
#include "map2seq/rng.hpp"

namespace map2seq::tensor {

std::uint64_t name_hash(const std::string& name) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : name) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

template <typename T>
Tensor<T> ParameterStore<T>::add(const std::string& name, std::size_t rows, std::size_t cols, Init init,
                                 bool trainable) {
    if (name.empty()) throw ConfigError("parameter name must be non-empty");
    if (contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
    if (rows == 0 || cols == 0) throw ShapeError("parameter '" + name + "' has an empty shape");

    std::vector<T> data(rows * cols);
    switch (init) {
        case Init::kZeros:
            break;
        case Init::kOnes:
            std::fill(data.begin(), data.end(), T(1));
            break;
        case Init::kFanIn:
        case Init::kEmbedding: {
            const double fan = init == Init::kFanIn ? static_cast<double>(rows) : static_cast<double>(cols);
            const double bound = 1.0 / std::sqrt(fan);
            CounterRng rng(mix64(seed_ ^ name_hash(name)));
            for (auto& v : data) v = static_cast<T>(rng.uniform(-bound, bound));
            break;
        }
    }
    auto t = Tensor<T>::from(rows, cols, std::move(data), trainable);
    index_.emplace(name, tensors_.size());
    names_.push_back(name);
    tensors_.push_back(t);
    trainable_.push_back(trainable);
    return t;
}

template <typename T>
Tensor<T> ParameterStore<T>::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
    return tensors_[it->second];
}

template <typename T>
std::size_t ParameterStore<T>::scalar_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
}

template <typename T>
void ParameterStore<T>::zero_grad() {
    for (auto& t : tensors_) {
        Tensor<T> h = t;
        h.zero_grad();
    }
}

template <typename T>
void ParameterStore<T>::scale_grad(T factor) {
    for (const auto& t : tensors_)
        for (T& g : t.node()->grad) g *= factor;
}

template class ParameterStore<float>;
template class ParameterStore<double>;

}  // namespace map2seq::tensor
