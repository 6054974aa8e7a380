#include "map2seq/tensor/optim.hpp"

#include <algorithm>
#include <cmath>

#include "map2seq/errors.hpp"

namespace map2seq::tensor {

double NoamSchedule::rate(std::size_t step) const {
    if (step == 0) throw ConfigError("schedule step counts from 1");
    if (constant) return scale;
    const double s = static_cast<double>(step);
    const double w = static_cast<double>(std::max<std::size_t>(warmup, 1));
    return scale * std::pow(static_cast<double>(d_model), -0.5) * std::min(std::pow(s, -0.5), s * std::pow(w, -1.5));
}

template <typename T>
Adam<T>::Adam(ParameterStore<T>& params, AdamConfig config) : params_(&params), config_(config) {
    reset();
}

template <typename T>
void Adam<T>::reset() {
    step_ = 0;
    m_.assign(params_->size(), {});
    v_.assign(params_->size(), {});
    for (std::size_t i = 0; i < params_->size(); ++i) {
        m_[i].assign(params_->tensors()[i].size(), 0.0);
        v_[i].assign(params_->tensors()[i].size(), 0.0);
    }
}

template <typename T>
void Adam<T>::step(double lr) {
    if (m_.size() != params_->size()) throw ConfigError("parameters were registered after the optimizer was built");
    for (std::size_t i = 0; i < params_->size(); ++i) {
        if (!params_->trainable(i)) continue;
        for (T g : params_->tensors()[i].node()->grad)
            if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter '" + params_->names()[i] + "'");
    }
    ++step_;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    for (std::size_t i = 0; i < params_->size(); ++i) {
        if (!params_->trainable(i)) continue;
        Node<T>* node = params_->tensors()[i].node();
        if (node->grad.empty()) continue;
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t k = 0; k < node->value.size(); ++k) {
            const double g = node->grad[k];
            m[k] = b1 * m[k] + (1.0 - b1) * g;
            v[k] = b2 * v[k] + (1.0 - b2) * g * g;
            const double mh = m[k] / c1;
            const double vh = v[k] / c2;
            node->value[k] -= static_cast<T>(lr * mh / (std::sqrt(vh) + config_.eps));
        }
    }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace map2seq::tensor
