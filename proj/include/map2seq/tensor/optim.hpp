#pragma once

#include <cstddef>
#include <vector>

#include "map2seq/tensor/params.hpp"

namespace map2seq::tensor {

// Inverse-square-root warmup schedule. With `constant` set the factor is
// just `scale`.
struct NoamSchedule {
    double scale = 0.5;
    std::size_t d_model = 256;
    std::size_t warmup = 4000;
    bool constant = false;

    double rate(std::size_t step) const;
};

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-9;
};

template <typename T>
class Adam {
public:
    Adam(ParameterStore<T>& params, AdamConfig config = {});

    // One update with learning rate `lr` using the gradients currently held
    // by the trainable parameters. Throws NumericError naming the first
    // parameter with a non-finite gradient; nothing is modified in that case.
    void step(double lr);

    std::size_t steps() const { return step_; }
    void reset();

private:
    ParameterStore<T>* params_;
    AdamConfig config_;
    std::size_t step_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

}  // namespace map2seq::tensor
