#pragma once

// Central finite-difference oracle for the autodiff engine. Runs in double.

#include <cmath>
#include <functional>
#include <vector>

#include "map2seq/rng.hpp"
#include "map2seq/tensor/tensor.hpp"

namespace testutil {

using map2seq::tensor::Tensor;
using TD = Tensor<double>;

inline TD random_tensor(map2seq::CounterRng& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0,
                        bool grad = true) {
    std::vector<double> v(r * c);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return TD::from(r, c, std::move(v), grad);
}

// Values bounded away from zero, for ops with a kink there.
inline TD random_away_from_zero(map2seq::CounterRng& rng, std::size_t r, std::size_t c) {
    std::vector<double> v(r * c);
    for (auto& x : v) {
        const double m = rng.uniform(0.05, 1.0);
        x = rng.uniform() < 0.5 ? -m : m;
    }
    return TD::from(r, c, std::move(v), true);
}

struct GradReport {
    double worst_relative = 0.0;  // max over inputs of |a - n| / max(|a|, |n|), vector norms
};

// Reduces f's output to a scalar with fixed random weights, then compares
// the analytic gradient of every input to central differences.
inline GradReport gradcheck(const std::function<TD(const std::vector<TD>&)>& f, std::vector<TD> inputs,
                            std::uint64_t seed, double eps = 1e-3) {
    map2seq::CounterRng rng(seed);
    TD probe = f(inputs);
    TD weights = random_tensor(rng, probe.rows(), probe.cols(), -1.0, 1.0, false);

    auto scalar_loss = [&](const std::vector<TD>& xs) {
        TD out = f(xs);
        return map2seq::tensor::sum_all(map2seq::tensor::mul(out, weights));
    };

    for (auto& x : inputs) x.zero_grad();
    TD loss = scalar_loss(inputs);
    map2seq::tensor::backward(loss);

    GradReport report;
    for (auto& x : inputs) {
        if (!x.requires_grad()) continue;
        std::vector<double> analytic(x.grad().begin(), x.grad().end());
        std::vector<double> numeric(x.size());
        for (std::size_t k = 0; k < x.size(); ++k) {
            const double saved = x.data()[k];
            double plus, minus;
            {
                map2seq::tensor::NoGradGuard ng;
                x.data()[k] = saved + eps;
                plus = scalar_loss(inputs).item();
                x.data()[k] = saved - eps;
                minus = scalar_loss(inputs).item();
            }
            x.data()[k] = saved;
            numeric[k] = (plus - minus) / (2 * eps);
        }
        double diff = 0, na = 0, nn = 0;
        for (std::size_t k = 0; k < x.size(); ++k) {
            diff += (analytic[k] - numeric[k]) * (analytic[k] - numeric[k]);
            na += analytic[k] * analytic[k];
            nn += numeric[k] * numeric[k];
        }
        const double denom = std::max(std::sqrt(std::max(na, nn)), 1e-12);
        report.worst_relative = std::max(report.worst_relative, std::sqrt(diff) / denom);
    }
    return report;
}

}  // namespace testutil
