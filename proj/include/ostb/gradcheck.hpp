#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "ostb/rng.hpp"
#include "ostb/tensor.hpp"

namespace ostb {

// Compares reverse-mode gradients against central finite differences
// (f(x+eps) - f(x-eps)) / (2 eps) in double precision and returns the worst
// relative error. `build` must rebuild the whole graph from the current
// input values (and be deterministic across rebuilds). When
// max_coords_per_tensor > 0, a random subset of coordinates is probed.
inline double grad_check(const std::function<TensorPtr<double>(Tape<double>&)>& build,
                         const std::vector<TensorPtr<double>>& inputs, double eps,
                         int max_coords_per_tensor = 0, Rng* rng = nullptr) {
    if (eps <= 0.0) throw DataError("grad_check: eps must be positive");
    for (const auto& in : inputs)
        if (!in->requires_grad) throw DataError("grad_check: all inputs must require gradients");

    for (const auto& in : inputs) in->zero_grad();
    Tape<double> tape;
    auto out = build(tape);
    if (out->size() != 1) throw DataError("grad_check: output must be scalar");
    tape.backward(*out);

    std::vector<std::vector<double>> analytic;
    analytic.reserve(inputs.size());
    for (const auto& in : inputs) {
        in->ensure_grad();
        analytic.push_back(in->grad);
    }

    const auto eval = [&]() {
        Tape<double> t;
        auto o = build(t);
        return o->data[0];
    };

    double worst = 0.0;
    for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
        Tensor<double>& in = *inputs[ti];
        std::vector<std::size_t> coords;
        if (max_coords_per_tensor > 0 && static_cast<std::size_t>(max_coords_per_tensor) < in.data.size()) {
            if (!rng) throw DataError("grad_check: sampling requested without an rng");
            for (int k = 0; k < max_coords_per_tensor; ++k)
                coords.push_back(static_cast<std::size_t>(rng->below(in.data.size())));
        } else {
            coords.resize(in.data.size());
            for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
        }

        for (std::size_t idx : coords) {
            const double saved = in.data[idx];
            in.data[idx] = saved + eps;
            const double fp = eval();
            in.data[idx] = saved - eps;
            const double fm = eval();
            in.data[idx] = saved;

            const double fd = (fp - fm) / (2.0 * eps);
            const double ad = analytic[ti][idx];
            const double mag = std::max(std::abs(fd), std::abs(ad));
            if (mag < 1e-8) continue;  // both effectively zero
            worst = std::max(worst, std::abs(fd - ad) / std::max(mag, 1e-6));
        }
    }
    return worst;
}

}  // namespace ostb
