#pragma once

#include <cmath>
#include <vector>

#include "ostb/tensor.hpp"

namespace ostb {

// Bias-corrected Adam over a fixed parameter list. Moments are kept in the
// storage precision; the per-element update is computed in double.
template <typename T>
class AdamState {
public:
    double lr = 6e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    explicit AdamState(double learning_rate = 6e-4) : lr(learning_rate) {}

    void attach(const std::vector<TensorPtr<T>>& params) {
        m_.clear();
        v_.clear();
        for (const auto& p : params) {
            m_.emplace_back(p->data.size(), T(0));
            v_.emplace_back(p->data.size(), T(0));
        }
        t_ = 0;
    }

    int64_t step_count() const { return t_; }

    // Applies one update from the gradients currently stored on the
    // parameters. grad_scale folds in a 1/batch factor for mean gradients.
    void step(const std::vector<TensorPtr<T>>& params, double grad_scale = 1.0) {
        if (m_.size() != params.size()) throw DataError("adam_step: state not attached to these parameters");
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
        for (std::size_t pi = 0; pi < params.size(); ++pi) {
            Tensor<T>& p = *params[pi];
            if (p.grad.size() != p.data.size())
                throw DataError("adam_step: parameter " + std::to_string(pi) + " has no gradient");
            std::vector<T>& m = m_[pi];
            std::vector<T>& v = v_[pi];
            for (std::size_t i = 0; i < p.data.size(); ++i) {
                const double g = static_cast<double>(p.grad[i]) * grad_scale;
                const double mi = beta1 * static_cast<double>(m[i]) + (1.0 - beta1) * g;
                const double vi = beta2 * static_cast<double>(v[i]) + (1.0 - beta2) * g * g;
                m[i] = static_cast<T>(mi);
                v[i] = static_cast<T>(vi);
                const double mhat = mi / bc1;
                const double vhat = vi / bc2;
                p.data[i] = static_cast<T>(static_cast<double>(p.data[i]) - lr * mhat / (std::sqrt(vhat) + eps));
            }
        }
    }

private:
    std::vector<std::vector<T>> m_, v_;
    int64_t t_ = 0;
};

}  // namespace ostb
