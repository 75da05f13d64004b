#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "ostb/errors.hpp"
#include "ostb/rng.hpp"

namespace ostb {

// Reverse-mode tensor engine. Storage is the template scalar (float for
// training, double for gradient checks); inner products accumulate in
// double either way. All loops have a fixed order, so identical seeds and
// inputs give bit-identical values and gradients.

template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> data;
    std::vector<T> grad;  // sized lazily by ensure_grad()
    bool requires_grad = false;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, bool rg = false) : shape(std::move(s)), requires_grad(rg) {
        data.assign(count(shape), T(0));
    }

    static int64_t count(const std::vector<int>& s) {
        int64_t n = 1;
        for (int d : s) {
            if (d <= 0) throw DataError("Tensor: non-positive dimension");
            n *= d;
        }
        return n;
    }

    int64_t size() const { return static_cast<int64_t>(data.size()); }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    }

    void zero_grad() { grad.assign(data.size(), T(0)); }
};

template <typename T>
using TensorPtr = std::shared_ptr<Tensor<T>>;

template <typename T>
TensorPtr<T> make_tensor(std::vector<int> shape, bool requires_grad = false) {
    return std::make_shared<Tensor<T>>(std::move(shape), requires_grad);
}

// Records backward closures during the forward pass and replays them in
// reverse. One tape per graph; graphs over shared parameters must run
// sequentially (gradients accumulate into the tensors themselves).
template <typename T>
class Tape {
public:
    void record(std::function<void()> fn) { ops_.push_back(std::move(fn)); }

    void backward(Tensor<T>& output) {
        if (output.size() != 1) throw DataError("backward: output must be scalar");
        output.ensure_grad();
        output.grad[0] = T(1);
        for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
    }

    void clear() { ops_.clear(); }
    std::size_t size() const { return ops_.size(); }

private:
    std::vector<std::function<void()>> ops_;
};

namespace detail {
template <typename T>
bool any_grad(const std::initializer_list<TensorPtr<T>>& ts) {
    for (const auto& t : ts)
        if (t->requires_grad) return true;
    return false;
}
}  // namespace detail

// Valid (no padding) stride-1 cross-correlation.
// input [H,W,Cin], kernels [K,K,Cin,Cout], bias [Cout] -> [H-K+1, W-K+1, Cout].
template <typename T>
TensorPtr<T> conv2d(Tape<T>& tape, TensorPtr<T> input, TensorPtr<T> kernels, TensorPtr<T> bias) {
    if (input->shape.size() != 3 || kernels->shape.size() != 4 || bias->shape.size() != 1)
        throw DataError("conv2d: expected input[H,W,C], kernels[K,K,Cin,Cout], bias[Cout]");
    const int H = input->shape[0], W = input->shape[1], C = input->shape[2];
    const int K = kernels->shape[0], Cout = kernels->shape[3];
    if (kernels->shape[1] != K) throw DataError("conv2d: kernels must be square");
    if (kernels->shape[2] != C) throw DataError("conv2d: channel mismatch");
    if (bias->shape[0] != Cout) throw DataError("conv2d: bias size mismatch");
    if (K > H || K > W) throw DataError("conv2d: kernel larger than input");

    const int OH = H - K + 1, OW = W - K + 1;
    auto out = make_tensor<T>({OH, OW, Cout});
    out->requires_grad = detail::any_grad<T>({input, kernels, bias});

    const T* in = input->data.data();
    const T* kn = kernels->data.data();
    const T* bs = bias->data.data();
    T* o = out->data.data();

    std::vector<double> acc(Cout);
    for (int oy = 0; oy < OH; ++oy) {
        for (int ox = 0; ox < OW; ++ox) {
            for (int oc = 0; oc < Cout; ++oc) acc[oc] = static_cast<double>(bs[oc]);
            for (int ky = 0; ky < K; ++ky) {
                const T* inr = in + (static_cast<std::size_t>(oy + ky) * W + ox) * C;
                const T* knr = kn + static_cast<std::size_t>(ky) * K * C * Cout;
                for (int kx = 0; kx < K; ++kx) {
                    const T* inp = inr + static_cast<std::size_t>(kx) * C;
                    const T* knp = knr + static_cast<std::size_t>(kx) * C * Cout;
                    for (int ic = 0; ic < C; ++ic) {
                        const double v = static_cast<double>(inp[ic]);
                        const T* kr = knp + static_cast<std::size_t>(ic) * Cout;
                        for (int oc = 0; oc < Cout; ++oc) acc[oc] += v * static_cast<double>(kr[oc]);
                    }
                }
            }
            T* op = o + (static_cast<std::size_t>(oy) * OW + ox) * Cout;
            for (int oc = 0; oc < Cout; ++oc) op[oc] = static_cast<T>(acc[oc]);
        }
    }

    if (out->requires_grad) {
        tape.record([input, kernels, bias, out, H, W, C, K, Cout, OH, OW]() {
            const T* go = out->grad.data();
            const T* in = input->data.data();
            const T* kn = kernels->data.data();
            const bool gi = input->requires_grad;
            const bool gk = kernels->requires_grad;
            const bool gb = bias->requires_grad;
            if (gi) input->ensure_grad();
            if (gk) kernels->ensure_grad();
            if (gb) bias->ensure_grad();

            if (gb) {
                std::vector<double> bacc(Cout, 0.0);
                for (int oy = 0; oy < OH; ++oy)
                    for (int ox = 0; ox < OW; ++ox) {
                        const T* gp = go + (static_cast<std::size_t>(oy) * OW + ox) * Cout;
                        for (int oc = 0; oc < Cout; ++oc) bacc[oc] += static_cast<double>(gp[oc]);
                    }
                for (int oc = 0; oc < Cout; ++oc)
                    bias->grad[oc] = static_cast<T>(static_cast<double>(bias->grad[oc]) + bacc[oc]);
            }
            if (gk) {
                T* gkn = kernels->grad.data();
                for (int ky = 0; ky < K; ++ky)
                    for (int kx = 0; kx < K; ++kx)
                        for (int ic = 0; ic < C; ++ic) {
                            T* row = gkn + ((static_cast<std::size_t>(ky) * K + kx) * C + ic) * Cout;
                            std::vector<double> kacc(Cout, 0.0);
                            for (int oy = 0; oy < OH; ++oy) {
                                const T* inr = in + (static_cast<std::size_t>(oy + ky) * W + kx) * C + ic;
                                const T* gor = go + static_cast<std::size_t>(oy) * OW * Cout;
                                for (int ox = 0; ox < OW; ++ox) {
                                    const double v = static_cast<double>(inr[static_cast<std::size_t>(ox) * C]);
                                    const T* gp = gor + static_cast<std::size_t>(ox) * Cout;
                                    for (int oc = 0; oc < Cout; ++oc) kacc[oc] += v * static_cast<double>(gp[oc]);
                                }
                            }
                            for (int oc = 0; oc < Cout; ++oc)
                                row[oc] = static_cast<T>(static_cast<double>(row[oc]) + kacc[oc]);
                        }
            }
            if (gi) {
                T* gin = input->grad.data();
                for (int oy = 0; oy < OH; ++oy)
                    for (int ox = 0; ox < OW; ++ox) {
                        const T* gp = go + (static_cast<std::size_t>(oy) * OW + ox) * Cout;
                        for (int ky = 0; ky < K; ++ky)
                            for (int kx = 0; kx < K; ++kx) {
                                T* gr = gin + (static_cast<std::size_t>(oy + ky) * W + (ox + kx)) * C;
                                const T* kr = kn + (static_cast<std::size_t>(ky) * K + kx) * C * Cout;
                                for (int ic = 0; ic < C; ++ic) {
                                    double a = 0.0;
                                    const T* kcc = kr + static_cast<std::size_t>(ic) * Cout;
                                    for (int oc = 0; oc < Cout; ++oc)
                                        a += static_cast<double>(kcc[oc]) * static_cast<double>(gp[oc]);
                                    gr[ic] = static_cast<T>(static_cast<double>(gr[ic]) + a);
                                }
                            }
                    }
            }
        });
    }
    return out;
}

// Zero-pads the spatial dims; gradient is the center crop.
template <typename T>
TensorPtr<T> pad2d(Tape<T>& tape, TensorPtr<T> input, int pad) {
    if (input->shape.size() != 3) throw DataError("pad2d: expected [H,W,C]");
    if (pad < 0) throw DataError("pad2d: negative pad");
    const int H = input->shape[0], W = input->shape[1], C = input->shape[2];
    const int PH = H + 2 * pad, PW = W + 2 * pad;
    auto out = make_tensor<T>({PH, PW, C});
    out->requires_grad = input->requires_grad;

    for (int y = 0; y < H; ++y)
        std::copy_n(&input->data[static_cast<std::size_t>(y) * W * C], static_cast<std::size_t>(W) * C,
                    &out->data[(static_cast<std::size_t>(y + pad) * PW + pad) * C]);

    if (out->requires_grad) {
        tape.record([input, out, H, W, C, PW, pad]() {
            input->ensure_grad();
            for (int y = 0; y < H; ++y) {
                const T* g = &out->grad[(static_cast<std::size_t>(y + pad) * PW + pad) * C];
                T* gi = &input->grad[static_cast<std::size_t>(y) * W * C];
                for (int i = 0; i < W * C; ++i) gi[i] += g[i];
            }
        });
    }
    return out;
}

// Non-overlapping 2x2 max pooling; odd trailing row/column dropped. Backward
// routes the gradient to the argmax, first occurrence in row-major order.
template <typename T>
TensorPtr<T> maxpool2(Tape<T>& tape, TensorPtr<T> input) {
    if (input->shape.size() != 3) throw DataError("maxpool2: expected [H,W,C]");
    const int H = input->shape[0], W = input->shape[1], C = input->shape[2];
    if (H < 2 || W < 2) throw DataError("maxpool2: input smaller than 2x2");
    const int OH = H / 2, OW = W / 2;
    auto out = make_tensor<T>({OH, OW, C});
    out->requires_grad = input->requires_grad;

    auto argmax = std::make_shared<std::vector<int64_t>>(out->data.size());
    for (int oy = 0; oy < OH; ++oy)
        for (int ox = 0; ox < OW; ++ox)
            for (int c = 0; c < C; ++c) {
                T best{};
                int64_t best_idx = -1;
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        const int64_t idx = (static_cast<int64_t>(oy * 2 + dy) * W + (ox * 2 + dx)) * C + c;
                        const T v = input->data[idx];
                        if (best_idx < 0 || v > best) {
                            best = v;
                            best_idx = idx;
                        }
                    }
                const int64_t o = (static_cast<int64_t>(oy) * OW + ox) * C + c;
                out->data[o] = best;
                (*argmax)[o] = best_idx;
            }

    if (out->requires_grad) {
        tape.record([input, out, argmax]() {
            input->ensure_grad();
            for (std::size_t i = 0; i < out->grad.size(); ++i)
                input->grad[(*argmax)[i]] += out->grad[i];
        });
    }
    return out;
}

// Affine map: input [n], weights [n,m], bias [m] -> [m].
template <typename T>
TensorPtr<T> dense(Tape<T>& tape, TensorPtr<T> input, TensorPtr<T> weights, TensorPtr<T> bias) {
    if (input->shape.size() != 1 || weights->shape.size() != 2 || bias->shape.size() != 1)
        throw DataError("dense: expected input[n], weights[n,m], bias[m]");
    const int n = input->shape[0], m = weights->shape[1];
    if (weights->shape[0] != n || bias->shape[0] != m) throw DataError("dense: shape mismatch");

    auto out = make_tensor<T>({m});
    out->requires_grad = detail::any_grad<T>({input, weights, bias});

    std::vector<double> acc(m);
    for (int j = 0; j < m; ++j) acc[j] = static_cast<double>(bias->data[j]);
    for (int i = 0; i < n; ++i) {
        const double v = static_cast<double>(input->data[i]);
        const T* w = &weights->data[static_cast<std::size_t>(i) * m];
        for (int j = 0; j < m; ++j) acc[j] += v * static_cast<double>(w[j]);
    }
    for (int j = 0; j < m; ++j) out->data[j] = static_cast<T>(acc[j]);

    if (out->requires_grad) {
        tape.record([input, weights, bias, out, n, m]() {
            const T* go = out->grad.data();
            if (bias->requires_grad) {
                bias->ensure_grad();
                for (int j = 0; j < m; ++j) bias->grad[j] += go[j];
            }
            if (weights->requires_grad) {
                weights->ensure_grad();
                for (int i = 0; i < n; ++i) {
                    const double v = static_cast<double>(input->data[i]);
                    T* gw = &weights->grad[static_cast<std::size_t>(i) * m];
                    for (int j = 0; j < m; ++j)
                        gw[j] = static_cast<T>(static_cast<double>(gw[j]) + v * static_cast<double>(go[j]));
                }
            }
            if (input->requires_grad) {
                input->ensure_grad();
                for (int i = 0; i < n; ++i) {
                    const T* w = &weights->data[static_cast<std::size_t>(i) * m];
                    double a = 0.0;
                    for (int j = 0; j < m; ++j) a += static_cast<double>(w[j]) * static_cast<double>(go[j]);
                    input->grad[i] = static_cast<T>(static_cast<double>(input->grad[i]) + a);
                }
            }
        });
    }
    return out;
}

template <typename T>
TensorPtr<T> relu(Tape<T>& tape, TensorPtr<T> input) {
    auto out = make_tensor<T>(input->shape);
    out->requires_grad = input->requires_grad;
    for (std::size_t i = 0; i < input->data.size(); ++i)
        out->data[i] = input->data[i] > T(0) ? input->data[i] : T(0);
    if (out->requires_grad) {
        tape.record([input, out]() {
            input->ensure_grad();
            // Subgradient 0 at the kink.
            for (std::size_t i = 0; i < out->grad.size(); ++i)
                if (input->data[i] > T(0)) input->grad[i] += out->grad[i];
        });
    }
    return out;
}

// Saturation-safe sigmoid, clamped into the open interval (0, 1) so the
// result stays a valid probability even where exp underflows.
template <typename T>
T stable_sigmoid(T x) {
    T s;
    if (x >= T(0)) {
        const T e = static_cast<T>(std::exp(-static_cast<double>(x)));
        s = T(1) / (T(1) + e);
    } else {
        const T e = static_cast<T>(std::exp(static_cast<double>(x)));
        s = e / (T(1) + e);
    }
    const T lo = std::numeric_limits<T>::min();
    const T hi = T(1) - std::numeric_limits<T>::epsilon() / T(2);
    return std::clamp(s, lo, hi);
}

template <typename T>
TensorPtr<T> sigmoid(Tape<T>& tape, TensorPtr<T> input) {
    auto out = make_tensor<T>(input->shape);
    out->requires_grad = input->requires_grad;
    for (std::size_t i = 0; i < input->data.size(); ++i) out->data[i] = stable_sigmoid(input->data[i]);
    if (out->requires_grad) {
        tape.record([input, out]() {
            input->ensure_grad();
            for (std::size_t i = 0; i < out->grad.size(); ++i) {
                const double s = static_cast<double>(out->data[i]);
                input->grad[i] = static_cast<T>(static_cast<double>(input->grad[i]) +
                                                s * (1.0 - s) * static_cast<double>(out->grad[i]));
            }
        });
    }
    return out;
}

// Inverted dropout: zero with probability rate, scale survivors by
// 1/(1-rate); identity in inference mode.
template <typename T>
TensorPtr<T> dropout(Tape<T>& tape, TensorPtr<T> input, double rate, bool training, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout: rate must be in [0,1)");
    if (!training || rate == 0.0) {
        auto out = make_tensor<T>(input->shape);
        out->requires_grad = input->requires_grad;
        out->data = input->data;
        if (out->requires_grad) {
            tape.record([input, out]() {
                input->ensure_grad();
                for (std::size_t i = 0; i < out->grad.size(); ++i) input->grad[i] += out->grad[i];
            });
        }
        return out;
    }

    auto out = make_tensor<T>(input->shape);
    out->requires_grad = input->requires_grad;
    auto mask = std::make_shared<std::vector<T>>(input->data.size());
    const T scale = static_cast<T>(1.0 / (1.0 - rate));
    for (std::size_t i = 0; i < input->data.size(); ++i) {
        (*mask)[i] = rng.uniform() < rate ? T(0) : scale;
        out->data[i] = input->data[i] * (*mask)[i];
    }
    if (out->requires_grad) {
        tape.record([input, out, mask]() {
            input->ensure_grad();
            for (std::size_t i = 0; i < out->grad.size(); ++i) input->grad[i] += out->grad[i] * (*mask)[i];
        });
    }
    return out;
}

template <typename T>
TensorPtr<T> add(Tape<T>& tape, TensorPtr<T> a, TensorPtr<T> b) {
    if (a->shape != b->shape) throw DataError("add: shape mismatch");
    auto out = make_tensor<T>(a->shape);
    out->requires_grad = detail::any_grad<T>({a, b});
    for (std::size_t i = 0; i < a->data.size(); ++i) out->data[i] = a->data[i] + b->data[i];
    if (out->requires_grad) {
        tape.record([a, b, out]() {
            if (a->requires_grad) {
                a->ensure_grad();
                for (std::size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += out->grad[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (std::size_t i = 0; i < out->grad.size(); ++i) b->grad[i] += out->grad[i];
            }
        });
    }
    return out;
}

// Elementwise |a - b|; subgradient 0 where a == b.
template <typename T>
TensorPtr<T> abs_diff(Tape<T>& tape, TensorPtr<T> a, TensorPtr<T> b) {
    if (a->shape != b->shape) throw DataError("abs_diff: shape mismatch");
    auto out = make_tensor<T>(a->shape);
    out->requires_grad = detail::any_grad<T>({a, b});
    for (std::size_t i = 0; i < a->data.size(); ++i) {
        const T d = a->data[i] - b->data[i];
        out->data[i] = d < T(0) ? -d : d;
    }
    if (out->requires_grad) {
        tape.record([a, b, out]() {
            if (a->requires_grad) a->ensure_grad();
            if (b->requires_grad) b->ensure_grad();
            for (std::size_t i = 0; i < out->grad.size(); ++i) {
                const T d = a->data[i] - b->data[i];
                const T s = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
                if (a->requires_grad) a->grad[i] += s * out->grad[i];
                if (b->requires_grad) b->grad[i] -= s * out->grad[i];
            }
        });
    }
    return out;
}

template <typename T>
TensorPtr<T> flatten(Tape<T>& tape, TensorPtr<T> input) {
    auto out = make_tensor<T>({static_cast<int>(input->size())});
    out->requires_grad = input->requires_grad;
    out->data = input->data;
    if (out->requires_grad) {
        tape.record([input, out]() {
            input->ensure_grad();
            for (std::size_t i = 0; i < out->grad.size(); ++i) input->grad[i] += out->grad[i];
        });
    }
    return out;
}

// Binary cross entropy on a scalar probability; the prediction is clamped to
// [1e-7, 1 - 1e-7] before the logs.
template <typename T>
TensorPtr<T> bce_loss(Tape<T>& tape, TensorPtr<T> prediction, double target) {
    if (prediction->size() != 1) throw DataError("bce_loss: prediction must be scalar");
    if (target != 0.0 && target != 1.0) throw DataError("bce_loss: target must be 0 or 1");

    constexpr double kClamp = 1e-7;
    const double p = std::clamp(static_cast<double>(prediction->data[0]), kClamp, 1.0 - kClamp);
    auto out = make_tensor<T>({1});
    out->requires_grad = prediction->requires_grad;
    out->data[0] = static_cast<T>(-(target * std::log(p) + (1.0 - target) * std::log(1.0 - p)));

    if (out->requires_grad) {
        tape.record([prediction, out, p, target]() {
            prediction->ensure_grad();
            const double d = (p - target) / (p * (1.0 - p));
            prediction->grad[0] =
                static_cast<T>(static_cast<double>(prediction->grad[0]) + d * static_cast<double>(out->grad[0]));
        });
    }
    return out;
}

}  // namespace ostb
