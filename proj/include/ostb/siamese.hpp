#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ostb/rng.hpp"
#include "ostb/tensor.hpp"
#include "ostb/tfr.hpp"

namespace ostb {

enum class Architecture { Conv, Residual };

std::string to_string(Architecture a);
Architecture architecture_from_string(const std::string& s);

// VGG-style twin: conv blocks (kernel size starts at 10 and steps down by
// 3), each followed by relu, optional 2x2 max pool, and dropout; then
// flatten -> dense(embedding_dim) -> sigmoid. The canonical full-size
// schedule reproduces the published parameter count exactly.
struct ConvSiameseConfig {
    int input_side = 224;
    int input_channels = 3;
    std::vector<std::pair<int, int>> conv_blocks = {{10, 64}, {7, 128}, {4, 128}, {4, 256}};
    std::vector<bool> pool_after = {true, true, true, false};
    int embedding_dim = 4096;
    double dropout_rate = 0.2;

    void validate() const;
    nlohmann::json to_json() const;
    static ConvSiameseConfig from_json(const nlohmann::json& j);
};

// Reduced config used by fast tests and the end-to-end desk runs.
ConvSiameseConfig desk_conv_config(int input_side = 64);

// Residual twin: stem conv, stages of residual blocks (identity blocks keep
// H(x) = F(x) + x exactly; conv blocks project the skip with a 1x1 conv),
// 2x2 pool after the stem and after every stage entry, then flatten ->
// dense(embedding_dim) -> sigmoid.
struct ResidualSiameseConfig {
    struct Stage {
        enum class Kind { Identity, Conv };
        Kind kind = Kind::Identity;
        int channels = 64;
        int count = 1;
    };

    int input_side = 224;
    int input_channels = 3;
    std::pair<int, int> stem = {7, 64};
    std::vector<Stage> stages = {{Stage::Kind::Conv, 64, 1},
                                 {Stage::Kind::Identity, 64, 2},
                                 {Stage::Kind::Conv, 144, 1},
                                 {Stage::Kind::Identity, 144, 2}};
    int embedding_dim = 4096;
    std::pair<double, double> param_budget = {20e6, 30e6};

    void validate() const;
    nlohmann::json to_json() const;
    static ResidualSiameseConfig from_json(const nlohmann::json& j);
};

ResidualSiameseConfig desk_residual_config(int input_side = 64);

// One layer of the forward plan. Parameter slots index into
// SiameseModel::params.
struct LayerStep {
    enum class Kind { Conv, Relu, Pool, Dropout, Flatten, Dense, Sigmoid, ResBlock };
    Kind kind;
    int w = -1, b = -1;                      // Conv / Dense
    int c1w = -1, c1b = -1, c2w = -1, c2b = -1;  // ResBlock main path
    int pw = -1, pb = -1;                    // ResBlock projection (Conv-type blocks)
    double rate = 0.0;                       // Dropout
};

// Twin embedding network plus the weighted-L1 merge head. Both twins run
// the same parameter tensors; weight sharing is structural.
template <typename T>
struct SiameseModel {
    Architecture arch = Architecture::Conv;
    int input_side = 224;
    int input_channels = 3;
    int embedding_dim = 4096;
    double dropout_rate = 0.0;

    std::vector<LayerStep> steps;
    std::vector<TensorPtr<T>> params;
    std::vector<std::string> param_names;
    int merge_w = -1, merge_b = -1;  // indexes into params
    nlohmann::json config_json;
};

template <typename T>
SiameseModel<T> build_conv_siamese(const ConvSiameseConfig& config, Rng& rng);

template <typename T>
SiameseModel<T> build_residual_siamese(const ResidualSiameseConfig& config, Rng& rng);

template <typename T>
int64_t param_count(const SiameseModel<T>& model);

// FNV-1a over all parameter bytes in declaration order.
template <typename T>
uint64_t param_digest(const SiameseModel<T>& model);

// Runs one twin over an input [side, side, 3]. Dropout draws from rng only
// when training.
template <typename T>
TensorPtr<T> forward_embedding(const SiameseModel<T>& model, Tape<T>& tape, TensorPtr<T> input,
                               bool training, Rng* rng);

template <typename T>
TensorPtr<T> image_to_tensor(const TfrImage& image);

// Inference-mode embedding of a rendered image.
template <typename T>
std::vector<T> embed(const SiameseModel<T>& model, const TfrImage& image);

struct PairPrediction {
    double p = 0.0;
    std::vector<double> feature_l1;
};

// p = sigmoid(sum_j gamma_j |e1_j - e2_j| + bias); shared by predict_pair
// and the evaluation fast path.
template <typename T>
PairPrediction predict_from_embeddings(const SiameseModel<T>& model, const std::vector<T>& a,
                                       const std::vector<T>& b);

template <typename T>
PairPrediction predict_pair(const SiameseModel<T>& model, const TfrImage& a, const TfrImage& b);

// ---------------------------------------------------------------------------
// Implementation
// ---------------------------------------------------------------------------

template <typename T>
int64_t param_count(const SiameseModel<T>& model) {
    int64_t n = 0;
    for (const auto& p : model.params) n += p->size();
    return n;
}

template <typename T>
uint64_t param_digest(const SiameseModel<T>& model) {
    uint64_t h = 1469598103934665603ULL;
    for (const auto& p : model.params) {
        const unsigned char* bytes = reinterpret_cast<const unsigned char*>(p->data.data());
        const std::size_t len = p->data.size() * sizeof(T);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= bytes[i];
            h *= 1099511628211ULL;
        }
    }
    return h;
}

namespace detail {

template <typename T>
int add_param(SiameseModel<T>& model, const std::string& name, std::vector<int> shape) {
    model.params.push_back(make_tensor<T>(std::move(shape), true));
    model.param_names.push_back(name);
    return static_cast<int>(model.params.size() - 1);
}

template <typename T>
void init_normal(Tensor<T>& t, Rng& rng, double stddev) {
    for (auto& v : t.data) v = static_cast<T>(rng.normal(0.0, stddev));
}

// Spatial side tracking used by the builders to size the flatten.
inline int conv_out(int side, int k) { return side - k + 1; }
inline int pool_out(int side) { return side / 2; }

}  // namespace detail

template <typename T>
SiameseModel<T> build_conv_siamese(const ConvSiameseConfig& config, Rng& rng) {
    config.validate();

    SiameseModel<T> model;
    model.arch = Architecture::Conv;
    model.input_side = config.input_side;
    model.input_channels = config.input_channels;
    model.embedding_dim = config.embedding_dim;
    model.dropout_rate = config.dropout_rate;
    model.config_json = config.to_json();

    int side = config.input_side;
    int channels = config.input_channels;
    for (std::size_t i = 0; i < config.conv_blocks.size(); ++i) {
        const auto [k, out_ch] = config.conv_blocks[i];
        if (k > side)
            throw ConfigError("build_conv_siamese: kernel " + std::to_string(k) +
                              " larger than remaining side " + std::to_string(side));
        const std::string base = "block" + std::to_string(i + 1);
        LayerStep conv{LayerStep::Kind::Conv};
        conv.w = detail::add_param(model, base + ".kernel", {k, k, channels, out_ch});
        conv.b = detail::add_param(model, base + ".bias", {out_ch});
        model.steps.push_back(conv);
        model.steps.push_back({LayerStep::Kind::Relu});
        side = detail::conv_out(side, k);
        channels = out_ch;
        if (config.pool_after[i]) {
            model.steps.push_back({LayerStep::Kind::Pool});
            side = detail::pool_out(side);
        }
        LayerStep drop{LayerStep::Kind::Dropout};
        drop.rate = config.dropout_rate;
        model.steps.push_back(drop);
        if (side < 1) throw ConfigError("build_conv_siamese: network consumed the whole input");
    }

    model.steps.push_back({LayerStep::Kind::Flatten});
    const int flat = side * side * channels;
    LayerStep dense_step{LayerStep::Kind::Dense};
    dense_step.w = detail::add_param(model, "embed.weight", {flat, config.embedding_dim});
    dense_step.b = detail::add_param(model, "embed.bias", {config.embedding_dim});
    model.steps.push_back(dense_step);
    model.steps.push_back({LayerStep::Kind::Sigmoid});

    model.merge_w = detail::add_param(model, "merge.weight", {config.embedding_dim, 1});
    model.merge_b = detail::add_param(model, "merge.bias", {1});

    for (std::size_t i = 0; i < model.params.size(); ++i) {
        const std::string& name = model.param_names[i];
        if (name == "merge.weight") {
            detail::init_normal(*model.params[i], rng, 0.2 / std::sqrt(static_cast<double>(config.embedding_dim)));
        } else if (name.ends_with(".bias")) {
            // zeros
        } else {
            detail::init_normal(*model.params[i], rng, 0.01);
        }
    }
    return model;
}

template <typename T>
SiameseModel<T> build_residual_siamese(const ResidualSiameseConfig& config, Rng& rng) {
    config.validate();

    SiameseModel<T> model;
    model.arch = Architecture::Residual;
    model.input_side = config.input_side;
    model.input_channels = config.input_channels;
    model.embedding_dim = config.embedding_dim;
    model.dropout_rate = 0.0;
    model.config_json = config.to_json();

    int side = config.input_side;
    int channels = config.input_channels;

    LayerStep stem{LayerStep::Kind::Conv};
    stem.w = detail::add_param(model, "stem.kernel", {config.stem.first, config.stem.first, channels, config.stem.second});
    stem.b = detail::add_param(model, "stem.bias", {config.stem.second});
    model.steps.push_back(stem);
    model.steps.push_back({LayerStep::Kind::Relu});
    model.steps.push_back({LayerStep::Kind::Pool});
    side = detail::pool_out(detail::conv_out(side, config.stem.first));
    channels = config.stem.second;

    for (std::size_t si = 0; si < config.stages.size(); ++si) {
        const auto& stage = config.stages[si];
        for (int b = 0; b < stage.count; ++b) {
            const std::string base = "stage" + std::to_string(si + 1) + ".block" + std::to_string(b + 1);
            const bool projected = stage.kind == ResidualSiameseConfig::Stage::Kind::Conv;
            if (!projected && stage.channels != channels)
                throw ConfigError("build_residual_siamese: identity block in stage " + std::to_string(si + 1) +
                                  " cannot change channels " + std::to_string(channels) + " -> " +
                                  std::to_string(stage.channels));
            LayerStep block{LayerStep::Kind::ResBlock};
            block.c1w = detail::add_param(model, base + ".conv1.kernel", {3, 3, channels, stage.channels});
            block.c1b = detail::add_param(model, base + ".conv1.bias", {stage.channels});
            block.c2w = detail::add_param(model, base + ".conv2.kernel", {3, 3, stage.channels, stage.channels});
            block.c2b = detail::add_param(model, base + ".conv2.bias", {stage.channels});
            if (projected) {
                block.pw = detail::add_param(model, base + ".proj.kernel", {1, 1, channels, stage.channels});
                block.pb = detail::add_param(model, base + ".proj.bias", {stage.channels});
            }
            model.steps.push_back(block);
            channels = stage.channels;
        }
        model.steps.push_back({LayerStep::Kind::Pool});
        side = detail::pool_out(side);
        if (side < 1) throw ConfigError("build_residual_siamese: network consumed the whole input");
    }

    model.steps.push_back({LayerStep::Kind::Flatten});
    const int flat = side * side * channels;
    LayerStep dense_step{LayerStep::Kind::Dense};
    dense_step.w = detail::add_param(model, "embed.weight", {flat, config.embedding_dim});
    dense_step.b = detail::add_param(model, "embed.bias", {config.embedding_dim});
    model.steps.push_back(dense_step);
    model.steps.push_back({LayerStep::Kind::Sigmoid});

    model.merge_w = detail::add_param(model, "merge.weight", {config.embedding_dim, 1});
    model.merge_b = detail::add_param(model, "merge.bias", {1});

    for (std::size_t i = 0; i < model.params.size(); ++i) {
        const std::string& name = model.param_names[i];
        if (name == "merge.weight") {
            detail::init_normal(*model.params[i], rng, 0.2 / std::sqrt(static_cast<double>(config.embedding_dim)));
        } else if (name.ends_with(".bias")) {
            // zeros
        } else {
            detail::init_normal(*model.params[i], rng, 0.01);
        }
    }

    const int64_t count = param_count(model);
    if (static_cast<double>(count) < config.param_budget.first ||
        static_cast<double>(count) > config.param_budget.second)
        throw ConfigError("build_residual_siamese: parameter budget unsatisfiable: " + std::to_string(count) +
                          " outside [" + std::to_string(config.param_budget.first) + ", " +
                          std::to_string(config.param_budget.second) + "]");
    return model;
}

template <typename T>
TensorPtr<T> forward_embedding(const SiameseModel<T>& model, Tape<T>& tape, TensorPtr<T> input,
                               bool training, Rng* rng) {
    if (input->shape != std::vector<int>{model.input_side, model.input_side, model.input_channels})
        throw DataError("forward_embedding: input shape mismatch");
    if (training && rng == nullptr && model.dropout_rate > 0.0)
        throw DataError("forward_embedding: training forward needs an rng for dropout");

    TensorPtr<T> x = input;
    for (const LayerStep& s : model.steps) {
        switch (s.kind) {
            case LayerStep::Kind::Conv:
                x = conv2d(tape, x, model.params[s.w], model.params[s.b]);
                break;
            case LayerStep::Kind::Relu:
                x = relu(tape, x);
                break;
            case LayerStep::Kind::Pool:
                x = maxpool2(tape, x);
                break;
            case LayerStep::Kind::Dropout: {
                static Rng dummy(0);
                x = dropout(tape, x, s.rate, training, rng ? *rng : dummy);
                break;
            }
            case LayerStep::Kind::Flatten:
                x = flatten(tape, x);
                break;
            case LayerStep::Kind::Dense:
                x = dense(tape, x, model.params[s.w], model.params[s.b]);
                break;
            case LayerStep::Kind::Sigmoid:
                x = sigmoid(tape, x);
                break;
            case LayerStep::Kind::ResBlock: {
                auto f = conv2d(tape, pad2d(tape, x, 1), model.params[s.c1w], model.params[s.c1b]);
                f = relu(tape, f);
                f = conv2d(tape, pad2d(tape, f, 1), model.params[s.c2w], model.params[s.c2b]);
                TensorPtr<T> skip = x;
                if (s.pw >= 0) skip = conv2d(tape, x, model.params[s.pw], model.params[s.pb]);
                x = add(tape, f, skip);
                break;
            }
        }
    }
    return x;
}

template <typename T>
TensorPtr<T> image_to_tensor(const TfrImage& image) {
    auto t = make_tensor<T>({image.side, image.side, 3});
    const std::size_t plane = image.gray.size();
    for (std::size_t i = 0; i < plane; ++i) {
        const T v = static_cast<T>(image.gray[i]);
        t->data[i * 3 + 0] = v;
        t->data[i * 3 + 1] = v;
        t->data[i * 3 + 2] = v;
    }
    return t;
}

template <typename T>
std::vector<T> embed(const SiameseModel<T>& model, const TfrImage& image) {
    Tape<T> tape;
    auto out = forward_embedding(model, tape, image_to_tensor<T>(image), /*training=*/false, nullptr);
    return out->data;
}

template <typename T>
PairPrediction predict_from_embeddings(const SiameseModel<T>& model, const std::vector<T>& a,
                                       const std::vector<T>& b) {
    if (a.size() != b.size() || static_cast<int>(a.size()) != model.embedding_dim)
        throw DataError("predict_from_embeddings: embedding size mismatch");
    const Tensor<T>& gamma = *model.params[model.merge_w];
    const Tensor<T>& bias = *model.params[model.merge_b];

    PairPrediction pred;
    pred.feature_l1.resize(a.size());
    double logit = static_cast<double>(bias.data[0]);
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double d = std::abs(static_cast<double>(a[j]) - static_cast<double>(b[j]));
        pred.feature_l1[j] = d;
        logit += static_cast<double>(gamma.data[j]) * d;
    }
    pred.p = stable_sigmoid(logit);
    return pred;
}

template <typename T>
PairPrediction predict_pair(const SiameseModel<T>& model, const TfrImage& a, const TfrImage& b) {
    return predict_from_embeddings(model, embed(model, a), embed(model, b));
}

}  // namespace ostb
