#include "ostb/episodes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "ostb/adam.hpp"
#include "ostb/checkpoint.hpp"

namespace ostb {

ImageStore ImageStore::from_cache(const ImageCache& cache, const DatasetManifest& manifest) {
    ImageStore store;
    for (const auto& cls : manifest.classes)
        for (const auto& path : manifest.entries.at(cls)) store.put(path, cache.get(path));
    return store;
}

ClassSplit split_classes(const DatasetManifest& manifest, int n_train, uint64_t seed) {
    const int k = static_cast<int>(manifest.classes.size());
    if (n_train < 1 || n_train >= k)
        throw ConfigError("split_classes: n_train must be in [1, " + std::to_string(k - 1) + "], got " +
                          std::to_string(n_train));

    std::vector<std::string> order = manifest.classes;
    Rng rng(seed);
    for (int i = k - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.below(static_cast<uint64_t>(i) + 1));
        std::swap(order[i], order[j]);
    }

    ClassSplit split;
    split.seed = seed;
    split.train_classes.assign(order.begin(), order.begin() + n_train);
    split.test_classes.assign(order.begin() + n_train, order.end());
    return split;
}

PairBatch sample_pairs(const DatasetManifest& manifest, const ClassSplit& split, const ImageStore& images,
                       int batch_size, double same_fraction, Rng& rng) {
    if (batch_size <= 0) throw ConfigError("sample_pairs: batch_size must be positive");
    if (same_fraction < 0.0 || same_fraction > 1.0)
        throw ConfigError("sample_pairs: same_fraction must be in [0,1]");
    const auto& classes = split.train_classes;
    if (classes.empty()) throw DataError("sample_pairs: no train classes");
    if (same_fraction < 1.0 && classes.size() < 2)
        throw DataError("sample_pairs: different-class pairs need at least 2 train classes");

    const auto clips_of = [&](const std::string& cls) -> const std::vector<std::string>& {
        auto it = manifest.entries.find(cls);
        if (it == manifest.entries.end() || it->second.empty())
            throw DataError("sample_pairs: no clips for class '" + cls + "'");
        return it->second;
    };

    PairBatch batch;
    batch.same_fraction = same_fraction;
    batch.pairs.reserve(batch_size);
    for (int i = 0; i < batch_size; ++i) {
        PairBatch::Pair pair;
        if (rng.uniform() < same_fraction) {
            const auto& cls = classes[rng.below(classes.size())];
            const auto& clips = clips_of(cls);
            if (clips.size() < 2)
                throw DataError("sample_pairs: class '" + cls + "' needs >= 2 images for same-class pairs");
            const std::size_t ia = rng.below(clips.size());
            std::size_t ib = rng.below(clips.size() - 1);
            if (ib >= ia) ++ib;  // never pair an image with itself
            pair.a = &images.get(clips[ia]);
            pair.b = &images.get(clips[ib]);
            pair.target = 1;
        } else {
            const std::size_t ca = rng.below(classes.size());
            std::size_t cb = rng.below(classes.size() - 1);
            if (cb >= ca) ++cb;
            const auto& clips_a = clips_of(classes[ca]);
            const auto& clips_b = clips_of(classes[cb]);
            pair.a = &images.get(clips_a[rng.below(clips_a.size())]);
            pair.b = &images.get(clips_b[rng.below(clips_b.size())]);
            pair.target = 0;
        }
        batch.pairs.push_back(pair);
    }
    return batch;
}

void TrainConfig::validate() const {
    if (lr <= 0.0) throw ConfigError("TrainConfig: lr must be positive");
    if (epochs <= 0 || batches_per_epoch <= 0 || batch_size <= 0)
        throw ConfigError("TrainConfig: counts must be positive");
    if (same_fraction < 0.0 || same_fraction > 1.0)
        throw ConfigError("TrainConfig: same_fraction must be in [0,1]");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ConfigError("TrainConfig: dropout_rate must be in [0,1)");
}

TrainResult train(SiameseModel<float>& model, const DatasetManifest& manifest, const ClassSplit& split,
                  const ImageStore& images, const TrainConfig& config, const std::string& checkpoint_path) {
    config.validate();

    Rng data_rng(Rng::derive(config.seed, 0x70));
    Rng drop_rng(Rng::derive(config.seed, 0x71));

    AdamState<float> opt(config.lr);
    opt.attach(model.params);

    TrainResult result;
    result.best_loss = std::numeric_limits<double>::infinity();
    std::vector<std::vector<float>> best_params;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        double loss_sum = 0.0;
        int correct = 0, total = 0;

        for (int b = 0; b < config.batches_per_epoch; ++b) {
            PairBatch batch =
                sample_pairs(manifest, split, images, config.batch_size, config.same_fraction, data_rng);
            for (auto& p : model.params) p->zero_grad();

            for (std::size_t pi = 0; pi < batch.pairs.size(); ++pi) {
                const auto& pair = batch.pairs[pi];
                Tape<float> tape;
                auto e1 = forward_embedding(model, tape, image_to_tensor<float>(*pair.a), true, &drop_rng);
                auto e2 = forward_embedding(model, tape, image_to_tensor<float>(*pair.b), true, &drop_rng);
                auto d = abs_diff(tape, e1, e2);
                auto logit = dense(tape, d, model.params[model.merge_w], model.params[model.merge_b]);
                auto prob = sigmoid(tape, logit);
                auto loss = bce_loss(tape, prob, static_cast<double>(pair.target));

                const double lv = static_cast<double>(loss->data[0]);
                if (!std::isfinite(lv))
                    throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch + 1) +
                                       ", batch " + std::to_string(b + 1) + ", pair " + std::to_string(pi + 1));
                loss_sum += lv;
                const int predicted = prob->data[0] > 0.5f ? 1 : 0;
                if (predicted == pair.target) ++correct;
                ++total;

                tape.backward(*loss);
            }
            opt.step(model.params, 1.0 / config.batch_size);
        }

        EpochStats stats;
        stats.epoch = epoch + 1;
        stats.mean_loss = loss_sum / total;
        stats.pair_accuracy = static_cast<double>(correct) / total;
        result.curve.push_back(stats);

        if (stats.mean_loss < result.best_loss) {
            result.best_loss = stats.mean_loss;
            result.best_epoch = epoch + 1;
            best_params.clear();
            for (const auto& p : model.params) best_params.push_back(p->data);
        }
    }

    for (std::size_t i = 0; i < model.params.size(); ++i) model.params[i]->data = best_params[i];
    if (!checkpoint_path.empty()) save_checkpoint(checkpoint_path, model);
    return result;
}

void write_loss_csv(const std::string& path, const std::vector<EpochStats>& curve) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("write_loss_csv: cannot open " + path);
    out << "epoch,mean_loss,pair_accuracy\n";
    char buf[96];
    for (const auto& s : curve) {
        std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f\n", s.epoch, s.mean_loss, s.pair_accuracy);
        out << buf;
    }
}

}  // namespace ostb
