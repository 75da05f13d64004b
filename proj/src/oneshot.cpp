#include "ostb/oneshot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <unordered_map>

namespace ostb {

OneShotTask sample_task(const DatasetManifest& manifest, const ClassSplit& split, const ImageStore& images,
                        int n_way, Rng& rng) {
    if (n_way < 1) throw ConfigError("sample_task: n_way must be >= 1");
    if (static_cast<int>(split.test_classes.size()) < n_way)
        throw DataError("sample_task: only " + std::to_string(split.test_classes.size()) +
                        " test classes for " + std::to_string(n_way) + "-way task");

    // Partial Fisher-Yates for the first n_way positions.
    std::vector<std::string> order = split.test_classes;
    for (int i = 0; i < n_way; ++i) {
        const std::size_t j = i + rng.below(order.size() - i);
        std::swap(order[i], order[j]);
    }

    OneShotTask task;
    std::vector<std::size_t> support_idx(n_way);
    for (int k = 0; k < n_way; ++k) {
        const std::string& cls = order[k];
        const auto& clips = manifest.entries.at(cls);
        if (clips.size() < 2)
            throw DataError("sample_task: test class '" + cls + "' has fewer than 2 images");
        support_idx[k] = rng.below(clips.size());
        task.support_classes.push_back(cls);
        task.support_images.push_back(&images.get(clips[support_idx[k]]));
    }

    task.query_class = static_cast<int>(rng.below(static_cast<uint64_t>(n_way)));
    const auto& qclips = manifest.entries.at(task.support_classes[task.query_class]);
    std::size_t qi = rng.below(qclips.size() - 1);
    if (qi >= support_idx[task.query_class]) ++qi;  // query never equals its support image
    task.query_image = &images.get(qclips[qi]);
    return task;
}

int scored_trial(const PairScorer& scorer, const OneShotTask& task) {
    if (task.support_images.empty()) throw DataError("scored_trial: empty support set");
    int best = 0;
    double best_score = scorer(*task.query_image, *task.support_images[0]);
    for (std::size_t k = 1; k < task.support_images.size(); ++k) {
        const double s = scorer(*task.query_image, *task.support_images[k]);
        if (s > best_score) {  // strict: ties keep the lowest class index
            best_score = s;
            best = static_cast<int>(k);
        }
    }
    return best;
}

PairScorer model_scorer(const SiameseModel<float>& model) {
    auto cache = std::make_shared<std::unordered_map<const TfrImage*, std::vector<float>>>();
    const SiameseModel<float>* m = &model;
    return [m, cache](const TfrImage& query, const TfrImage& support) {
        const auto emb = [&](const TfrImage& img) -> const std::vector<float>& {
            auto it = cache->find(&img);
            if (it == cache->end()) it = cache->emplace(&img, embed(*m, img)).first;
            return it->second;
        };
        return predict_from_embeddings(*m, emb(query), emb(support)).p;
    };
}

int one_shot_trial(const SiameseModel<float>& model, const OneShotTask& task) {
    if (task.support_images.empty()) throw DataError("one_shot_trial: empty support set");
    const std::vector<float> q = embed(model, *task.query_image);
    int best = 0;
    double best_p = predict_from_embeddings(model, q, embed(model, *task.support_images[0])).p;
    for (std::size_t k = 1; k < task.support_images.size(); ++k) {
        const double p = predict_from_embeddings(model, q, embed(model, *task.support_images[k])).p;
        if (p > best_p) {
            best_p = p;
            best = static_cast<int>(k);
        }
    }
    return best;
}

int nearest_neighbor_baseline(const OneShotTask& task) {
    if (task.support_images.empty()) throw DataError("nearest_neighbor_baseline: empty support set");
    int best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < task.support_images.size(); ++k) {
        const TfrImage& s = *task.support_images[k];
        const TfrImage& q = *task.query_image;
        if (s.gray.size() != q.gray.size())
            throw DataError("nearest_neighbor_baseline: image size mismatch");
        double d = 0.0;
        for (std::size_t i = 0; i < q.gray.size(); ++i)
            d += std::abs(static_cast<double>(q.gray[i]) - static_cast<double>(s.gray[i]));
        if (d < best_dist) {  // strict: ties keep the lowest class index
            best_dist = d;
            best = static_cast<int>(k);
        }
    }
    return best;
}

int random_baseline(int n_way, Rng& rng) {
    if (n_way < 1) throw ConfigError("random_baseline: n_way must be >= 1");
    return static_cast<int>(rng.below(static_cast<uint64_t>(n_way)));
}

double run_trials(const PairScorer& scorer, const DatasetManifest& manifest, const ClassSplit& split,
                  const ImageStore& images, int n_way, int trials, Rng& rng) {
    if (trials <= 0) throw ConfigError("run_trials: trials must be positive");
    int correct = 0;
    for (int t = 0; t < trials; ++t) {
        const OneShotTask task = sample_task(manifest, split, images, n_way, rng);
        if (scored_trial(scorer, task) == task.query_class) ++correct;
    }
    return static_cast<double>(correct) / trials;
}

double run_evaluation(const SiameseModel<float>& model, const DatasetManifest& manifest,
                      const ClassSplit& split, const ImageStore& images, int n_way, int trials, Rng& rng) {
    return run_trials(model_scorer(model), manifest, split, images, n_way, trials, rng);
}

BaselineComparison run_evaluation_with_baselines(const SiameseModel<float>& model,
                                                 const DatasetManifest& manifest, const ClassSplit& split,
                                                 const ImageStore& images, int n_way, int trials, Rng& rng) {
    if (trials <= 0) throw ConfigError("run_evaluation_with_baselines: trials must be positive");
    PairScorer scorer = model_scorer(model);
    Rng guess_rng(Rng::derive(split.seed, 0xba5e));

    int model_ok = 0, nn_ok = 0, random_ok = 0;
    for (int t = 0; t < trials; ++t) {
        const OneShotTask task = sample_task(manifest, split, images, n_way, rng);
        if (scored_trial(scorer, task) == task.query_class) ++model_ok;
        if (nearest_neighbor_baseline(task) == task.query_class) ++nn_ok;
        if (random_baseline(n_way, guess_rng) == task.query_class) ++random_ok;
    }
    BaselineComparison cmp;
    cmp.model_acc = static_cast<double>(model_ok) / trials;
    cmp.nn_acc = static_cast<double>(nn_ok) / trials;
    cmp.random_acc = static_cast<double>(random_ok) / trials;
    return cmp;
}

std::pair<double, double> protocol_max_mean(const std::function<double(int rep, uint64_t seed)>& runner,
                                            int repetitions, uint64_t base_seed) {
    if (repetitions < 1) throw ConfigError("protocol_max_mean: repetitions must be >= 1");
    double max_acc = 0.0, sum = 0.0;
    for (int rep = 0; rep < repetitions; ++rep) {
        double acc;
        try {
            acc = runner(rep, Rng::derive(base_seed, 0x9000 + static_cast<uint64_t>(rep)));
        } catch (const std::exception& e) {
            throw NumericError("protocol_max_mean: repetition " + std::to_string(rep + 1) +
                               " failed: " + e.what());
        }
        max_acc = std::max(max_acc, acc);
        sum += acc;
    }
    return {max_acc, sum / repetitions};
}

}  // namespace ostb
