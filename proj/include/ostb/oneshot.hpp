#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ostb/episodes.hpp"
#include "ostb/siamese.hpp"

namespace ostb {

// N-way one-shot task: one support image per class, plus a query drawn from
// one of the support classes (never the same file as its support image).
struct OneShotTask {
    std::vector<std::string> support_classes;
    std::vector<const TfrImage*> support_images;
    int query_class = 0;  // index into support_classes
    const TfrImage* query_image = nullptr;
};

OneShotTask sample_task(const DatasetManifest& manifest, const ClassSplit& split, const ImageStore& images,
                        int n_way, Rng& rng);

// Similarity between a query and one support image; higher wins.
using PairScorer = std::function<double(const TfrImage& query, const TfrImage& support)>;

// argmax over support, ties broken by lowest class index.
int scored_trial(const PairScorer& scorer, const OneShotTask& task);

// Network prediction: argmax over k of predict_pair(query, support_k).p.
int one_shot_trial(const SiameseModel<float>& model, const OneShotTask& task);

// L1 distance on the raw grayscale planes; nearest support wins.
int nearest_neighbor_baseline(const OneShotTask& task);

int random_baseline(int n_way, Rng& rng);

double run_evaluation(const SiameseModel<float>& model, const DatasetManifest& manifest,
                      const ClassSplit& split, const ImageStore& images, int n_way, int trials, Rng& rng);

// Same trials scored by the network, the nearest-neighbor baseline, and a
// seeded random guesser.
struct BaselineComparison {
    double model_acc = 0.0;
    double nn_acc = 0.0;
    double random_acc = 0.0;
};

BaselineComparison run_evaluation_with_baselines(const SiameseModel<float>& model,
                                                 const DatasetManifest& manifest, const ClassSplit& split,
                                                 const ImageStore& images, int n_way, int trials, Rng& rng);

// Generic variant used for stub scorers in tests; the model path above
// delegates here with an embedding-caching scorer.
double run_trials(const PairScorer& scorer, const DatasetManifest& manifest, const ClassSplit& split,
                  const ImageStore& images, int n_way, int trials, Rng& rng);

// Executes `runner` once per repetition with a derived seed and reports
// (max, mean) of the per-run accuracies.
std::pair<double, double> protocol_max_mean(const std::function<double(int rep, uint64_t seed)>& runner,
                                            int repetitions, uint64_t base_seed);

// Scorer wrapping the model with an embedding cache keyed by image pointer;
// numerically identical to predict_pair.
PairScorer model_scorer(const SiameseModel<float>& model);

}  // namespace ostb
