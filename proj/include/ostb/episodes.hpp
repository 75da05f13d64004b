#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "ostb/audio.hpp"
#include "ostb/image_io.hpp"
#include "ostb/siamese.hpp"
#include "ostb/tfr.hpp"

namespace ostb {

// In-memory image set keyed by manifest path.
class ImageStore {
public:
    void put(const std::string& id, TfrImage image) { images_[id] = std::move(image); }

    const TfrImage& get(const std::string& id) const {
        auto it = images_.find(id);
        if (it == images_.end()) throw DataError("ImageStore: no image for " + id);
        return it->second;
    }

    bool contains(const std::string& id) const { return images_.count(id) > 0; }
    std::size_t size() const { return images_.size(); }

    static ImageStore from_cache(const ImageCache& cache, const DatasetManifest& manifest);

private:
    std::unordered_map<std::string, TfrImage> images_;
};

// Class-disjoint split: seeded shuffle of the class list, first n_train
// classes train, the rest test.
struct ClassSplit {
    std::vector<std::string> train_classes;
    std::vector<std::string> test_classes;
    uint64_t seed = 0;
};

ClassSplit split_classes(const DatasetManifest& manifest, int n_train, uint64_t seed);

// Verification pairs drawn from train classes only; target = 1 iff the two
// images share a class.
struct PairBatch {
    struct Pair {
        const TfrImage* a = nullptr;
        const TfrImage* b = nullptr;
        int target = 0;
    };
    std::vector<Pair> pairs;
    double same_fraction = 0.5;
};

PairBatch sample_pairs(const DatasetManifest& manifest, const ClassSplit& split, const ImageStore& images,
                       int batch_size, double same_fraction, Rng& rng);

struct TrainConfig {
    double lr = 6e-4;
    int epochs = 50;
    int batches_per_epoch = 100;
    int batch_size = 32;
    double same_fraction = 0.5;
    double dropout_rate = 0.2;  // applied via the model config at build time
    uint64_t seed = 42;
    TfrKind representation = TfrKind::Scalogram;

    void validate() const;
};

struct EpochStats {
    int epoch = 0;
    double mean_loss = 0.0;
    double pair_accuracy = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> curve;
    int best_epoch = 0;
    double best_loss = 0.0;
};

// Pairwise BCE training with one mean-gradient Adam step per batch. On
// return the model carries the best-loss epoch's parameters; when
// checkpoint_path is non-empty they are also written there.
TrainResult train(SiameseModel<float>& model, const DatasetManifest& manifest, const ClassSplit& split,
                  const ImageStore& images, const TrainConfig& config,
                  const std::string& checkpoint_path = "");

void write_loss_csv(const std::string& path, const std::vector<EpochStats>& curve);

}  // namespace ostb
