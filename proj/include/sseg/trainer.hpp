#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sseg/network.hpp"
#include "sseg/volume.hpp"

namespace sseg {

struct TrainConfig {
    int epochs = 60;
    int batch_size = 1;  // the protocol trains one volume per step
    double lr0 = 0.001;
    double lr_decay = 0.95;
    int decay_every = 10;
    uint64_t seed = 0;

    // Allows epochs == 0 so tests can verify the no-step identity.
    void validate() const;
};

// Learning rate in effect at a zero-based epoch index.
double learning_rate_at(const TrainConfig& cfg, int epoch);

struct TrainingPair {
    ScalarVolume image;
    LabelVolume labels;
    std::string id;
    std::string provenance = "GT";  // GT | pseudo | augmented
};

using Dataset = std::vector<TrainingPair>;

struct TrainLogEntry {
    int epoch = 0;
    double lr = 0.0;
    double mean_loss = 0.0;  // cross entropy per voxel, averaged over samples
};

struct TrainLog {
    std::vector<TrainLogEntry> entries;
};

std::string train_log_to_csv(const TrainLog& log);

// Adam (beta1 = 0.9, beta2 = 0.999, eps = 1e-8) on the per-voxel mean loss,
// one volume per step, samples reshuffled every epoch from the run seed.
// Mutates the model in place and returns the per-epoch log.
TrainLog train(ModelState& model, const Dataset& data, const TrainConfig& cfg);

// Eval-mode forward wrapper.
inline ProbabilityVolume predict(const ModelState& model, const ScalarVolume& vol) {
    return predict_probabilities(model, vol);
}

}  // namespace sseg
