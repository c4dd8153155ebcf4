#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "sseg/network.hpp"
#include "sseg/trainer.hpp"

namespace sseg {

struct RoundPlan {
    int rounds = 2;          // extra training rounds after the initial one
    int augment_copies = 1;  // distorted copies per pseudo-labeled pair
    bool keep_original_gt = true;
    bool warm_start = true;  // continue from the previous round's weights
    double distortion_sigma = 2.0;     // mm
    double distortion_spacing = 32.0;  // mm between control nodes
    int flip_axes = 0;                 // flip augmentation mask; off by default

    void validate() const;
};

// Eval-mode prediction reduced to labels; ties go to the lowest class.
LabelVolume pseudo_label(const ModelState& model, const ScalarVolume& vol);

// One round of set extension: per source pair, a pseudo-labeled copy plus
// `augment_copies` elastically distorted copies of it (image and label warped
// by the same field); the original GT pairs are retained when
// keep_original_gt. Output size n*(2+a) with GT kept, n*(1+a) without.
Dataset extend_dataset(const Dataset& sources, const ModelState& model, const RoundPlan& plan,
                       uint64_t seed);

struct SelfTrainResult {
    std::vector<ModelState> models;  // rounds+1 entries, models[r].round == r
    std::vector<TrainLog> logs;
    // Per round: (case id, provenance) for every pair trained on.
    std::vector<std::vector<std::pair<std::string, std::string>>> manifests;
};

// The self-reinforced loop: round 0 trains on the GT pairs with the given
// seed (bit-identical to a plain train call); each later round regenerates
// pseudo-labels with the previous model, extends the set, and retrains with
// a round-derived seed. When out_dir is nonempty, writes model_r{r}.ckpt,
// manifest_r{r}.csv and train_log_r{r}.csv per round.
SelfTrainResult self_reinforced_train(const Dataset& gt, const NetworkConfig& net_cfg,
                                      const TrainConfig& train_cfg, const RoundPlan& plan,
                                      const std::filesystem::path& out_dir = {});

}  // namespace sseg
