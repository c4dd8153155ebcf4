#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "sseg/network.hpp"
#include "sseg/phantom.hpp"
#include "sseg/selftrain.hpp"
#include "sseg/trainer.hpp"

namespace sseg {

// Flat key=value run configuration: '#' comments, blank lines ignored,
// unknown or repeated keys rejected. Every run writes the fully resolved
// form next to its outputs.
struct RunConfig {
    uint64_t seed = 1;
    NetworkConfig network;
    TrainConfig train;      // .seed is filled from the global seed at use
    RoundPlan selftrain;    // carries the augmentation knobs

    // Preprocessing targets (defaults match the protocol: 1 mm isotropic,
    // 144 x 144 x 80).
    Vec3d preprocess_spacing{1.0, 1.0, 1.0};
    Vec3i preprocess_dims{144, 144, 80};

    // Phantom benchmark knobs; the remaining shape ranges keep their
    // defaults from PhantomSpec.
    int phantom_cases = 20;
    PhantomSpec phantom;
    CorruptionSpec corruption;

    int crossval_folds = 5;
    double hd_percentile = 100.0;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

// Emits every key in canonical order; parse(serialize(c)) == c.
std::string serialize_run_config(const RunConfig& config);

}  // namespace sseg
