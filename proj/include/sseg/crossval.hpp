#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "sseg/metrics.hpp"
#include "sseg/selftrain.hpp"
#include "sseg/trainer.hpp"

namespace sseg {

struct FoldPlan {
    int n = 0;
    int k = 5;
    uint64_t seed = 0;
    std::vector<int> assignment;  // case index -> fold index

    std::vector<std::vector<size_t>> members() const;  // cases per fold
};

// Deterministic shuffle, dealt contiguously; remainder cases go to the
// lowest-index folds. Throws ConfigError when k < 2 or k > n.
FoldPlan split_kfold(int n, int k, uint64_t seed);

// Case id without any augmentation suffix ("#pseudo", "#aug0", ...).
std::string base_case_id(const std::string& id);

struct CrossvalCell {
    int group = 0;  // 1-based, matching fold index + 1
    int round = 0;
    AggregateReport agg;
};

struct CrossvalResult {
    FoldPlan folds;
    std::vector<CrossvalCell> cells;  // group-major, rounds inner
    // manifests[g][r] = (case id, provenance) pairs trained on by group g+1
    // in round r; the leakage audit checks them against the held-out fold.
    std::vector<std::vector<std::vector<std::pair<std::string, std::string>>>> manifests;
};

// Per group: self-reinforced training on the other k-1 folds, then every
// round's model evaluated on the held-out fold. When out_dir is nonempty,
// each group's artifacts land in out_dir/group{g} and the table in
// out_dir/crossval.csv.
CrossvalResult run_crossval(const Dataset& data, const NetworkConfig& net_cfg,
                            const TrainConfig& train_cfg, const RoundPlan& plan, int k,
                            uint64_t fold_seed, const std::filesystem::path& out_dir = {});

// Layout: group, round, then dsc/hd/asd for humerus, scapula, both; one row
// per (group, round) plus a grand-mean row per round.
std::string crossval_to_csv(const CrossvalResult& result);

}  // namespace sseg
