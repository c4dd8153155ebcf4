#include "sseg/crossval.hpp"

#include <cstdio>
#include <fstream>
#include <numeric>

#include "sseg/error.hpp"
#include "sseg/rng.hpp"

namespace sseg {

namespace {

constexpr uint64_t kGroupStream = 0x67726f75u;  // per-group training seed

}  // namespace

std::vector<std::vector<size_t>> FoldPlan::members() const {
    std::vector<std::vector<size_t>> folds(static_cast<size_t>(k));
    for (size_t i = 0; i < assignment.size(); ++i)
        folds[static_cast<size_t>(assignment[i])].push_back(i);
    return folds;
}

FoldPlan split_kfold(int n, int k, uint64_t seed) {
    if (k < 2) throw ConfigError("k-fold split needs k >= 2");
    if (k > n) throw ConfigError("k-fold split needs k <= n");
    FoldPlan plan;
    plan.n = n;
    plan.k = k;
    plan.seed = seed;
    plan.assignment.assign(static_cast<size_t>(n), 0);
    std::vector<size_t> perm(static_cast<size_t>(n));
    std::iota(perm.begin(), perm.end(), size_t{0});
    Rng rng(seed);
    rng.shuffle(perm);
    const int base = n / k, rem = n % k;
    size_t next = 0;
    for (int f = 0; f < k; ++f) {
        const int size = base + (f < rem ? 1 : 0);
        for (int i = 0; i < size; ++i) plan.assignment[perm[next++]] = f;
    }
    return plan;
}

std::string base_case_id(const std::string& id) {
    const size_t pos = id.find('#');
    return pos == std::string::npos ? id : id.substr(0, pos);
}

CrossvalResult run_crossval(const Dataset& data, const NetworkConfig& net_cfg,
                            const TrainConfig& train_cfg, const RoundPlan& plan, int k,
                            uint64_t fold_seed, const std::filesystem::path& out_dir) {
    if (data.empty()) throw ConfigError("cross-validation dataset is empty");
    CrossvalResult result;
    result.folds = split_kfold(static_cast<int>(data.size()), k, fold_seed);
    const auto folds = result.folds.members();

    for (int g = 0; g < k; ++g) {
        Dataset train_set;
        for (size_t i = 0; i < data.size(); ++i)
            if (result.folds.assignment[i] != g) train_set.push_back(data[i]);

        TrainConfig group_cfg = train_cfg;
        group_cfg.seed = derive_seed(train_cfg.seed, kGroupStream, static_cast<uint64_t>(g));
        const std::filesystem::path group_dir =
            out_dir.empty() ? std::filesystem::path{}
                            : out_dir / ("group" + std::to_string(g + 1));
        SelfTrainResult st = self_reinforced_train(train_set, net_cfg, group_cfg, plan, group_dir);
        result.manifests.push_back(std::move(st.manifests));

        for (size_t r = 0; r < st.models.size(); ++r) {
            std::vector<MetricsReport> reports;
            for (size_t idx : folds[static_cast<size_t>(g)]) {
                const LabelVolume pred = pseudo_label(st.models[r], data[idx].image);
                reports.push_back(evaluate_case(pred, data[idx].labels, data[idx].id));
            }
            CrossvalCell cell;
            cell.group = g + 1;
            cell.round = static_cast<int>(r);
            cell.agg = aggregate(reports);
            result.cells.push_back(std::move(cell));
        }
    }

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        std::ofstream out(out_dir / "crossval.csv");
        if (!out) throw IoError("cannot write crossval table");
        out << crossval_to_csv(result);
    }
    return result;
}

namespace {

void append_cell_value(std::string& row, const MetricEntry& e) {
    char buf[40];
    if (e.defined)
        std::snprintf(buf, sizeof buf, ",%.6g", e.value);
    else
        std::snprintf(buf, sizeof buf, ",nan");
    row += buf;
}

void append_metrics(std::string& row, const MetricsReport& rep) {
    for (Target t : all_targets()) {
        const TargetMetrics& tm = rep.for_target(t);
        append_cell_value(row, tm.dsc);
        append_cell_value(row, tm.hd);
        append_cell_value(row, tm.asd);
    }
}

}  // namespace

std::string crossval_to_csv(const CrossvalResult& result) {
    std::string out =
        "group,round,dsc_humerus,hd_humerus,asd_humerus,dsc_scapula,hd_scapula,asd_scapula,"
        "dsc_both,hd_both,asd_both\n";
    int max_round = 0;
    for (const auto& cell : result.cells) max_round = std::max(max_round, cell.round);

    for (const auto& cell : result.cells) {
        std::string row = "G" + std::to_string(cell.group) + ",R" + std::to_string(cell.round);
        append_metrics(row, cell.agg.mean);
        out += row + "\n";
    }

    // Grand mean per round over group means, defined entries only.
    for (int r = 0; r <= max_round; ++r) {
        MetricsReport mean_rep;
        mean_rep.case_id = "mean";
        for (Target t : all_targets()) {
            for (int m = 0; m < 3; ++m) {
                double sum = 0.0;
                int count = 0;
                for (const auto& cell : result.cells) {
                    if (cell.round != r) continue;
                    const TargetMetrics& tm = cell.agg.mean.for_target(t);
                    const MetricEntry& e = m == 0 ? tm.dsc : (m == 1 ? tm.hd : tm.asd);
                    if (e.defined) {
                        sum += e.value;
                        ++count;
                    }
                }
                MetricEntry& dst = m == 0 ? mean_rep.for_target(t).dsc
                                          : (m == 1 ? mean_rep.for_target(t).hd
                                                    : mean_rep.for_target(t).asd);
                dst.defined = count > 0;
                dst.value = count > 0 ? sum / count : 0.0;
            }
        }
        std::string row = "mean,R" + std::to_string(r);
        append_metrics(row, mean_rep);
        out += row + "\n";
    }
    return out;
}

}  // namespace sseg
