#include "sseg/selftrain.hpp"

#include <fstream>

#include "sseg/augment.hpp"
#include "sseg/checkpoint.hpp"
#include "sseg/error.hpp"
#include "sseg/rng.hpp"

namespace sseg {

namespace {

constexpr uint64_t kExtendStream = 0x65787464u;  // per-round set extension
constexpr uint64_t kRoundStream = 0x726f756eu;   // per-round training seed
constexpr uint64_t kInitStream = 0x696e6974u;    // fresh-init round weights
constexpr uint64_t kFieldStream = 0x6669656cu;   // per-copy distortion field
constexpr uint64_t kFlipStream = 0x666c6970u;    // per-copy flip decisions

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw IoError("failed writing: " + path.string());
}

}  // namespace

void RoundPlan::validate() const {
    if (rounds < 0) throw ConfigError("rounds must be >= 0");
    if (augment_copies < 0) throw ConfigError("augment_copies must be >= 0");
    if (distortion_sigma < 0.0) throw ConfigError("distortion magnitude must be >= 0");
    if (distortion_spacing <= 0.0) throw ConfigError("control spacing must be > 0");
    if (flip_axes < 0 || flip_axes > 7) throw ConfigError("flip_axes must be a 3-bit mask");
}

LabelVolume pseudo_label(const ModelState& model, const ScalarVolume& vol) {
    return argmax_labels(predict_probabilities(model, vol));
}

Dataset extend_dataset(const Dataset& sources, const ModelState& model, const RoundPlan& plan,
                       uint64_t seed) {
    plan.validate();
    if (sources.empty()) throw ConfigError("extend_dataset: empty dataset");
    Dataset out;
    out.reserve(sources.size() * (2 + static_cast<size_t>(plan.augment_copies)));
    for (size_t i = 0; i < sources.size(); ++i) {
        const TrainingPair& src = sources[i];
        if (plan.keep_original_gt) out.push_back(src);
        LabelVolume pseudo = pseudo_label(model, src.image);
        out.push_back({src.image, pseudo, src.id + "#pseudo", "pseudo"});
        const uint64_t image_seed = derive_seed(seed, i);
        for (int j = 0; j < plan.augment_copies; ++j) {
            const DistortionField field =
                sample_distortion(src.image.geom, plan.distortion_sigma, plan.distortion_spacing,
                                  derive_seed(image_seed, kFieldStream, static_cast<uint64_t>(j)));
            ScalarVolume img = warp(src.image, field);
            LabelVolume lbl = warp(pseudo, field);
            if (plan.flip_axes != 0) {
                auto pair = random_flip(img, lbl, plan.flip_axes,
                                        derive_seed(image_seed, kFlipStream, static_cast<uint64_t>(j)));
                img = std::move(pair.first);
                lbl = std::move(pair.second);
            }
            out.push_back({std::move(img), std::move(lbl),
                           src.id + "#aug" + std::to_string(j), "augmented"});
        }
    }
    return out;
}

SelfTrainResult self_reinforced_train(const Dataset& gt, const NetworkConfig& net_cfg,
                                      const TrainConfig& train_cfg, const RoundPlan& plan,
                                      const std::filesystem::path& out_dir) {
    plan.validate();
    train_cfg.validate();
    SelfTrainResult result;

    auto manifest_of = [](const Dataset& d) {
        std::vector<std::pair<std::string, std::string>> rows;
        rows.reserve(d.size());
        for (const auto& p : d) rows.emplace_back(p.id, p.provenance);
        return rows;
    };
    auto emit_round = [&](int r, const ModelState& model, const TrainLog& log,
                          const std::vector<std::pair<std::string, std::string>>& manifest) {
        if (out_dir.empty()) return;
        std::filesystem::create_directories(out_dir);
        const std::string tag = "_r" + std::to_string(r);
        save_checkpoint(model, out_dir / ("model" + tag + ".ckpt"));
        std::string csv = "case_id,provenance\n";
        for (const auto& [id, prov] : manifest) csv += id + "," + prov + "\n";
        write_text_file(out_dir / ("manifest" + tag + ".csv"), csv);
        write_text_file(out_dir / ("train_log" + tag + ".csv"), train_log_to_csv(log));
    };

    // Round 0: plain supervised training on the GT pairs, same seed usage as
    // a direct train() call.
    ModelState model = init_model(net_cfg, train_cfg.seed);
    TrainLog log0 = train(model, gt, train_cfg);
    model.round = 0;
    result.manifests.push_back(manifest_of(gt));
    emit_round(0, model, log0, result.manifests.back());
    result.models.push_back(model);
    result.logs.push_back(std::move(log0));

    for (int r = 1; r <= plan.rounds; ++r) {
        const Dataset extended =
            extend_dataset(gt, result.models.back(), plan,
                           derive_seed(train_cfg.seed, kExtendStream, static_cast<uint64_t>(r)));
        ModelState next =
            plan.warm_start
                ? result.models.back()
                : init_model(net_cfg, derive_seed(train_cfg.seed, kInitStream, static_cast<uint64_t>(r)));
        TrainConfig round_cfg = train_cfg;
        round_cfg.seed = derive_seed(train_cfg.seed, kRoundStream, static_cast<uint64_t>(r));
        TrainLog log = train(next, extended, round_cfg);
        next.round = r;
        result.manifests.push_back(manifest_of(extended));
        emit_round(r, next, log, result.manifests.back());
        result.models.push_back(std::move(next));
        result.logs.push_back(std::move(log));
    }
    return result;
}

}  // namespace sseg
