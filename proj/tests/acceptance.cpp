// Acceptance suite: one test case per release criterion. Each case is
// self-contained, uses REQUIRE throughout (a failed assertion aborts the
// case before the final PASS banner prints, which is what the ctest
// pass-regex keys on), and pins its own runtime budget.

#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sseg/checkpoint.hpp"
#include "sseg/cli.hpp"
#include "sseg/crossval.hpp"
#include "sseg/metrics.hpp"
#include "sseg/network.hpp"
#include "sseg/phantom.hpp"
#include "sseg/preprocess.hpp"
#include "sseg/rng.hpp"
#include "sseg/selftrain.hpp"
#include "sseg/trainer.hpp"
#include "sseg/volume.hpp"
#include "sseg/volume_io.hpp"

using namespace sseg;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

fs::path temp_dir(const std::string& tag) {
    auto dir = fs::temp_directory_path() / ("sseg_acceptance_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp_bytes(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

int run_cli_args(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("sseg");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

// All-pairs nearest-surface distances with the same canonical combination
// as the transform's final recompute: wx*dx^2 + (wy*dy^2 + wz*dz^2), sqrt.
std::vector<double> brute_directed(const LabelVolume& from, const LabelVolume& to, Target t) {
    const auto src = surface_voxels(from, t);
    const auto dst = surface_voxels(to, t);
    const Vec3i d = from.geom.dims;
    const Vec3d sp = from.geom.spacing;
    const double wx = sp.x * sp.x, wy = sp.y * sp.y, wz = sp.z * sp.z;
    const size_t plane = static_cast<size_t>(d.x) * d.y;
    std::vector<double> out;
    out.reserve(src.size());
    for (size_t p : src) {
        const int px = static_cast<int>(p % d.x), py = static_cast<int>((p / d.x) % d.y),
                  pz = static_cast<int>(p / plane);
        double best = std::numeric_limits<double>::infinity();
        for (size_t s : dst) {
            const int sx = static_cast<int>(s % d.x), sy = static_cast<int>((s / d.x) % d.y),
                      sz = static_cast<int>(s / plane);
            const double dx = px - sx, dy = py - sy, dz = pz - sz;
            const double sq = wx * (dx * dx) + (wy * (dy * dy) + wz * (dz * dz));
            best = std::min(best, sq);
        }
        out.push_back(std::sqrt(best));
    }
    return out;
}

double brute_hausdorff(const LabelVolume& a, const LabelVolume& b, Target t) {
    const auto ab = brute_directed(a, b, t);
    const auto ba = brute_directed(b, a, t);
    return std::max(*std::max_element(ab.begin(), ab.end()),
                    *std::max_element(ba.begin(), ba.end()));
}

double brute_asd(const LabelVolume& a, const LabelVolume& b, Target t) {
    const auto ab = brute_directed(a, b, t);
    const auto ba = brute_directed(b, a, t);
    double sum = 0.0;
    for (double v : ab) sum += v;
    for (double v : ba) sum += v;
    return sum / static_cast<double>(ab.size() + ba.size());
}

LabelVolume random_mask(Rng& rng, const Vec3i& dims, const Vec3d& spacing) {
    LabelVolume lbl(VolumeGeometry{dims, spacing, {0.0, 0.0, 0.0}});
    const double density = rng.uniform(0.04, 0.45);
    for (auto& v : lbl.data)
        if (rng.bernoulli(density)) v = static_cast<uint8_t>(1 + rng.below(2));
    return lbl;
}

// Set arithmetic for DSC, written out independently of the library kernel
// but with the identical final expression so equality can be exact.
struct DiceOracle {
    double value;
    bool defined;
};

DiceOracle dice_by_counting(const LabelVolume& a, const LabelVolume& b, Target t) {
    auto in_target = [&](uint8_t v) {
        if (t == Target::Humerus) return v == kHumerus;
        if (t == Target::Scapula) return v == kScapula;
        return v != kBackground;
    };
    size_t na = 0, nb = 0, inter = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const bool ia = in_target(a.data[i]), ib = in_target(b.data[i]);
        na += ia;
        nb += ib;
        inter += (ia && ib);
    }
    if (na == 0 && nb == 0) return {1.0, false};
    if (na == 0 || nb == 0) return {0.0, true};
    return {2.0 * static_cast<double>(inter) / static_cast<double>(na + nb), true};
}

// Small phantom variant whose shape ranges fit a 16^3 grid; used where a
// full-size case would be wasteful (fold-protocol audits).
PhantomSpec tiny_phantom_spec(uint64_t seed) {
    PhantomSpec spec;
    spec.geometry = VolumeGeometry{{16, 16, 16}, {1.0, 1.0, 1.0}, {0.0, 0.0, 0.0}};
    spec.head_radius = {3.0, 3.5};
    spec.shaft_radius = {1.5, 2.0};
    spec.shaft_length = {4.0, 5.0};
    spec.head_cx = {0.30, 0.35};
    spec.plate_x = {0.60, 0.64};
    spec.spine_length = {1.5, 2.0};
    spec.spine_radius = {1.2, 1.5};
    spec.seed = seed;
    return spec;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

TEST_CASE("c01 metric oracle equivalence") {
    const auto t0 = Clock::now();
    Rng rng(20250101);
    const Target cycle[3] = {Target::Humerus, Target::Scapula, Target::Both};

    int compared = 0, attempts = 0;
    double max_asd_err = 0.0;
    while (compared < 200) {
        REQUIRE(++attempts < 20000);
        const Vec3i dims{2 + static_cast<int>(rng.below(15)), 2 + static_cast<int>(rng.below(15)),
                         2 + static_cast<int>(rng.below(15))};
        const Vec3d spacing{rng.uniform(0.3, 3.0), rng.uniform(0.3, 3.0), rng.uniform(0.3, 3.0)};
        const auto a = random_mask(rng, dims, spacing);
        const auto b = random_mask(rng, dims, spacing);

        // DSC must match plain set arithmetic on every target, including the
        // empty-mask conventions.
        for (Target t : cycle) {
            const auto expect = dice_by_counting(a, b, t);
            const auto got = dice(a, b, t);
            REQUIRE(got.defined == expect.defined);
            REQUIRE(got.value == expect.value);  // exact
        }

        // Surface distances need a non-empty surface on both sides.
        const Target t = cycle[compared % 3];
        if (surface_voxels(a, t).empty() || surface_voxels(b, t).empty()) continue;

        REQUIRE(hausdorff(a, b, t) == brute_hausdorff(a, b, t));  // bitwise
        const double asd_err = std::abs(asd(a, b, t) - brute_asd(a, b, t));
        max_asd_err = std::max(max_asd_err, asd_err);
        REQUIRE(asd_err <= 1e-9);
        ++compared;
    }

    const double elapsed = seconds_since(t0);
    REQUIRE(elapsed < 60.0);
    std::printf("ACCEPTANCE c01 PASS: 200 random pairs, HD bitwise-equal to brute force, "
                "max ASD err %.3e, DSC exact, %.1fs\n",
                max_asd_err, elapsed);
}

TEST_CASE("c02 loss correctness") {
    // Uniform prediction over 100 voxels: exactly 100 * ln 3.
    {
        const Vec3i dims{5, 5, 4};
        Tensor probs(3, dims);
        std::fill(probs.data.begin(), probs.data.end(), 1.0 / 3.0);
        LabelVolume labels(VolumeGeometry{dims, {1.0, 1.0, 1.0}, {0.0, 0.0, 0.0}});
        Rng rng(2);
        for (auto& v : labels.data) v = static_cast<uint8_t>(rng.below(3));
        const double loss = cross_entropy_sum(probs, labels);
        REQUIRE(std::abs(loss - 100.0 * std::log(3.0)) <= 1e-6);
    }

    // Random softmax outputs against a naive double loop, clamp included.
    Rng rng(77);
    double max_err = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const Vec3i dims{1 + static_cast<int>(rng.below(6)), 1 + static_cast<int>(rng.below(6)),
                         1 + static_cast<int>(rng.below(6))};
        const int classes = 2 + static_cast<int>(rng.below(3));
        Tensor logits(classes, dims);
        for (auto& v : logits.data) v = rng.uniform(-8.0, 8.0);
        LabelVolume labels(VolumeGeometry{dims, {1.0, 1.0, 1.0}, {0.0, 0.0, 0.0}});
        for (auto& v : labels.data) v = static_cast<uint8_t>(rng.below(classes));

        const Tensor probs = softmax(logits);
        double naive = 0.0;
        for (size_t i = 0; i < probs.voxels(); ++i) {
            double p = probs.data[static_cast<size_t>(labels.data[i]) * probs.voxels() + i];
            naive -= std::log(std::max(p, kProbClamp));
        }
        const double err = std::abs(cross_entropy_sum(probs, labels) - naive);
        max_err = std::max(max_err, err);
        REQUIRE(err <= 1e-9);
    }
    std::printf("ACCEPTANCE c02 PASS: uniform loss == 100*ln3 within 1e-6, "
                "20 random cases vs naive loop max err %.3e\n",
                max_err);
}

TEST_CASE("c03 gradient check") {
    const auto t0 = Clock::now();
    NetworkConfig cfg;
    cfg.num_classes = 3;
    cfg.base_channels = 1;

    const Vec3i dims{8, 8, 8};
    Rng data_rng(555);
    ScalarVolume image(VolumeGeometry{dims, {1.0, 1.0, 1.0}, {0.0, 0.0, 0.0}});
    for (auto& v : image.data) v = static_cast<float>(data_rng.uniform(0.0, 1.0));
    LabelVolume labels(image.geom);
    for (auto& v : labels.data) v = static_cast<uint8_t>(data_rng.below(3));
    const Tensor input = image_to_tensor(image);

    auto loss_of = [&](const ModelState& m) {
        const Tensor logits = forward(m, input, /*train=*/true, nullptr);
        return cross_entropy_sum(softmax(logits), labels);
    };

    double max_rel = 0.0;
    size_t checked = 0;
    for (int draw = 0; draw < 5; ++draw) {
        ModelState model = init_model(cfg, 100 + static_cast<uint64_t>(draw));
        Rng jitter(9000 + static_cast<uint64_t>(draw));
        for (auto& view : param_views(model.params)) {
            if (!view.learnable) continue;
            for (auto& v : *view.values) v += jitter.uniform(-0.1, 0.1);
        }

        // Analytic gradient through the full training-mode pipeline.
        ForwardTrace trace;
        const Tensor logits = forward(model, input, true, &trace);
        const Tensor probs = softmax(logits);
        const Tensor dlogits = cross_entropy_backward(probs, labels);
        ModelParams grad = make_params(cfg);
        zero_params(grad);
        backward(model, trace, dlogits, grad);

        auto grad_views = param_views(grad);
        auto model_views = param_views(model.params);
        REQUIRE(grad_views.size() == model_views.size());

        for (size_t vi = 0; vi < model_views.size(); ++vi) {
            if (!model_views[vi].learnable) continue;
            auto& vals = *model_views[vi].values;
            const auto& g = *grad_views[vi].values;
            REQUIRE(g.size() == vals.size());
            for (size_t i = 0; i < vals.size(); ++i) {
                const double orig = vals[i];
                const double h = 1e-5 * std::max(1.0, std::abs(orig));
                vals[i] = orig + h;
                const double lp = loss_of(model);
                vals[i] = orig - h;
                const double lm = loss_of(model);
                vals[i] = orig;
                const double fd = (lp - lm) / (2.0 * h);
                const double rel =
                    std::abs(g[i] - fd) / std::max({1.0, std::abs(g[i]), std::abs(fd)});
                max_rel = std::max(max_rel, rel);
                REQUIRE(rel < 1e-3);
                ++checked;
            }
        }
    }
    REQUIRE(checked == 5 * count_learnable(make_params(cfg)));

    const double elapsed = seconds_since(t0);
    REQUIRE(elapsed < 300.0);
    std::printf("ACCEPTANCE c03 PASS: %zu finite-difference checks over 5 draws, "
                "max rel err %.3e, %.1fs\n",
                checked, max_rel, elapsed);
}

TEST_CASE("c04 shape and normalization") {
    Rng rng(4242);
    double max_dev = 0.0;
    for (int trial = 0; trial < 8; ++trial) {
        const Vec3i dims{4 * (1 + static_cast<int>(rng.below(5))),
                         4 * (1 + static_cast<int>(rng.below(5))),
                         4 * (1 + static_cast<int>(rng.below(3)))};
        const Vec3d spacing{rng.uniform(0.4, 2.5), rng.uniform(0.4, 2.5), rng.uniform(0.4, 2.5)};
        const Vec3d origin{rng.uniform(-20.0, 20.0), rng.uniform(-20.0, 20.0),
                           rng.uniform(-20.0, 20.0)};
        NetworkConfig cfg;
        cfg.num_classes = 2 + static_cast<int>(rng.below(3));
        cfg.base_channels = 1 + static_cast<int>(rng.below(2));
        const ModelState model = init_model(cfg, 8800 + static_cast<uint64_t>(trial));

        ScalarVolume image(VolumeGeometry{dims, spacing, origin});
        for (auto& v : image.data) v = static_cast<float>(rng.uniform(-1.0, 2.0));

        // Eval path: geometry must ride through unchanged.
        const ProbabilityVolume pv = predict_probabilities(model, image);
        REQUIRE(pv.geometry == image.geom);
        REQUIRE(pv.probs.channels == cfg.num_classes);
        REQUIRE(pv.probs.dims == dims);
        for (size_t i = 0; i < pv.probs.voxels(); ++i) {
            double s = 0.0;
            for (int c = 0; c < pv.probs.channels; ++c)
                s += pv.probs.data[static_cast<size_t>(c) * pv.probs.voxels() + i];
            max_dev = std::max(max_dev, std::abs(s - 1.0));
        }

        // Training path has the same contract.
        const Tensor logits = forward(model, image_to_tensor(image), true, nullptr);
        REQUIRE(logits.channels == cfg.num_classes);
        REQUIRE(logits.dims == dims);
        const Tensor probs = softmax(logits);
        for (size_t i = 0; i < probs.voxels(); ++i) {
            double s = 0.0;
            for (int c = 0; c < probs.channels; ++c)
                s += probs.data[static_cast<size_t>(c) * probs.voxels() + i];
            max_dev = std::max(max_dev, std::abs(s - 1.0));
        }
    }
    REQUIRE(max_dev <= 1e-5);

    // Axis not divisible by four is a structured shape error.
    NetworkConfig cfg;
    cfg.base_channels = 1;
    const ModelState model = init_model(cfg, 1);
    ScalarVolume bad(VolumeGeometry{{6, 8, 8}, {1.0, 1.0, 1.0}, {0.0, 0.0, 0.0}});
    REQUIRE_THROWS_AS(predict_probabilities(model, bad), ShapeError);

    std::printf("ACCEPTANCE c04 PASS: 8 randomized geometries, both modes, "
                "max |sum(p) - 1| = %.3e\n",
                max_dev);
}

TEST_CASE("c05 overfit sanity") {
    const auto t0 = Clock::now();
    PhantomSpec spec;  // protocol default 48x48x32 at 1 mm
    spec.seed = 7;
    auto [image, labels] = generate_phantom(spec);

    NetworkConfig net;  // protocol default width
    ModelState model = init_model(net, 7);

    TrainConfig tc;
    tc.epochs = 200;
    tc.seed = 7;
    const TrainLog log = train(model, {{image, labels, "case0"}}, tc);
    REQUIRE(log.entries.size() == 200);

    // The very first logged loss is the untrained uniform prediction.
    REQUIRE(std::abs(log.entries[0].mean_loss - std::log(3.0)) <= 1e-12);
    for (int e = 0; e + 1 < 5; ++e)
        REQUIRE(log.entries[e + 1].mean_loss < log.entries[e].mean_loss);

    const LabelVolume pred = pseudo_label(model, image);
    const MetricEntry fg = dice(pred, labels, Target::Both);
    REQUIRE(fg.defined);
    REQUIRE(fg.value >= 0.95);

    const double elapsed = seconds_since(t0);
    REQUIRE(elapsed < 900.0);
    std::printf("ACCEPTANCE c05 PASS: foreground DSC %.4f after 200 epochs, "
                "loss strictly decreasing over first 5 epochs, %.0fs\n",
                fg.value, elapsed);
}

TEST_CASE("c06 self-reinforced improvement") {
    const auto t0 = Clock::now();
    const uint64_t seeds[3] = {101, 202, 303};

    std::vector<double> r0_scap, r2_scap, r0_hum, r2_hum;
    for (uint64_t seed : seeds) {
        // Benchmark geometry: default 48x48x32 grid with enlarged analogues
        // so round-0 training escapes the background-prior plateau inside
        // the wall-clock budget at this network width.
        PhantomSpec spec;
        spec.seed = seed;
        spec.head_radius = {7.5, 8.5};
        spec.shaft_radius = {3.0, 4.0};
        spec.shaft_length = {10.0, 14.0};
        spec.plate_thickness = {3.5, 4.5};
        spec.plate_y_lo = {0.14, 0.20};
        spec.plate_y_hi = {0.80, 0.88};
        spec.plate_z_lo = {0.12, 0.18};
        spec.plate_z_hi = {0.80, 0.88};
        spec.spine_radius = {2.2, 3.0};
        spec.spine_length = {5.0, 8.0};
        CorruptionSpec corr;
        corr.severity = 0.5;
        corr.seed = seed;
        const auto dir = temp_dir("c06_" + std::to_string(seed));
        const auto cases = generate_benchmark(20, spec, corr, dir);
        REQUIRE(cases.size() == 20);

        Dataset gt;
        std::vector<LabelVolume> clean;
        for (const auto& c : cases) {
            gt.push_back({load_scalar_volume(c.image), load_label_volume(c.corrupted), c.case_id});
            clean.push_back(load_label_volume(c.clean));
        }

        NetworkConfig net;
        net.base_channels = 8;
        TrainConfig tc;
        tc.epochs = 30;
        tc.lr0 = 0.003;
        tc.seed = seed;
        RoundPlan plan;
        plan.rounds = 2;
        plan.augment_copies = 0;
        plan.keep_original_gt = true;
        plan.warm_start = true;

        const SelfTrainResult result = self_reinforced_train(gt, net, tc, plan);
        REQUIRE(result.models.size() == 3);

        auto mean_dsc = [&](const ModelState& m, Target t) {
            std::vector<double> vals;
            for (size_t i = 0; i < gt.size(); ++i) {
                const LabelVolume pred = pseudo_label(m, gt[i].image);
                const MetricEntry d = dice(pred, clean[i], t);
                REQUIRE(d.defined);
                vals.push_back(d.value);
            }
            return mean_of(vals);
        };
        r0_scap.push_back(mean_dsc(result.models[0], Target::Scapula));
        r2_scap.push_back(mean_dsc(result.models[2], Target::Scapula));
        r0_hum.push_back(mean_dsc(result.models[0], Target::Humerus));
        r2_hum.push_back(mean_dsc(result.models[2], Target::Humerus));
        fs::remove_all(dir);
    }

    const double scap0 = mean_of(r0_scap), scap2 = mean_of(r2_scap);
    const double hum0 = mean_of(r0_hum), hum2 = mean_of(r2_hum);
    REQUIRE(scap2 - scap0 >= 0.01);
    REQUIRE(hum2 >= hum0 - 0.005);

    const double elapsed = seconds_since(t0);
    REQUIRE(elapsed < 7200.0);
    std::printf("ACCEPTANCE c06 PASS: scapula DSC %.4f -> %.4f (+%.4f), "
                "humerus %.4f -> %.4f, 3 seeds x 20 cases, %.0fs\n",
                scap0, scap2, scap2 - scap0, hum0, hum2, elapsed);
}

TEST_CASE("c07 round-0 degeneracy") {
    const auto dir = temp_dir("c07");
    const auto bench = dir / "bench";
    const auto cfg_path = dir / "run.cfg";
    const auto cfg0_path = dir / "run0.cfg";
    {
        std::ofstream cfg(cfg_path);
        cfg << "seed = 5\ntrain.epochs = 2\nnetwork.base_channels = 2\n"
               "corruption.severity = 0.5\n";
    }
    {
        std::ofstream cfg(cfg0_path);
        cfg << "seed = 5\ntrain.epochs = 2\nnetwork.base_channels = 2\n"
               "corruption.severity = 0.5\nselftrain.rounds = 0\n";
    }
    REQUIRE(run_cli_args({"phantom", "gen", "--cases", "3", "--out", bench.string(), "--config",
                          cfg_path.string()}) == 0);
    REQUIRE(run_cli_args({"train", "--data", bench.string(), "--out", (dir / "plain").string(),
                          "--config", cfg_path.string()}) == 0);
    REQUIRE(run_cli_args({"selftrain", "--data", bench.string(), "--out", (dir / "self").string(),
                          "--config", cfg0_path.string()}) == 0);

    // Same seed, zero extra rounds: artifacts must agree byte for byte.
    const std::string plain_ckpt = slurp_bytes(dir / "plain" / "model.ckpt");
    const std::string self_ckpt = slurp_bytes(dir / "self" / "model_r0.ckpt");
    REQUIRE(plain_ckpt.size() > 0);
    REQUIRE(plain_ckpt == self_ckpt);
    REQUIRE(slurp_bytes(dir / "plain" / "train_log.csv") ==
            slurp_bytes(dir / "self" / "train_log_r0.csv"));
    REQUIRE_FALSE(fs::exists(dir / "self" / "model_r1.ckpt"));

    // The in-memory API degenerates the same way.
    Dataset gt;
    for (int i = 0; i < 2; ++i) {
        auto spec = tiny_phantom_spec(40 + static_cast<uint64_t>(i));
        auto [img, lbl] = generate_phantom(spec);
        gt.push_back({img, lbl, "case" + std::to_string(i)});
    }
    NetworkConfig net;
    net.base_channels = 2;
    TrainConfig tc;
    tc.epochs = 3;
    tc.seed = 11;
    RoundPlan plan;
    plan.rounds = 0;
    ModelState direct = init_model(net, tc.seed);
    const TrainLog direct_log = train(direct, gt, tc);
    SelfTrainResult st = self_reinforced_train(gt, net, tc, plan);
    REQUIRE(st.models.size() == 1);
    auto a_views = param_views(st.models[0].params);
    ModelParams direct_params = direct.params;
    auto b_views = param_views(direct_params);
    for (size_t i = 0; i < a_views.size(); ++i) REQUIRE(*a_views[i].values == *b_views[i].values);
    REQUIRE(train_log_to_csv(st.logs[0]) == train_log_to_csv(direct_log));

    fs::remove_all(dir);
    std::printf("ACCEPTANCE c07 PASS: zero-round self-training reproduces plain training "
                "byte-for-byte (checkpoint and log)\n");
}

TEST_CASE("c08 cross-validation protocol") {
    // Fold shape at the protocol size: 50 cases, 5 folds of exactly 10.
    for (uint64_t seed : {0ULL, 1ULL, 42ULL}) {
        const FoldPlan plan = split_kfold(50, 5, seed);
        REQUIRE(plan.assignment.size() == 50);
        const auto members = plan.members();
        REQUIRE(members.size() == 5);
        std::set<size_t> seen;
        for (const auto& fold : members) {
            REQUIRE(fold.size() == 10);
            for (size_t idx : fold) {
                REQUIRE(idx < 50);
                REQUIRE(seen.insert(idx).second);  // disjoint
            }
        }
        REQUIRE(seen.size() == 50);  // covering
    }

    // Leakage audit on a real cross-validation run with augmentation.
    Dataset data;
    for (int i = 0; i < 6; ++i) {
        auto spec = tiny_phantom_spec(300 + static_cast<uint64_t>(i));
        auto [img, lbl] = generate_phantom(spec);
        data.push_back({img, lbl, "case" + std::to_string(i)});
    }
    NetworkConfig net;
    net.base_channels = 1;
    TrainConfig tc;
    tc.epochs = 1;
    tc.seed = 9;
    RoundPlan plan;
    plan.rounds = 2;
    plan.augment_copies = 2;
    const auto dir = temp_dir("c08");
    const CrossvalResult cv = run_crossval(data, net, tc, plan, 3, 13, dir);

    const auto members = cv.folds.members();
    size_t audited = 0;
    for (size_t g = 0; g < members.size(); ++g) {
        std::set<std::string> held_out;
        for (size_t idx : members[g]) held_out.insert(data[idx].id);

        // In-memory manifests: every trained id must trace to a training-fold
        // case, never to a held-out one.
        for (const auto& round_manifest : cv.manifests[g]) {
            REQUIRE_FALSE(round_manifest.empty());
            for (const auto& [id, provenance] : round_manifest) {
                REQUIRE(held_out.count(base_case_id(id)) == 0);
                ++audited;
            }
        }

        // The same audit against the manifests on disk.
        for (int r = 0; r <= plan.rounds; ++r) {
            const auto path =
                dir / ("group" + std::to_string(g + 1)) / ("manifest_r" + std::to_string(r) + ".csv");
            std::ifstream f(path);
            REQUIRE(f.good());
            std::string line;
            REQUIRE(std::getline(f, line));
            REQUIRE(line == "case_id,provenance");
            while (std::getline(f, line)) {
                if (line.empty()) continue;
                const auto comma = line.find(',');
                REQUIRE(comma != std::string::npos);
                REQUIRE(held_out.count(base_case_id(line.substr(0, comma))) == 0);
            }
        }
    }
    REQUIRE(audited > 0);

    fs::remove_all(dir);
    std::printf("ACCEPTANCE c08 PASS: 50/5 folds disjoint, covering, size 10 across seeds; "
                "%zu manifest entries audited with no held-out leakage\n",
                audited);
}

TEST_CASE("c09 preprocessing") {
    PhantomSpec spec;
    spec.geometry = VolumeGeometry{{64, 60, 40}, {0.9, 1.1, 2.0}, {-5.0, 3.0, 10.0}};
    spec.seed = 31;
    auto [image, labels] = generate_phantom(spec);

    const Vec3d unit{1.0, 1.0, 1.0};
    const Vec3i target{144, 144, 80};
    const ScalarVolume pp = preprocess_image(image, unit, target);
    REQUIRE(pp.geom.dims == target);
    REQUIRE(pp.geom.spacing == unit);
    const auto [mn, mx] = std::minmax_element(pp.data.begin(), pp.data.end());
    REQUIRE(*mn == 0.0f);
    REQUIRE(*mx == 1.0f);

    const LabelVolume pl = preprocess_labels(labels, unit, target);
    REQUIRE(pl.geom.dims == target);
    REQUIRE(pl.geom.spacing == unit);
    for (uint8_t v : pl.data) REQUIRE(v <= kScapula);

    // Preprocessing an already-preprocessed volume is a bit-exact identity,
    // and so is a plain identity resample.
    const ScalarVolume again = preprocess_image(pp, unit, target);
    REQUIRE(again.geom == pp.geom);
    REQUIRE(std::memcmp(again.data.data(), pp.data.data(), pp.data.size() * sizeof(float)) == 0);
    const ScalarVolume resampled = resample_trilinear(pp, pp.geom);
    REQUIRE(std::memcmp(resampled.data.data(), pp.data.data(), pp.data.size() * sizeof(float)) ==
            0);

    // File round-trip preserves every byte of the payload and the geometry.
    const auto dir = temp_dir("c09");
    store_volume(pp, dir / "pp.vol");
    const ScalarVolume loaded = load_scalar_volume(dir / "pp.vol");
    REQUIRE(loaded.geom == pp.geom);
    REQUIRE(std::memcmp(loaded.data.data(), pp.data.data(), pp.data.size() * sizeof(float)) == 0);
    store_volume(pl, dir / "pl.vol");
    const LabelVolume lloaded = load_label_volume(dir / "pl.vol");
    REQUIRE(lloaded.geom == pl.geom);
    REQUIRE(lloaded.data == pl.data);

    fs::remove_all(dir);
    std::printf("ACCEPTANCE c09 PASS: output 144x144x80 at 1mm in [0,1]; "
                "re-preprocess, identity resample and file round-trip all bit-exact\n");
}

TEST_CASE("c10 metric edge policy") {
    // Empty vs empty: DSC 1.0 but flagged undefined; surface metrics undefined.
    LabelVolume ea(VolumeGeometry{{8, 8, 8}, {1.0, 1.0, 1.0}, {0.0, 0.0, 0.0}});
    LabelVolume eb = ea;
    const MetricsReport rep = evaluate_case(ea, eb, "empty");
    for (Target t : all_targets()) {
        const auto& tm = rep.for_target(t);
        REQUIRE(tm.dsc.value == 1.0);
        REQUIRE_FALSE(tm.dsc.defined);
        REQUIRE_FALSE(tm.hd.defined);
        REQUIRE_FALSE(tm.asd.defined);
    }
    const std::string csv = reports_to_csv({rep});
    REQUIRE(csv.find("empty,humerus,1,nan,nan,none") != std::string::npos);

    // Uniform spacing scale: HD and ASD scale linearly, DSC is invariant.
    Rng rng(1414);
    int compared = 0, attempts = 0;
    double max_rel = 0.0;
    while (compared < 25) {
        REQUIRE(++attempts < 4000);
        const Vec3i dims{3 + static_cast<int>(rng.below(10)), 3 + static_cast<int>(rng.below(10)),
                         3 + static_cast<int>(rng.below(10))};
        const Vec3d sp{rng.uniform(0.4, 2.0), rng.uniform(0.4, 2.0), rng.uniform(0.4, 2.0)};
        const double s = rng.uniform(0.3, 3.5);
        auto a = random_mask(rng, dims, sp);
        auto b = random_mask(rng, dims, sp);
        const Target t = Target::Both;
        if (surface_voxels(a, t).empty() || surface_voxels(b, t).empty()) continue;

        auto sa = a, sb = b;
        sa.geom.spacing = {sp.x * s, sp.y * s, sp.z * s};
        sb.geom.spacing = sa.geom.spacing;

        const double hd1 = hausdorff(a, b, t), hds = hausdorff(sa, sb, t);
        const double asd1 = asd(a, b, t), asds = asd(sa, sb, t);
        max_rel = std::max(max_rel, std::abs(hds - s * hd1) / (s * hd1));
        max_rel = std::max(max_rel, std::abs(asds - s * asd1) / (s * asd1));
        REQUIRE(std::abs(hds - s * hd1) <= 1e-12 * s * hd1);
        REQUIRE(std::abs(asds - s * asd1) <= 1e-12 * s * asd1);
        REQUIRE(dice(sa, sb, t).value == dice(a, b, t).value);
        ++compared;
    }

    std::printf("ACCEPTANCE c10 PASS: empty-vs-empty DSC 1.0 flagged undefined; "
                "25 scale trials, max covariance rel err %.3e\n",
                max_rel);
}
