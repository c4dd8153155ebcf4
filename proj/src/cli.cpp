#include "sseg/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include "sseg/checkpoint.hpp"
#include "sseg/config.hpp"
#include "sseg/crossval.hpp"
#include "sseg/error.hpp"
#include "sseg/metrics.hpp"
#include "sseg/phantom.hpp"
#include "sseg/preprocess.hpp"
#include "sseg/report.hpp"
#include "sseg/rng.hpp"
#include "sseg/selftrain.hpp"
#include "sseg/trainer.hpp"
#include "sseg/volume_io.hpp"

namespace sseg {

namespace {

namespace fs = std::filesystem;

struct CommonOpts {
    std::string config_path;
    std::optional<uint64_t> seed;
    std::string out_dir;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool out_required = true) {
    cmd->add_option("--config", opts.config_path, "run configuration file (key = value lines)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", opts.seed, "override the configured global seed");
    auto* out = cmd->add_option("--out", opts.out_dir, "output directory");
    if (out_required) out->required();
}

RunConfig resolve_config(const CommonOpts& opts) {
    RunConfig cfg = opts.config_path.empty() ? RunConfig{} : load_run_config(opts.config_path);
    if (opts.seed) cfg.seed = *opts.seed;
    cfg.train.seed = cfg.seed;
    return cfg;
}

void write_resolved_config(const RunConfig& cfg, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    std::ofstream out(out_dir / "config_resolved.txt");
    if (!out) throw IoError("cannot write resolved config in " + out_dir.string());
    out << serialize_run_config(cfg);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write: " + path.string());
    out << text;
}

Dataset load_dataset(const fs::path& data_path) {
    const fs::path manifest =
        fs::is_directory(data_path) ? data_path / "manifest.csv" : data_path;
    const auto cases = read_benchmark_manifest(manifest);
    if (cases.empty()) throw ConfigError("manifest lists no cases: " + manifest.string());
    Dataset data;
    data.reserve(cases.size());
    for (const auto& c : cases)
        data.push_back({load_scalar_volume(c.image), load_label_volume(c.corrupted), c.case_id, "GT"});
    return data;
}

Dataset load_single_pair(const std::string& image, const std::string& labels) {
    Dataset data;
    data.push_back({load_scalar_volume(image), load_label_volume(labels),
                    fs::path(image).stem().string(), "GT"});
    return data;
}

std::string manifest_csv(const std::vector<std::pair<std::string, std::string>>& rows) {
    std::string out = "case_id,provenance\n";
    for (const auto& [id, prov] : rows) out += id + "," + prov + "\n";
    return out;
}

// ---- subcommand bodies ----

int cmd_phantom_gen(const CommonOpts& opts, int cases_override) {
    RunConfig cfg = resolve_config(opts);
    if (cases_override > 0) cfg.phantom_cases = cases_override;
    PhantomSpec spec = cfg.phantom;
    spec.seed = cfg.seed;
    CorruptionSpec corruption = cfg.corruption;
    corruption.seed = cfg.seed;
    write_resolved_config(cfg, opts.out_dir);
    const auto generated = generate_benchmark(cfg.phantom_cases, spec, corruption, opts.out_dir);
    std::cout << "generated " << generated.size() << " cases in " << opts.out_dir << "\n";
    return 0;
}

int cmd_preprocess(const CommonOpts& opts, const std::vector<std::string>& files) {
    const RunConfig cfg = resolve_config(opts);
    write_resolved_config(cfg, opts.out_dir);
    for (const auto& f : files) {
        const AnyVolume vol = load_volume(f);
        const fs::path out_path = fs::path(opts.out_dir) / fs::path(f).filename();
        if (std::holds_alternative<ScalarVolume>(vol)) {
            store_volume(preprocess_image(std::get<ScalarVolume>(vol), cfg.preprocess_spacing,
                                          cfg.preprocess_dims),
                         out_path);
        } else {
            store_volume(preprocess_labels(std::get<LabelVolume>(vol), cfg.preprocess_spacing,
                                           cfg.preprocess_dims),
                         out_path);
        }
        std::cout << "preprocessed " << f << " -> " << out_path.string() << "\n";
    }
    return 0;
}

int cmd_train(const CommonOpts& opts, const std::string& data_dir, const std::string& image,
              const std::string& labels) {
    const RunConfig cfg = resolve_config(opts);
    const Dataset data = data_dir.empty() ? load_single_pair(image, labels) : load_dataset(data_dir);
    write_resolved_config(cfg, opts.out_dir);

    ModelState model = init_model(cfg.network, cfg.train.seed);
    const TrainLog log = train(model, data, cfg.train);
    model.round = 0;
    save_checkpoint(model, fs::path(opts.out_dir) / "model.ckpt");
    write_text(fs::path(opts.out_dir) / "train_log.csv", train_log_to_csv(log));
    std::vector<std::pair<std::string, std::string>> rows;
    for (const auto& p : data) rows.emplace_back(p.id, p.provenance);
    write_text(fs::path(opts.out_dir) / "manifest.csv", manifest_csv(rows));
    if (!log.entries.empty())
        std::cout << "trained " << log.entries.size() << " epochs, final mean loss "
                  << log.entries.back().mean_loss << "\n";
    return 0;
}

int cmd_selftrain(const CommonOpts& opts, const std::string& data_dir, const std::string& image,
                  const std::string& labels) {
    const RunConfig cfg = resolve_config(opts);
    const Dataset data = data_dir.empty() ? load_single_pair(image, labels) : load_dataset(data_dir);
    write_resolved_config(cfg, opts.out_dir);
    const SelfTrainResult result =
        self_reinforced_train(data, cfg.network, cfg.train, cfg.selftrain, opts.out_dir);
    std::cout << "self-reinforced training finished: " << result.models.size() << " rounds in "
              << opts.out_dir << "\n";
    return 0;
}

int cmd_predict(const CommonOpts& opts, const std::string& model_path,
                const std::vector<std::string>& images, bool write_probs) {
    const RunConfig cfg = resolve_config(opts);
    const ModelState model = load_checkpoint(model_path);
    write_resolved_config(cfg, opts.out_dir);
    for (const auto& img_path : images) {
        const ScalarVolume image = load_scalar_volume(img_path);
        const ProbabilityVolume probs = predict_probabilities(model, image);
        const LabelVolume labels = argmax_labels(probs);
        const std::string stem = fs::path(img_path).stem().string();
        store_volume(labels, fs::path(opts.out_dir) / (stem + "_pred.vol"));
        if (write_probs) {
            const size_t n = probs.probs.voxels();
            for (int c = 0; c < probs.probs.channels; ++c) {
                ScalarVolume ch(probs.geometry);
                const double* src = probs.probs.channel(c);
                for (size_t i = 0; i < n; ++i) ch.data[i] = static_cast<float>(src[i]);
                store_volume(ch, fs::path(opts.out_dir) /
                                     (stem + "_prob" + std::to_string(c) + ".vol"));
            }
        }
        std::cout << "predicted " << img_path << "\n";
    }
    return 0;
}

int cmd_evaluate(const CommonOpts& opts, const std::string& pred_dir, const std::string& truth_dir,
                 int jobs) {
    const RunConfig cfg = resolve_config(opts);
    auto list_volumes = [](const std::string& dir) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(dir))
            if (entry.is_regular_file() && entry.path().extension() == ".vol")
                files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        if (files.empty()) throw ConfigError("no .vol files in " + dir);
        return files;
    };
    // Sorted order pairs the directories; counts must agree.
    const std::vector<fs::path> pred_files = list_volumes(pred_dir);
    const std::vector<fs::path> truth_files = list_volumes(truth_dir);
    if (pred_files.size() != truth_files.size())
        throw ConfigError("prediction/truth counts differ: " + std::to_string(pred_files.size()) +
                          " vs " + std::to_string(truth_files.size()));

    std::vector<MetricsReport> reports(pred_files.size());
    std::atomic<size_t> cursor{0};
    auto worker = [&] {
        while (true) {
            const size_t i = cursor.fetch_add(1);
            if (i >= pred_files.size()) break;
            const LabelVolume pred = load_label_volume(pred_files[i]);
            const LabelVolume truth = load_label_volume(truth_files[i]);
            reports[i] = evaluate_case(pred, truth, pred_files[i].stem().string());
        }
    };
    const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(pred_files.size())));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    write_resolved_config(cfg, opts.out_dir);
    std::string csv = reports_to_csv(reports);
    csv += aggregate_to_csv_row(aggregate(reports));
    write_text(fs::path(opts.out_dir) / "metrics.csv", csv);
    std::cout << "evaluated " << reports.size() << " cases -> "
              << (fs::path(opts.out_dir) / "metrics.csv").string() << "\n";
    return 0;
}

int cmd_crossval(const CommonOpts& opts, const std::string& data_dir) {
    const RunConfig cfg = resolve_config(opts);
    const Dataset data = load_dataset(data_dir);
    write_resolved_config(cfg, opts.out_dir);
    const CrossvalResult result = run_crossval(data, cfg.network, cfg.train, cfg.selftrain,
                                               cfg.crossval_folds, cfg.seed, opts.out_dir);
    std::cout << "cross-validation finished: " << result.cells.size() << " table cells -> "
              << (fs::path(opts.out_dir) / "crossval.csv").string() << "\n";
    return 0;
}

int cmd_report(const std::string& run_dir, const std::string& out_dir) {
    const auto written = write_report(run_dir, out_dir);
    for (const auto& p : written) std::cout << "wrote " << p.string() << "\n";
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"shoulder segmentation pipeline"};
    app.require_subcommand(1);

    // phantom gen
    auto* phantom = app.add_subcommand("phantom", "synthetic benchmark utilities");
    phantom->require_subcommand(1);
    auto* gen = phantom->add_subcommand("gen", "generate a phantom benchmark");
    CommonOpts gen_opts;
    int gen_cases = 0;
    add_common(gen, gen_opts);
    gen->add_option("--cases", gen_cases, "number of cases (overrides config)");

    // preprocess
    auto* pre = app.add_subcommand("preprocess", "resample + crop/pad + normalize volumes");
    CommonOpts pre_opts;
    std::vector<std::string> pre_files;
    add_common(pre, pre_opts);
    pre->add_option("files", pre_files, "volume headers (.vol)")
        ->required()
        ->check(CLI::ExistingFile);

    // train
    auto* tr = app.add_subcommand("train", "supervised training");
    CommonOpts tr_opts;
    std::string tr_data, tr_image, tr_labels;
    add_common(tr, tr_opts);
    tr->add_option("--data", tr_data, "benchmark directory or manifest csv")
        ->check(CLI::ExistingPath);
    tr->add_option("--image", tr_image, "single training image")->check(CLI::ExistingFile);
    tr->add_option("--labels", tr_labels, "labels for --image")->check(CLI::ExistingFile);

    // selftrain
    auto* st = app.add_subcommand("selftrain", "self-reinforced training rounds");
    CommonOpts st_opts;
    std::string st_data, st_image, st_labels;
    add_common(st, st_opts);
    st->add_option("--data", st_data, "benchmark directory or manifest csv")
        ->check(CLI::ExistingPath);
    st->add_option("--image", st_image, "single training image")->check(CLI::ExistingFile);
    st->add_option("--labels", st_labels, "labels for --image")->check(CLI::ExistingFile);

    // predict
    auto* pr = app.add_subcommand("predict", "segment volumes with a trained model");
    CommonOpts pr_opts;
    std::string pr_model;
    std::vector<std::string> pr_images;
    bool pr_probs = false;
    add_common(pr, pr_opts);
    pr->add_option("--model", pr_model, "model checkpoint")->required()->check(CLI::ExistingFile);
    pr->add_option("--image", pr_images, "input volumes")->required()->check(CLI::ExistingFile);
    pr->add_flag("--probs", pr_probs, "also write per-class probability volumes");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "compute DSC/HD/ASD between two label sets");
    CommonOpts ev_opts;
    std::string ev_pred, ev_truth;
    int ev_jobs = 1;
    add_common(ev, ev_opts);
    ev->add_option("--pred", ev_pred, "directory of predicted labels")
        ->required()
        ->check(CLI::ExistingDirectory);
    ev->add_option("--truth", ev_truth, "directory of reference labels")
        ->required()
        ->check(CLI::ExistingDirectory);
    ev->add_option("--jobs", ev_jobs, "parallel workers across cases")
        ->check(CLI::PositiveNumber);

    // crossval
    auto* cv = app.add_subcommand("crossval", "k-fold cross-validation");
    CommonOpts cv_opts;
    std::string cv_data;
    add_common(cv, cv_opts);
    cv->add_option("--data", cv_data, "benchmark directory or manifest csv")
        ->required()
        ->check(CLI::ExistingPath);

    // report
    auto* rp = app.add_subcommand("report", "render CSV outputs to SVG plots/tables");
    std::string rp_run, rp_out;
    rp->add_option("--run", rp_run, "run directory to scan")
        ->required()
        ->check(CLI::ExistingDirectory);
    rp->add_option("--out", rp_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (gen->parsed()) return cmd_phantom_gen(gen_opts, gen_cases);
        if (pre->parsed()) return cmd_preprocess(pre_opts, pre_files);
        if (tr->parsed()) {
            if (tr_data.empty() == (tr_image.empty() || tr_labels.empty()))
                throw UsageError("train needs either --data or both --image and --labels");
            return cmd_train(tr_opts, tr_data, tr_image, tr_labels);
        }
        if (st->parsed()) {
            if (st_data.empty() == (st_image.empty() || st_labels.empty()))
                throw UsageError("selftrain needs either --data or both --image and --labels");
            return cmd_selftrain(st_opts, st_data, st_image, st_labels);
        }
        if (pr->parsed()) return cmd_predict(pr_opts, pr_model, pr_images, pr_probs);
        if (ev->parsed()) return cmd_evaluate(ev_opts, ev_pred, ev_truth, ev_jobs);
        if (cv->parsed()) return cmd_crossval(cv_opts, cv_data);
        if (rp->parsed()) return cmd_report(rp_run, rp_out);
        throw UsageError("no subcommand selected");
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace sseg
