#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <utility>

#include "sseg/checkpoint.hpp"
#include "sseg/crossval.hpp"
#include "sseg/metrics.hpp"
#include "sseg/network.hpp"
#include "sseg/phantom.hpp"
#include "sseg/preprocess.hpp"
#include "sseg/selftrain.hpp"
#include "sseg/trainer.hpp"
#include "sseg/volume.hpp"

namespace py = pybind11;
using namespace sseg;

namespace {

// Arrays are exchanged as C-order (nz, ny, nx); with x fastest in memory the
// buffer layout matches Volume exactly.
template <typename T>
Volume<T> volume_from_array(const py::array_t<T, py::array::c_style | py::array::forcecast>& arr,
                            const Vec3d& spacing) {
    if (arr.ndim() != 3) throw ShapeError("expected a 3d array");
    VolumeGeometry g;
    g.dims = {static_cast<int>(arr.shape(2)), static_cast<int>(arr.shape(1)),
              static_cast<int>(arr.shape(0))};
    g.spacing = spacing;
    Volume<T> vol(g);
    std::memcpy(vol.data.data(), arr.data(), sizeof(T) * vol.data.size());
    return vol;
}

template <typename T>
py::array_t<T> array_from_volume(const Volume<T>& vol) {
    py::array_t<T> arr({vol.geom.dims.z, vol.geom.dims.y, vol.geom.dims.x});
    std::memcpy(arr.mutable_data(), vol.data.data(), sizeof(T) * vol.data.size());
    return arr;
}

Vec3d to_spacing(const std::array<double, 3>& s) { return {s[0], s[1], s[2]}; }

py::dict entry_dict(const MetricEntry& e) {
    py::dict d;
    d["value"] = e.value;
    d["defined"] = e.defined;
    return d;
}

py::dict target_dict(const TargetMetrics& m) {
    py::dict d;
    d["dsc"] = entry_dict(m.dsc);
    d["hd"] = entry_dict(m.hd);
    d["asd"] = entry_dict(m.asd);
    return d;
}

Dataset make_dataset(const std::vector<py::array_t<float>>& images,
                     const std::vector<py::array_t<uint8_t>>& labels,
                     const std::array<double, 3>& spacing) {
    if (images.size() != labels.size()) throw ShapeError("images and labels differ in count");
    Dataset data;
    for (size_t i = 0; i < images.size(); ++i) {
        TrainingPair p;
        p.image = volume_from_array<float>(images[i], to_spacing(spacing));
        p.labels = volume_from_array<uint8_t>(labels[i], to_spacing(spacing));
        p.id = "case" + std::to_string(i);
        data.push_back(std::move(p));
    }
    return data;
}

py::list log_to_list(const TrainLog& log) {
    py::list out;
    for (const auto& e : log.entries) out.append(py::make_tuple(e.epoch, e.lr, e.mean_loss));
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "shoulder segmentation core";

    py::register_exception<Error>(m, "SsegError");

    m.def(
        "generate_phantom",
        [](std::array<int, 3> dims, std::array<double, 3> spacing, uint64_t seed) {
            PhantomSpec spec;
            spec.geometry.dims = {dims[0], dims[1], dims[2]};
            spec.geometry.spacing = to_spacing(spacing);
            spec.seed = seed;
            auto [image, labels] = generate_phantom(spec);
            return py::make_tuple(array_from_volume(image), array_from_volume(labels));
        },
        py::arg("dims") = std::array<int, 3>{48, 48, 32},
        py::arg("spacing") = std::array<double, 3>{1.0, 1.0, 1.0}, py::arg("seed") = 0,
        "Synthesize one phantom; returns (image, labels) as (nz, ny, nx) arrays.");

    m.def(
        "corrupt_labels",
        [](const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& labels,
           std::array<double, 3> spacing, double severity, uint64_t seed) {
            CorruptionSpec spec;
            spec.severity = severity;
            spec.seed = seed;
            return array_from_volume(
                corrupt_labels(volume_from_array<uint8_t>(labels, to_spacing(spacing)), spec));
        },
        py::arg("labels"), py::arg("spacing") = std::array<double, 3>{1.0, 1.0, 1.0},
        py::arg("severity") = 0.5, py::arg("seed") = 0);

    m.def(
        "evaluate",
        [](const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& pred,
           const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& truth,
           std::array<double, 3> spacing) {
            auto report = evaluate_case(volume_from_array<uint8_t>(pred, to_spacing(spacing)),
                                        volume_from_array<uint8_t>(truth, to_spacing(spacing)));
            py::dict d;
            d["humerus"] = target_dict(report.humerus);
            d["scapula"] = target_dict(report.scapula);
            d["both"] = target_dict(report.both);
            return d;
        },
        py::arg("pred"), py::arg("truth"), py::arg("spacing") = std::array<double, 3>{1.0, 1.0, 1.0},
        "Overlap and surface-distance metrics per target, as nested dicts.");

    m.def(
        "preprocess_image",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& image,
           std::array<double, 3> spacing, std::array<double, 3> target_spacing,
           std::array<int, 3> target_dims) {
            auto vol = volume_from_array<float>(image, to_spacing(spacing));
            return array_from_volume(preprocess_image(vol, to_spacing(target_spacing),
                                                      {target_dims[0], target_dims[1], target_dims[2]}));
        },
        py::arg("image"), py::arg("spacing"),
        py::arg("target_spacing") = std::array<double, 3>{1.0, 1.0, 1.0},
        py::arg("target_dims") = std::array<int, 3>{144, 144, 80});

    m.def(
        "split_kfold",
        [](int n, int k, uint64_t seed) {
            auto plan = split_kfold(n, k, seed);
            return plan.assignment;
        },
        py::arg("n"), py::arg("k") = 5, py::arg("seed") = 0,
        "Fold index per case, shuffled then dealt in contiguous runs.");

    py::class_<ModelState>(m, "Model")
        .def(py::init([](int num_classes, int base_channels, uint64_t seed) {
                 NetworkConfig cfg;
                 cfg.num_classes = num_classes;
                 cfg.base_channels = base_channels;
                 return init_model(cfg, seed);
             }),
             py::arg("num_classes") = 3, py::arg("base_channels") = 16, py::arg("seed") = 0)
        .def_property_readonly("num_classes",
                               [](const ModelState& s) { return s.config.num_classes; })
        .def_property_readonly("base_channels",
                               [](const ModelState& s) { return s.config.base_channels; })
        .def_property_readonly("round", [](const ModelState& s) { return s.round; })
        .def(
            "train",
            [](ModelState& model, const std::vector<py::array_t<float>>& images,
               const std::vector<py::array_t<uint8_t>>& labels, std::array<double, 3> spacing,
               int epochs, double lr0, double lr_decay, int decay_every, uint64_t seed) {
                TrainConfig cfg;
                cfg.epochs = epochs;
                cfg.lr0 = lr0;
                cfg.lr_decay = lr_decay;
                cfg.decay_every = decay_every;
                cfg.seed = seed;
                return log_to_list(train(model, make_dataset(images, labels, spacing), cfg));
            },
            py::arg("images"), py::arg("labels"),
            py::arg("spacing") = std::array<double, 3>{1.0, 1.0, 1.0}, py::arg("epochs") = 60,
            py::arg("lr0") = 0.001, py::arg("lr_decay") = 0.95, py::arg("decay_every") = 10,
            py::arg("seed") = 0, "Returns [(epoch, lr, mean_loss), ...].")
        .def(
            "predict_probabilities",
            [](const ModelState& model, const py::array_t<float, py::array::c_style | py::array::forcecast>& image,
               std::array<double, 3> spacing) {
                auto vol = volume_from_array<float>(image, to_spacing(spacing));
                auto prob = predict_probabilities(model, vol);
                const auto& d = prob.geometry.dims;
                py::array_t<double> arr(
                    {model.config.num_classes, d.z, d.y, d.x});
                std::memcpy(arr.mutable_data(), prob.probs.data.data(),
                            sizeof(double) * prob.probs.data.size());
                return arr;
            },
            py::arg("image"), py::arg("spacing") = std::array<double, 3>{1.0, 1.0, 1.0},
            "Softmax probabilities as a (classes, nz, ny, nx) array.")
        .def(
            "predict_labels",
            [](const ModelState& model, const py::array_t<float, py::array::c_style | py::array::forcecast>& image,
               std::array<double, 3> spacing) {
                auto vol = volume_from_array<float>(image, to_spacing(spacing));
                return array_from_volume(pseudo_label(model, vol));
            },
            py::arg("image"), py::arg("spacing") = std::array<double, 3>{1.0, 1.0, 1.0})
        .def("save",
             [](const ModelState& model, const std::filesystem::path& path) {
                 save_checkpoint(model, path);
             })
        .def_static("load", [](const std::filesystem::path& path) { return load_checkpoint(path); });

    m.def(
        "self_train",
        [](const std::vector<py::array_t<float>>& images,
           const std::vector<py::array_t<uint8_t>>& labels, std::array<double, 3> spacing,
           int num_classes, int base_channels, int epochs, double lr0, uint64_t seed, int rounds,
           int augment_copies, bool keep_original_gt, bool warm_start) {
            NetworkConfig net;
            net.num_classes = num_classes;
            net.base_channels = base_channels;
            TrainConfig cfg;
            cfg.epochs = epochs;
            cfg.lr0 = lr0;
            cfg.seed = seed;
            RoundPlan plan;
            plan.rounds = rounds;
            plan.augment_copies = augment_copies;
            plan.keep_original_gt = keep_original_gt;
            plan.warm_start = warm_start;
            auto result =
                self_reinforced_train(make_dataset(images, labels, spacing), net, cfg, plan);
            py::list models, logs;
            for (auto& mdl : result.models) models.append(std::move(mdl));
            for (const auto& log : result.logs) logs.append(log_to_list(log));
            return py::make_tuple(models, logs, result.manifests);
        },
        py::arg("images"), py::arg("labels"),
        py::arg("spacing") = std::array<double, 3>{1.0, 1.0, 1.0}, py::arg("num_classes") = 3,
        py::arg("base_channels") = 16, py::arg("epochs") = 60, py::arg("lr0") = 0.001,
        py::arg("seed") = 0, py::arg("rounds") = 2, py::arg("augment_copies") = 1,
        py::arg("keep_original_gt") = true, py::arg("warm_start") = true,
        "Returns (models, logs, manifests) across rounds 0..rounds.");
}
