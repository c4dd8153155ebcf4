#include "sseg/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <vector>

#include "sseg/error.hpp"

namespace sseg {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

int to_int(const std::string& key, const std::string& v) {
    int out{};
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size())
        throw ConfigError("invalid integer for " + key + ": " + v);
    return out;
}

uint64_t to_u64(const std::string& key, const std::string& v) {
    uint64_t out{};
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size())
        throw ConfigError("invalid unsigned integer for " + key + ": " + v);
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("invalid number for " + key + ": " + v);
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError("invalid boolean for " + key + ": " + v + " (use true/false)");
}

Vec3i to_vec3i(const std::string& key, const std::string& v) {
    std::istringstream in(v);
    Vec3i out;
    if (!(in >> out.x >> out.y >> out.z) || !(in >> std::ws).eof())
        throw ConfigError("invalid triple for " + key + ": " + v);
    return out;
}

Vec3d to_vec3d(const std::string& key, const std::string& v) {
    std::istringstream in(v);
    Vec3d out;
    if (!(in >> out.x >> out.y >> out.z) || !(in >> std::ws).eof())
        throw ConfigError("invalid triple for " + key + ": " + v);
    return out;
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_vec3i(const Vec3i& v) {
    return std::to_string(v.x) + " " + std::to_string(v.y) + " " + std::to_string(v.z);
}

std::string fmt_vec3d(const Vec3d& v) {
    return fmt_double(v.x) + " " + fmt_double(v.y) + " " + fmt_double(v.z);
}

struct KeyBinding {
    const char* key;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

const std::vector<KeyBinding>& bindings() {
    auto int_field = [](const char* key, int RunConfig::* field) {
        return KeyBinding{key,
                          [key, field](RunConfig& c, const std::string& v) { c.*field = to_int(key, v); },
                          [field](const RunConfig& c) { return std::to_string(c.*field); }};
    };
    static const std::vector<KeyBinding> table = {
        {"seed", [](RunConfig& c, const std::string& v) { c.seed = to_u64("seed", v); },
         [](const RunConfig& c) { return std::to_string(c.seed); }},

        {"network.num_classes",
         [](RunConfig& c, const std::string& v) { c.network.num_classes = to_int("network.num_classes", v); },
         [](const RunConfig& c) { return std::to_string(c.network.num_classes); }},
        {"network.base_channels",
         [](RunConfig& c, const std::string& v) { c.network.base_channels = to_int("network.base_channels", v); },
         [](const RunConfig& c) { return std::to_string(c.network.base_channels); }},

        {"train.epochs",
         [](RunConfig& c, const std::string& v) { c.train.epochs = to_int("train.epochs", v); },
         [](const RunConfig& c) { return std::to_string(c.train.epochs); }},
        {"train.lr0", [](RunConfig& c, const std::string& v) { c.train.lr0 = to_double("train.lr0", v); },
         [](const RunConfig& c) { return fmt_double(c.train.lr0); }},
        {"train.lr_decay",
         [](RunConfig& c, const std::string& v) { c.train.lr_decay = to_double("train.lr_decay", v); },
         [](const RunConfig& c) { return fmt_double(c.train.lr_decay); }},
        {"train.decay_every",
         [](RunConfig& c, const std::string& v) { c.train.decay_every = to_int("train.decay_every", v); },
         [](const RunConfig& c) { return std::to_string(c.train.decay_every); }},

        {"selftrain.rounds",
         [](RunConfig& c, const std::string& v) { c.selftrain.rounds = to_int("selftrain.rounds", v); },
         [](const RunConfig& c) { return std::to_string(c.selftrain.rounds); }},
        {"selftrain.augment_copies",
         [](RunConfig& c, const std::string& v) {
             c.selftrain.augment_copies = to_int("selftrain.augment_copies", v);
         },
         [](const RunConfig& c) { return std::to_string(c.selftrain.augment_copies); }},
        {"selftrain.keep_original_gt",
         [](RunConfig& c, const std::string& v) {
             c.selftrain.keep_original_gt = to_bool("selftrain.keep_original_gt", v);
         },
         [](const RunConfig& c) { return c.selftrain.keep_original_gt ? "true" : "false"; }},
        {"selftrain.warm_start",
         [](RunConfig& c, const std::string& v) {
             c.selftrain.warm_start = to_bool("selftrain.warm_start", v);
         },
         [](const RunConfig& c) { return c.selftrain.warm_start ? "true" : "false"; }},

        {"augment.sigma",
         [](RunConfig& c, const std::string& v) {
             c.selftrain.distortion_sigma = to_double("augment.sigma", v);
         },
         [](const RunConfig& c) { return fmt_double(c.selftrain.distortion_sigma); }},
        {"augment.control_spacing",
         [](RunConfig& c, const std::string& v) {
             c.selftrain.distortion_spacing = to_double("augment.control_spacing", v);
         },
         [](const RunConfig& c) { return fmt_double(c.selftrain.distortion_spacing); }},
        {"augment.flip_axes",
         [](RunConfig& c, const std::string& v) {
             c.selftrain.flip_axes = to_int("augment.flip_axes", v);
         },
         [](const RunConfig& c) { return std::to_string(c.selftrain.flip_axes); }},

        {"preprocess.spacing",
         [](RunConfig& c, const std::string& v) {
             c.preprocess_spacing = to_vec3d("preprocess.spacing", v);
         },
         [](const RunConfig& c) { return fmt_vec3d(c.preprocess_spacing); }},
        {"preprocess.dims",
         [](RunConfig& c, const std::string& v) { c.preprocess_dims = to_vec3i("preprocess.dims", v); },
         [](const RunConfig& c) { return fmt_vec3i(c.preprocess_dims); }},

        int_field("phantom.cases", &RunConfig::phantom_cases),
        {"phantom.dims",
         [](RunConfig& c, const std::string& v) {
             c.phantom.geometry.dims = to_vec3i("phantom.dims", v);
         },
         [](const RunConfig& c) { return fmt_vec3i(c.phantom.geometry.dims); }},
        {"phantom.noise_std",
         [](RunConfig& c, const std::string& v) {
             c.phantom.noise_std = to_double("phantom.noise_std", v);
         },
         [](const RunConfig& c) { return fmt_double(c.phantom.noise_std); }},
        {"phantom.bias_amplitude",
         [](RunConfig& c, const std::string& v) {
             c.phantom.bias_amplitude = to_double("phantom.bias_amplitude", v);
         },
         [](const RunConfig& c) { return fmt_double(c.phantom.bias_amplitude); }},
        {"corruption.severity",
         [](RunConfig& c, const std::string& v) {
             c.corruption.severity = to_double("corruption.severity", v);
         },
         [](const RunConfig& c) { return fmt_double(c.corruption.severity); }},
        {"corruption.jitter_radius",
         [](RunConfig& c, const std::string& v) {
             c.corruption.jitter_radius = to_double("corruption.jitter_radius", v);
         },
         [](const RunConfig& c) { return fmt_double(c.corruption.jitter_radius); }},
        {"corruption.slice_dropout",
         [](RunConfig& c, const std::string& v) {
             c.corruption.slice_dropout = to_double("corruption.slice_dropout", v);
         },
         [](const RunConfig& c) { return fmt_double(c.corruption.slice_dropout); }},
        {"corruption.flip_prob",
         [](RunConfig& c, const std::string& v) {
             c.corruption.flip_prob = to_double("corruption.flip_prob", v);
         },
         [](const RunConfig& c) { return fmt_double(c.corruption.flip_prob); }},

        int_field("crossval.folds", &RunConfig::crossval_folds),
        {"evaluate.percentile",
         [](RunConfig& c, const std::string& v) {
             c.hd_percentile = to_double("evaluate.percentile", v);
         },
         [](const RunConfig& c) { return fmt_double(c.hd_percentile); }},
    };
    return table;
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
    RunConfig config;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + " is not key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("empty key on config line " + std::to_string(line_no));
        const KeyBinding* binding = nullptr;
        for (const auto& b : bindings())
            if (key == b.key) {
                binding = &b;
                break;
            }
        if (!binding) throw ConfigError("unknown config key: " + key);
        if (!seen.insert(key).second) throw ConfigError("repeated config key: " + key);
        binding->set(config, value);
    }
    return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str());
}

std::string serialize_run_config(const RunConfig& config) {
    std::string out;
    for (const auto& b : bindings()) out += std::string(b.key) + " = " + b.get(config) + "\n";
    return out;
}

}  // namespace sseg
