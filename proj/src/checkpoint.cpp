#include "sseg/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "sseg/error.hpp"

namespace sseg {

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'S', 'E', 'G', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::ifstream& in, const char* what) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw ParseError(std::string("checkpoint truncated reading ") + what);
    return v;
}

}  // namespace

void save_checkpoint(const ModelState& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
    out.write(kMagic, sizeof kMagic);
    write_pod(out, kVersion);
    write_pod(out, static_cast<int32_t>(model.config.num_classes));
    write_pod(out, static_cast<int32_t>(model.config.base_channels));
    write_pod(out, static_cast<int32_t>(model.config.levels));
    write_pod(out, static_cast<int32_t>(model.round));
    auto views = param_views(const_cast<ModelParams&>(model.params));
    write_pod(out, static_cast<uint32_t>(views.size()));
    std::vector<float> buf;
    for (const auto& v : views) {
        write_pod(out, static_cast<uint32_t>(v.name.size()));
        out.write(v.name.data(), static_cast<std::streamsize>(v.name.size()));
        write_pod(out, static_cast<uint64_t>(v.values->size()));
        buf.resize(v.values->size());
        for (size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>((*v.values)[i]);
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
    if (!out) throw IoError("failed writing checkpoint: " + path.string());
}

ModelState load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path.string());
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw ParseError("not a checkpoint file: " + path.string());
    if (read_pod<uint32_t>(in, "version") != kVersion)
        throw ParseError("unsupported checkpoint version");
    NetworkConfig config;
    config.num_classes = read_pod<int32_t>(in, "num_classes");
    config.base_channels = read_pod<int32_t>(in, "base_channels");
    config.levels = read_pod<int32_t>(in, "levels");
    config.validate();
    ModelState model;
    model.config = config;
    model.params = make_params(config);
    model.round = read_pod<int32_t>(in, "round");
    auto views = param_views(model.params);
    const auto count = read_pod<uint32_t>(in, "tensor count");
    if (count != views.size()) throw ParseError("checkpoint tensor count mismatch");
    std::vector<float> buf;
    for (auto& v : views) {
        const auto name_len = read_pod<uint32_t>(in, "tensor name length");
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw ParseError("checkpoint truncated reading tensor name");
        if (name != v.name) throw ParseError("checkpoint tensor order mismatch: " + name);
        const auto len = read_pod<uint64_t>(in, "tensor length");
        if (len != v.values->size()) throw ParseError("checkpoint tensor size mismatch: " + name);
        buf.resize(len);
        in.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(len * sizeof(float)));
        if (!in) throw ParseError("checkpoint truncated reading tensor data: " + name);
        for (size_t i = 0; i < len; ++i) (*v.values)[i] = static_cast<double>(buf[i]);
    }
    return model;
}

}  // namespace sseg
