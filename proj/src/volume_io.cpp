#include "sseg/volume_io.hpp"

#include <bit>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace sseg {

static_assert(std::endian::native == std::endian::little,
              "volume payloads are little-endian; big-endian hosts are unsupported");

namespace {

std::string format_triple(double a, double b, double c) {
    // %.17g keeps doubles exact through a text round-trip.
    char buf[128];
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g", a, b, c);
    return buf;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + p.string());
    f << text;
    if (!f) throw IoError("write failed: " + p.string());
}

template <typename T>
void write_payload(const std::filesystem::path& p, const std::vector<T>& data) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + p.string());
    f.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(T)));
    if (!f) throw IoError("write failed: " + p.string());
}

template <typename T>
void store_impl(const Volume<T>& vol, const std::filesystem::path& header_path, const char* dtype) {
    vol.geom.validate();
    if (vol.data.size() != vol.geom.voxel_count())
        throw IoError("volume data length does not match its geometry");

    std::filesystem::path raw = header_path;
    raw.replace_extension(".raw");

    std::ostringstream h;
    h << "dims = " << vol.geom.dims.x << ' ' << vol.geom.dims.y << ' ' << vol.geom.dims.z << '\n';
    h << "spacing = " << format_triple(vol.geom.spacing.x, vol.geom.spacing.y, vol.geom.spacing.z) << '\n';
    h << "origin = " << format_triple(vol.geom.origin.x, vol.geom.origin.y, vol.geom.origin.z) << '\n';
    h << "dtype = " << dtype << '\n';
    h << "data = " << raw.filename().string() << '\n';

    write_text(header_path, h.str());
    write_payload(raw, vol.data);
}

struct Header {
    VolumeGeometry geom;
    std::string dtype;
    std::filesystem::path payload;
};

Header parse_header(const std::filesystem::path& header_path) {
    std::ifstream f(header_path, std::ios::binary);
    if (!f) throw IoError("cannot open volume header: " + header_path.string());

    Header h;
    bool have_dims = false, have_spacing = false, have_origin = false, have_dtype = false,
         have_data = false;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto where = header_path.string() + ":" + std::to_string(lineno);
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("malformed header line (no '=') at " + where);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        auto parse_triple = [&](double& a, double& b, double& c) {
            std::istringstream ss(value);
            std::string extra;
            if (!(ss >> a >> b >> c) || (ss >> extra))
                throw ParseError("malformed " + key + " value at " + where);
        };

        if (key == "dims") {
            double a, b, c;
            parse_triple(a, b, c);
            if (a != static_cast<int>(a) || b != static_cast<int>(b) || c != static_cast<int>(c))
                throw ParseError("dims must be integers at " + where);
            h.geom.dims = {static_cast<int>(a), static_cast<int>(b), static_cast<int>(c)};
            have_dims = true;
        } else if (key == "spacing") {
            parse_triple(h.geom.spacing.x, h.geom.spacing.y, h.geom.spacing.z);
            have_spacing = true;
        } else if (key == "origin") {
            parse_triple(h.geom.origin.x, h.geom.origin.y, h.geom.origin.z);
            have_origin = true;
        } else if (key == "dtype") {
            if (value != "float32" && value != "uint8")
                throw ParseError("unknown dtype '" + value + "' at " + where);
            h.dtype = value;
            have_dtype = true;
        } else if (key == "data") {
            if (value.empty()) throw ParseError("empty data path at " + where);
            h.payload = header_path.parent_path() / value;
            have_data = true;
        } else {
            throw ParseError("unknown header key '" + key + "' at " + where);
        }
    }
    if (!have_dims || !have_spacing || !have_origin || !have_dtype || !have_data)
        throw ParseError("incomplete header (need dims, spacing, origin, dtype, data): " +
                         header_path.string());
    try {
        h.geom.validate();
    } catch (const GeometryError& e) {
        throw ParseError(std::string("invalid geometry in header: ") + e.what());
    }
    return h;
}

template <typename T>
std::vector<T> read_payload(const std::filesystem::path& p, size_t expected_count) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw IoError("cannot open payload: " + p.string());
    f.seekg(0, std::ios::end);
    const auto bytes = static_cast<size_t>(f.tellg());
    f.seekg(0);
    if (bytes != expected_count * sizeof(T))
        throw ParseError("dims/data size mismatch: header expects " + std::to_string(expected_count) +
                         " voxels (" + std::to_string(expected_count * sizeof(T)) + " bytes), payload has " +
                         std::to_string(bytes) + " bytes: " + p.string());
    std::vector<T> data(expected_count);
    f.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(bytes));
    if (!f) throw IoError("read failed: " + p.string());
    return data;
}

}  // namespace

void store_volume(const ScalarVolume& vol, const std::filesystem::path& header_path) {
    store_impl(vol, header_path, "float32");
}

void store_volume(const LabelVolume& vol, const std::filesystem::path& header_path) {
    store_impl(vol, header_path, "uint8");
}

AnyVolume load_volume(const std::filesystem::path& header_path) {
    const Header h = parse_header(header_path);
    if (h.dtype == "float32") {
        ScalarVolume v;
        v.geom = h.geom;
        v.data = read_payload<float>(h.payload, h.geom.voxel_count());
        return v;
    }
    LabelVolume v;
    v.geom = h.geom;
    v.data = read_payload<uint8_t>(h.payload, h.geom.voxel_count());
    return v;
}

ScalarVolume load_scalar_volume(const std::filesystem::path& header_path) {
    AnyVolume v = load_volume(header_path);
    if (auto* s = std::get_if<ScalarVolume>(&v)) return std::move(*s);
    throw ParseError("expected float32 volume, found uint8: " + header_path.string());
}

LabelVolume load_label_volume(const std::filesystem::path& header_path) {
    AnyVolume v = load_volume(header_path);
    if (auto* l = std::get_if<LabelVolume>(&v)) return std::move(*l);
    throw ParseError("expected uint8 volume, found float32: " + header_path.string());
}

}  // namespace sseg
