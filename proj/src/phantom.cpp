#include "sseg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sseg/error.hpp"
#include "sseg/rng.hpp"
#include "sseg/volume_io.hpp"

namespace sseg {

namespace {

double draw(Rng& rng, const Range& r) {
    if (r.hi < r.lo) throw ConfigError("range with hi < lo");
    return r.lo == r.hi ? r.lo : rng.uniform(r.lo, r.hi);
}

struct HumerusShape {
    Vec3d head_center;
    double head_radius;
    double shaft_radius;
    double shaft_length;
    Vec3d shaft_dir;  // unit vector, roughly -z

    bool contains(const Vec3d& p) const {
        const double dx = p.x - head_center.x, dy = p.y - head_center.y, dz = p.z - head_center.z;
        if (dx * dx + dy * dy + dz * dz <= head_radius * head_radius) return true;
        // Cylinder from the head center along shaft_dir.
        const double t = dx * shaft_dir.x + dy * shaft_dir.y + dz * shaft_dir.z;
        if (t < 0.0 || t > shaft_length) return false;
        const double rx = dx - t * shaft_dir.x, ry = dy - t * shaft_dir.y, rz = dz - t * shaft_dir.z;
        return rx * rx + ry * ry + rz * rz <= shaft_radius * shaft_radius;
    }
};

struct ScapulaShape {
    double plate_x;      // center plane x (mm)
    double thickness;    // plate thickness (mm)
    double tilt;         // rotation of the plate normal in the x-y plane
    double y_lo, y_hi, z_lo, z_hi;
    double spine_radius, spine_length, spine_z;

    bool contains(const Vec3d& p) const {
        if (p.y < y_lo || p.y > y_hi || p.z < z_lo || p.z > z_hi) return false;
        // Signed distance to the tilted center plane (normal in x-y).
        const double cy = 0.5 * (y_lo + y_hi);
        const double d = (p.x - plate_x) * std::cos(tilt) + (p.y - cy) * std::sin(tilt);
        if (std::abs(d) <= 0.5 * thickness) return true;
        // Spine: a horizontal cylinder protruding from the plate along +x.
        if (d > 0.0 && d <= 0.5 * thickness + spine_length) {
            const double ry = p.y - cy, rz = p.z - spine_z;
            return ry * ry + rz * rz <= spine_radius * spine_radius;
        }
        return false;
    }
};

// Smooth low-frequency field in [-1, 1]: Gaussian control grid upsampled
// trilinearly, then scaled by its own max magnitude.
std::vector<double> smooth_field(const VolumeGeometry& g, double control_spacing_mm, Rng& rng) {
    const Vec3d extent{(g.dims.x - 1) * g.spacing.x, (g.dims.y - 1) * g.spacing.y,
                       (g.dims.z - 1) * g.spacing.z};
    auto nodes = [&](double e) { return std::max(2, static_cast<int>(std::floor(e / control_spacing_mm)) + 2); };
    const int cx = nodes(extent.x), cy = nodes(extent.y), cz = nodes(extent.z);
    std::vector<double> grid(static_cast<size_t>(cx) * cy * cz);
    for (auto& v : grid) v = rng.normal();

    std::vector<double> field(g.voxel_count());
    double max_abs = 0.0;
    size_t idx = 0;
    for (int z = 0; z < g.dims.z; ++z)
        for (int y = 0; y < g.dims.y; ++y)
            for (int x = 0; x < g.dims.x; ++x, ++idx) {
                const double u = std::min(x * g.spacing.x / control_spacing_mm, cx - 1.0);
                const double v = std::min(y * g.spacing.y / control_spacing_mm, cy - 1.0);
                const double w = std::min(z * g.spacing.z / control_spacing_mm, cz - 1.0);
                const int i0 = static_cast<int>(u), j0 = static_cast<int>(v), k0 = static_cast<int>(w);
                const int i1 = std::min(i0 + 1, cx - 1), j1 = std::min(j0 + 1, cy - 1),
                          k1 = std::min(k0 + 1, cz - 1);
                const double fu = u - i0, fv = v - j0, fw = w - k0;
                auto at = [&](int i, int j, int k) {
                    return grid[static_cast<size_t>(i) + cx * (static_cast<size_t>(j) + static_cast<size_t>(cy) * k)];
                };
                const double c00 = at(i0, j0, k0) + fu * (at(i1, j0, k0) - at(i0, j0, k0));
                const double c10 = at(i0, j1, k0) + fu * (at(i1, j1, k0) - at(i0, j1, k0));
                const double c01 = at(i0, j0, k1) + fu * (at(i1, j0, k1) - at(i0, j0, k1));
                const double c11 = at(i0, j1, k1) + fu * (at(i1, j1, k1) - at(i0, j1, k1));
                const double c0 = c00 + fv * (c10 - c00);
                const double c1 = c01 + fv * (c11 - c01);
                field[idx] = c0 + fw * (c1 - c0);
                max_abs = std::max(max_abs, std::abs(field[idx]));
            }
    if (max_abs > 0.0)
        for (auto& v : field) v /= max_abs;
    return field;
}

}  // namespace

std::pair<ScalarVolume, LabelVolume> generate_phantom(const PhantomSpec& spec) {
    const VolumeGeometry& g = spec.geometry;
    g.validate();
    Rng rng(spec.seed);

    const Vec3d extent{g.dims.x * g.spacing.x, g.dims.y * g.spacing.y, g.dims.z * g.spacing.z};

    HumerusShape hum;
    hum.head_radius = draw(rng, spec.head_radius);
    hum.shaft_radius = draw(rng, spec.shaft_radius);
    hum.shaft_length = draw(rng, spec.shaft_length);
    hum.head_center = {g.origin.x + draw(rng, spec.head_cx) * extent.x,
                       g.origin.y + draw(rng, spec.head_cy) * extent.y,
                       g.origin.z + draw(rng, spec.head_cz) * extent.z};
    const double tilt = draw(rng, spec.shaft_tilt);
    hum.shaft_dir = {std::sin(tilt), 0.0, -std::cos(tilt)};

    ScapulaShape sca;
    sca.plate_x = g.origin.x + draw(rng, spec.plate_x) * extent.x;
    sca.thickness = draw(rng, spec.plate_thickness);
    sca.tilt = draw(rng, spec.plate_tilt);
    sca.y_lo = g.origin.y + draw(rng, spec.plate_y_lo) * extent.y;
    sca.y_hi = g.origin.y + draw(rng, spec.plate_y_hi) * extent.y;
    sca.z_lo = g.origin.z + draw(rng, spec.plate_z_lo) * extent.z;
    sca.z_hi = g.origin.z + draw(rng, spec.plate_z_hi) * extent.z;
    sca.spine_radius = draw(rng, spec.spine_radius);
    sca.spine_length = draw(rng, spec.spine_length);
    sca.spine_z = sca.z_lo + draw(rng, spec.spine_z) * (sca.z_hi - sca.z_lo);

    const double min_spacing = std::min({g.spacing.x, g.spacing.y, g.spacing.z});
    if (sca.thickness < 2.0 * min_spacing)
        throw ConfigError("plate thickness below 2 voxels; surfaces would be ill-defined");

    // Bounds check: shapes must stay inside the volume.
    const double hum_reach = hum.head_radius;
    for (double c : {hum.head_center.x - g.origin.x, hum.head_center.y - g.origin.y,
                     hum.head_center.z - g.origin.z}) {
        if (c - hum_reach < 0.0) throw ConfigError("humerus analogue exceeds volume bounds");
    }
    if (hum.head_center.x - g.origin.x + hum_reach > extent.x ||
        hum.head_center.y - g.origin.y + hum_reach > extent.y ||
        hum.head_center.z - g.origin.z + hum_reach > extent.z)
        throw ConfigError("humerus analogue exceeds volume bounds");
    if (sca.plate_x - g.origin.x + 0.5 * sca.thickness + sca.spine_length > extent.x)
        throw ConfigError("scapula analogue exceeds volume bounds");

    LabelVolume labels(g, kBackground);
    size_t idx = 0;
    for (int z = 0; z < g.dims.z; ++z)
        for (int y = 0; y < g.dims.y; ++y)
            for (int x = 0; x < g.dims.x; ++x, ++idx) {
                const Vec3d p = g.position(x, y, z);
                if (hum.contains(p))
                    labels.data[idx] = kHumerus;
                else if (sca.contains(p))
                    labels.data[idx] = kScapula;
            }

    // Intensities: per-case class means, multiplicative bias, additive noise.
    const double mean_bg = rng.normal(spec.background_mean, spec.background_std);
    const double mean_hum = rng.normal(spec.humerus_mean, spec.humerus_std);
    const double mean_sca = rng.normal(spec.scapula_mean, spec.scapula_std);
    const auto bias = smooth_field(g, spec.bias_spacing_mm, rng);

    ScalarVolume image(g);
    for (size_t i = 0; i < image.data.size(); ++i) {
        double base = mean_bg;
        if (labels.data[i] == kHumerus)
            base = mean_hum;
        else if (labels.data[i] == kScapula)
            base = mean_sca;
        const double biased = base * (1.0 + spec.bias_amplitude * bias[i]);
        image.data[i] = static_cast<float>(biased + spec.noise_std * rng.normal());
    }
    return {normalize_min_max(image), std::move(labels)};
}

namespace {

// In-plane (x-y) morphological dilation/erosion of one class on one slice
// by an integer disc radius. Dilation claims background voxels only.
void jitter_slice(LabelVolume& lbl, int z, uint8_t cls, int radius, bool dilate) {
    if (radius <= 0) return;
    const Vec3i d = lbl.geom.dims;
    const int r2 = radius * radius;
    const size_t plane = static_cast<size_t>(d.x) * d.y;
    std::vector<uint8_t> slice(lbl.data.begin() + plane * z, lbl.data.begin() + plane * (z + 1));
    auto in_class = [&](int x, int y) { return slice[x + static_cast<size_t>(d.x) * y] == cls; };

    for (int y = 0; y < d.y; ++y)
        for (int x = 0; x < d.x; ++x) {
            const bool inside = in_class(x, y);
            if (dilate == inside) continue;  // dilation looks at bg, erosion at fg
            bool near = false;
            for (int dy = -radius; dy <= radius && !near; ++dy)
                for (int dx = -radius; dx <= radius && !near; ++dx) {
                    if (dx * dx + dy * dy > r2) continue;
                    const int nx = x + dx, ny = y + dy;
                    if (nx < 0 || nx >= d.x || ny < 0 || ny >= d.y) continue;
                    if (in_class(nx, ny) != inside) near = true;
                }
            if (!near) continue;
            uint8_t& out = lbl.data[plane * z + x + static_cast<size_t>(d.x) * y];
            if (dilate) {
                if (out == kBackground) out = cls;
            } else {
                out = kBackground;
            }
        }
}

}  // namespace

LabelVolume corrupt_labels(const LabelVolume& clean, const CorruptionSpec& spec) {
    if (spec.severity < 0.0 || spec.severity > 1.0)
        throw ConfigError("corruption severity must be in [0, 1]");
    LabelVolume out = clean;
    if (spec.severity == 0.0) return out;

    Rng rng(spec.seed);
    const Vec3i d = clean.geom.dims;
    const size_t plane = static_cast<size_t>(d.x) * d.y;
    const double max_radius = spec.severity * spec.jitter_radius;
    const double p_drop = spec.severity * spec.slice_dropout;
    const double p_flip = spec.severity * spec.flip_prob;

    // Per-slice, per-class morphological jitter and dropout. The RNG is
    // consumed in a fixed order (slice, then class) regardless of content.
    for (int z = 0; z < d.z; ++z) {
        for (uint8_t cls : {kHumerus, kScapula}) {
            const bool dilate = rng.bernoulli(0.5);
            const int radius = static_cast<int>(std::floor(rng.uniform() * max_radius + 0.5));
            const bool drop = rng.bernoulli(p_drop);
            if (drop) {
                for (size_t i = plane * z; i < plane * (z + 1); ++i)
                    if (out.data[i] == cls) out.data[i] = kBackground;
                continue;
            }
            jitter_slice(out, z, cls, radius, dilate);
        }
    }

    // Boundary flips, decided on a snapshot so flips do not cascade.
    if (p_flip > 0.0) {
        const LabelVolume snap = out;
        size_t idx = 0;
        for (int z = 0; z < d.z; ++z)
            for (int y = 0; y < d.y; ++y)
                for (int x = 0; x < d.x; ++x, ++idx) {
                    const uint8_t v = snap.data[idx];
                    uint8_t neighbor_fg = kBackground;
                    bool boundary = false;
                    auto look = [&](int nx, int ny, int nz) {
                        if (nx < 0 || nx >= d.x || ny < 0 || ny >= d.y || nz < 0 || nz >= d.z) return;
                        const uint8_t nv = snap.at(nx, ny, nz);
                        if (v == kBackground && nv != kBackground) {
                            boundary = true;
                            neighbor_fg = nv;
                        } else if (v != kBackground && nv != v) {
                            boundary = true;
                        }
                    };
                    look(x - 1, y, z);
                    look(x + 1, y, z);
                    look(x, y - 1, z);
                    look(x, y + 1, z);
                    look(x, y, z - 1);
                    look(x, y, z + 1);
                    if (!boundary) continue;
                    if (rng.bernoulli(p_flip)) out.data[idx] = (v == kBackground) ? neighbor_fg : kBackground;
                }
    }
    return out;
}

std::vector<BenchmarkCase> generate_benchmark(int n_cases, const PhantomSpec& spec,
                                              const CorruptionSpec& corruption,
                                              const std::filesystem::path& out_dir) {
    if (n_cases < 1) throw ConfigError("benchmark needs at least one case");
    std::filesystem::create_directories(out_dir);

    std::vector<BenchmarkCase> cases;
    for (int i = 0; i < n_cases; ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "case%03d", i);

        PhantomSpec ps = spec;
        ps.seed = derive_seed(spec.seed, 0x9e7a, static_cast<uint64_t>(i));
        auto [image, clean] = generate_phantom(ps);

        CorruptionSpec cs = corruption;
        cs.seed = derive_seed(corruption.seed, 0xc0de, static_cast<uint64_t>(i));
        LabelVolume corrupted = corrupt_labels(clean, cs);

        BenchmarkCase c;
        c.case_id = id;
        c.seed = ps.seed;
        c.image = out_dir / (std::string(id) + "_image.vol");
        c.corrupted = out_dir / (std::string(id) + "_gt.vol");
        c.clean = out_dir / (std::string(id) + "_ref.vol");
        store_volume(image, c.image);
        store_volume(corrupted, c.corrupted);
        store_volume(clean, c.clean);
        cases.push_back(std::move(c));
    }
    write_benchmark_manifest(cases, out_dir / "manifest.csv");
    return cases;
}

void write_benchmark_manifest(const std::vector<BenchmarkCase>& cases,
                              const std::filesystem::path& manifest_path) {
    std::ofstream f(manifest_path, std::ios::binary);
    if (!f) throw IoError("cannot write manifest: " + manifest_path.string());
    f << "case_id,image,corrupted,clean,seed\n";
    const auto base = manifest_path.parent_path();
    for (const auto& c : cases) {
        f << c.case_id << ',' << std::filesystem::relative(c.image, base).string() << ','
          << std::filesystem::relative(c.corrupted, base).string() << ','
          << std::filesystem::relative(c.clean, base).string() << ',' << c.seed << '\n';
    }
}

std::vector<BenchmarkCase> read_benchmark_manifest(const std::filesystem::path& manifest_path) {
    std::ifstream f(manifest_path, std::ios::binary);
    if (!f) throw IoError("cannot open manifest: " + manifest_path.string());
    const auto base = manifest_path.parent_path();

    std::vector<BenchmarkCase> cases;
    std::string line;
    if (!std::getline(f, line)) throw ParseError("empty manifest: " + manifest_path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "case_id,image,corrupted,clean,seed")
        throw ParseError("unexpected manifest header: " + line);
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string id, image, corrupted, clean, seed;
        if (!std::getline(ss, id, ',') || !std::getline(ss, image, ',') ||
            !std::getline(ss, corrupted, ',') || !std::getline(ss, clean, ',') ||
            !std::getline(ss, seed))
            throw ParseError("malformed manifest row: " + line);
        BenchmarkCase c;
        c.case_id = id;
        c.image = base / image;
        c.corrupted = base / corrupted;
        c.clean = base / clean;
        c.seed = std::stoull(seed);
        cases.push_back(std::move(c));
    }
    return cases;
}

}  // namespace sseg
