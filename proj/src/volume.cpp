#include "sseg/volume.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sseg {

namespace {

inline double clampd(double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); }

// Continuous input index of the physical position of target voxel i.
inline double source_index(int i, double target_spacing, double target_origin, double src_spacing,
                           double src_origin) {
    return (target_origin + i * target_spacing - src_origin) / src_spacing;
}

}  // namespace

double sample_trilinear(const ScalarVolume& vol, double u, double v, double w) {
    const Vec3i d = vol.geom.dims;
    u = clampd(u, 0.0, d.x - 1.0);
    v = clampd(v, 0.0, d.y - 1.0);
    w = clampd(w, 0.0, d.z - 1.0);
    const int x0 = static_cast<int>(std::floor(u));
    const int y0 = static_cast<int>(std::floor(v));
    const int z0 = static_cast<int>(std::floor(w));
    const int x1 = std::min(x0 + 1, d.x - 1);
    const int y1 = std::min(y0 + 1, d.y - 1);
    const int z1 = std::min(z0 + 1, d.z - 1);
    const double fx = u - x0, fy = v - y0, fz = w - z0;

    const double c000 = vol.at(x0, y0, z0), c100 = vol.at(x1, y0, z0);
    const double c010 = vol.at(x0, y1, z0), c110 = vol.at(x1, y1, z0);
    const double c001 = vol.at(x0, y0, z1), c101 = vol.at(x1, y0, z1);
    const double c011 = vol.at(x0, y1, z1), c111 = vol.at(x1, y1, z1);

    const double c00 = c000 + fx * (c100 - c000);
    const double c10 = c010 + fx * (c110 - c010);
    const double c01 = c001 + fx * (c101 - c001);
    const double c11 = c011 + fx * (c111 - c011);
    const double c0 = c00 + fy * (c10 - c00);
    const double c1 = c01 + fy * (c11 - c01);
    return c0 + fz * (c1 - c0);
}

uint8_t sample_nearest(const LabelVolume& vol, double u, double v, double w) {
    const Vec3i d = vol.geom.dims;
    const int x = static_cast<int>(clampd(std::floor(u + 0.5), 0.0, d.x - 1.0));
    const int y = static_cast<int>(clampd(std::floor(v + 0.5), 0.0, d.y - 1.0));
    const int z = static_cast<int>(clampd(std::floor(w + 0.5), 0.0, d.z - 1.0));
    return vol.at(x, y, z);
}

ScalarVolume resample_trilinear(const ScalarVolume& vol, const VolumeGeometry& target) {
    target.validate();
    if (target == vol.geom) return vol;  // identity stays bitwise identical

    ScalarVolume out(target);
    const VolumeGeometry& s = vol.geom;
    for (int z = 0; z < target.dims.z; ++z) {
        const double w = source_index(z, target.spacing.z, target.origin.z, s.spacing.z, s.origin.z);
        for (int y = 0; y < target.dims.y; ++y) {
            const double v = source_index(y, target.spacing.y, target.origin.y, s.spacing.y, s.origin.y);
            for (int x = 0; x < target.dims.x; ++x) {
                const double u = source_index(x, target.spacing.x, target.origin.x, s.spacing.x, s.origin.x);
                out.at(x, y, z) = static_cast<float>(sample_trilinear(vol, u, v, w));
            }
        }
    }
    return out;
}

LabelVolume resample_nearest(const LabelVolume& lbl, const VolumeGeometry& target) {
    target.validate();
    if (target == lbl.geom) return lbl;

    LabelVolume out(target);
    const VolumeGeometry& s = lbl.geom;
    for (int z = 0; z < target.dims.z; ++z) {
        const double w = source_index(z, target.spacing.z, target.origin.z, s.spacing.z, s.origin.z);
        for (int y = 0; y < target.dims.y; ++y) {
            const double v = source_index(y, target.spacing.y, target.origin.y, s.spacing.y, s.origin.y);
            for (int x = 0; x < target.dims.x; ++x) {
                const double u = source_index(x, target.spacing.x, target.origin.x, s.spacing.x, s.origin.x);
                out.at(x, y, z) = sample_nearest(lbl, u, v, w);
            }
        }
    }
    return out;
}

namespace {

// Shared crop/pad core. fill is the value written outside the copied block.
template <typename T>
Volume<T> crop_or_pad_impl(const Volume<T>& vol, const Vec3i& target_dims, T fill) {
    if (target_dims.x < 1 || target_dims.y < 1 || target_dims.z < 1)
        throw GeometryError("crop_or_pad target dims must be >= 1");
    if (target_dims == vol.geom.dims) return vol;

    const Vec3i in = vol.geom.dims;
    // Offset of output voxel 0 in input index space. Cropping: surplus
    // splits low/high with the extra voxel removed at the high side, so the
    // low offset is floor(surplus/2). Padding mirrors that rule.
    auto low_offset = [](int n_in, int n_out) {
        return n_in >= n_out ? (n_in - n_out) / 2 : -((n_out - n_in) / 2);
    };
    const Vec3i off{low_offset(in.x, target_dims.x), low_offset(in.y, target_dims.y),
                    low_offset(in.z, target_dims.z)};

    VolumeGeometry g = vol.geom;
    g.dims = target_dims;
    g.origin = {vol.geom.origin.x + off.x * vol.geom.spacing.x,
                vol.geom.origin.y + off.y * vol.geom.spacing.y,
                vol.geom.origin.z + off.z * vol.geom.spacing.z};

    Volume<T> out(g, fill);
    for (int z = 0; z < target_dims.z; ++z) {
        const int sz = z + off.z;
        if (sz < 0 || sz >= in.z) continue;
        for (int y = 0; y < target_dims.y; ++y) {
            const int sy = y + off.y;
            if (sy < 0 || sy >= in.y) continue;
            const int x_begin = std::max(0, -off.x);
            const int x_end = std::min(target_dims.x, in.x - off.x);
            for (int x = x_begin; x < x_end; ++x) out.at(x, y, z) = vol.at(x + off.x, sy, sz);
        }
    }
    return out;
}

}  // namespace

ScalarVolume crop_or_pad_centered(const ScalarVolume& vol, const Vec3i& target_dims) {
    float fill = 0.0f;
    if (!vol.data.empty()) fill = *std::min_element(vol.data.begin(), vol.data.end());
    return crop_or_pad_impl(vol, target_dims, fill);
}

LabelVolume crop_or_pad_centered(const LabelVolume& vol, const Vec3i& target_dims) {
    return crop_or_pad_impl(vol, target_dims, kBackground);
}

ScalarVolume normalize_min_max(const ScalarVolume& vol) {
    ScalarVolume out = vol;
    if (vol.data.empty()) return out;
    const auto [lo_it, hi_it] = std::minmax_element(vol.data.begin(), vol.data.end());
    const double lo = *lo_it, hi = *hi_it;
    if (hi == lo) {
        std::fill(out.data.begin(), out.data.end(), 0.0f);
        return out;
    }
    const double range = hi - lo;
    for (auto& v : out.data) v = static_cast<float>((v - lo) / range);
    return out;
}

}  // namespace sseg
