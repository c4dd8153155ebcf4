#include "sseg/augment.hpp"

#include <algorithm>
#include <cmath>

#include "sseg/error.hpp"
#include "sseg/rng.hpp"

namespace sseg {

namespace {

int node_count(double extent, double spacing) {
    return static_cast<int>(std::ceil(extent / spacing)) + 1;
}

double node_component(const std::vector<double>& comp, const Vec3i& nodes, int i, int j, int k) {
    return comp[static_cast<size_t>(i) +
                static_cast<size_t>(nodes.x) * (static_cast<size_t>(j) + static_cast<size_t>(nodes.y) * k)];
}

}  // namespace

Vec3d DistortionField::displacement_at(const Vec3d& p) const {
    if (magnitude == 0.0) return {0.0, 0.0, 0.0};
    auto coord = [&](double v, double o, int n) {
        const double u = (v - o) / control_spacing;
        return std::clamp(u, 0.0, static_cast<double>(n - 1));
    };
    const double u = coord(p.x, geometry.origin.x, nodes.x);
    const double v = coord(p.y, geometry.origin.y, nodes.y);
    const double w = coord(p.z, geometry.origin.z, nodes.z);
    const int i0 = std::min(static_cast<int>(u), nodes.x - 1);
    const int j0 = std::min(static_cast<int>(v), nodes.y - 1);
    const int k0 = std::min(static_cast<int>(w), nodes.z - 1);
    const int i1 = std::min(i0 + 1, nodes.x - 1);
    const int j1 = std::min(j0 + 1, nodes.y - 1);
    const int k1 = std::min(k0 + 1, nodes.z - 1);
    const double fu = u - i0, fv = v - j0, fw = w - k0;
    auto lerp3 = [&](const std::vector<double>& comp) {
        double c = 0.0;
        for (int dk = 0; dk < 2; ++dk)
            for (int dj = 0; dj < 2; ++dj)
                for (int di = 0; di < 2; ++di) {
                    const double wgt = (di ? fu : 1.0 - fu) * (dj ? fv : 1.0 - fv) * (dk ? fw : 1.0 - fw);
                    c += wgt * node_component(comp, nodes, di ? i1 : i0, dj ? j1 : j0, dk ? k1 : k0);
                }
        return c;
    };
    return {lerp3(dx), lerp3(dy), lerp3(dz)};
}

DistortionField sample_distortion(const VolumeGeometry& geometry, double sigma,
                                  double control_spacing, uint64_t seed) {
    geometry.validate();
    if (sigma < 0.0) throw ConfigError("distortion magnitude must be >= 0");
    if (control_spacing <= 0.0) throw ConfigError("control spacing must be > 0");
    DistortionField f;
    f.geometry = geometry;
    f.control_spacing = control_spacing;
    f.magnitude = sigma;
    f.nodes = {node_count((geometry.dims.x - 1) * geometry.spacing.x, control_spacing),
               node_count((geometry.dims.y - 1) * geometry.spacing.y, control_spacing),
               node_count((geometry.dims.z - 1) * geometry.spacing.z, control_spacing)};
    const size_t n = static_cast<size_t>(f.nodes.x) * f.nodes.y * f.nodes.z;
    f.dx.assign(n, 0.0);
    f.dy.assign(n, 0.0);
    f.dz.assign(n, 0.0);
    if (sigma > 0.0) {
        Rng rng(seed);
        for (size_t i = 0; i < n; ++i) {
            f.dx[i] = rng.normal(0.0, sigma);
            f.dy[i] = rng.normal(0.0, sigma);
            f.dz[i] = rng.normal(0.0, sigma);
        }
    }
    return f;
}

namespace {

template <typename VolT, typename SampleFn>
VolT warp_impl(const VolT& vol, const DistortionField& field, SampleFn sample) {
    if (!(vol.geom.dims == field.geometry.dims) || !(vol.geom.spacing == field.geometry.spacing) ||
        !(vol.geom.origin == field.geometry.origin))
        throw GeometryError("volume geometry does not match distortion field");
    VolT out(vol.geom);
    const VolumeGeometry& g = vol.geom;
    size_t idx = 0;
    for (int k = 0; k < g.dims.z; ++k)
        for (int j = 0; j < g.dims.y; ++j)
            for (int i = 0; i < g.dims.x; ++i, ++idx) {
                const Vec3d p = g.position(i, j, k);
                const Vec3d d = field.displacement_at(p);
                const double u = (p.x + d.x - g.origin.x) / g.spacing.x;
                const double v = (p.y + d.y - g.origin.y) / g.spacing.y;
                const double w = (p.z + d.z - g.origin.z) / g.spacing.z;
                out.data[idx] = sample(vol, u, v, w);
            }
    return out;
}

}  // namespace

ScalarVolume warp(const ScalarVolume& vol, const DistortionField& field) {
    return warp_impl(vol, field, [](const ScalarVolume& v, double u, double vv, double w) {
        return static_cast<float>(sample_trilinear(v, u, vv, w));
    });
}

LabelVolume warp(const LabelVolume& vol, const DistortionField& field) {
    return warp_impl(vol, field, [](const LabelVolume& v, double u, double vv, double w) {
        return sample_nearest(v, u, vv, w);
    });
}

namespace {

template <typename VolT>
VolT flip_impl(const VolT& vol, int axis) {
    if (axis < 0 || axis > 2) throw ConfigError("flip axis must be 0, 1 or 2");
    VolT out(vol.geom);
    const Vec3i d = vol.geom.dims;
    size_t idx = 0;
    for (int k = 0; k < d.z; ++k)
        for (int j = 0; j < d.y; ++j)
            for (int i = 0; i < d.x; ++i, ++idx) {
                const int si = axis == 0 ? d.x - 1 - i : i;
                const int sj = axis == 1 ? d.y - 1 - j : j;
                const int sk = axis == 2 ? d.z - 1 - k : k;
                out.data[idx] = vol.at(si, sj, sk);
            }
    return out;
}

}  // namespace

ScalarVolume flip_volume(const ScalarVolume& vol, int axis) { return flip_impl(vol, axis); }
LabelVolume flip_volume(const LabelVolume& vol, int axis) { return flip_impl(vol, axis); }

std::pair<ScalarVolume, LabelVolume> random_flip(const ScalarVolume& image,
                                                 const LabelVolume& labels, int axes_mask,
                                                 uint64_t seed) {
    if (!(image.geom.dims == labels.geom.dims))
        throw GeometryError("image/label dims differ in random_flip");
    ScalarVolume img = image;
    LabelVolume lbl = labels;
    Rng rng(seed);
    for (int axis = 0; axis < 3; ++axis) {
        if (!(axes_mask & (1 << axis))) continue;
        if (!rng.bernoulli(0.5)) continue;
        img = flip_volume(img, axis);
        lbl = flip_volume(lbl, axis);
    }
    return {std::move(img), std::move(lbl)};
}

}  // namespace sseg
