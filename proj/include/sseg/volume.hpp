#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "sseg/error.hpp"

namespace sseg {

struct Vec3i {
    int x = 0, y = 0, z = 0;
    bool operator==(const Vec3i&) const = default;
};

struct Vec3d {
    double x = 0.0, y = 0.0, z = 0.0;
    bool operator==(const Vec3d&) const = default;
};

// Grid dimensions plus physical anchoring. Voxel (i,j,k) sits at
// origin + (i*sx, j*sy, k*sz) in millimetres.
struct VolumeGeometry {
    Vec3i dims;
    Vec3d spacing{1.0, 1.0, 1.0};
    Vec3d origin{0.0, 0.0, 0.0};

    bool operator==(const VolumeGeometry&) const = default;

    size_t voxel_count() const {
        return static_cast<size_t>(dims.x) * static_cast<size_t>(dims.y) * static_cast<size_t>(dims.z);
    }

    Vec3d position(int i, int j, int k) const {
        return {origin.x + i * spacing.x, origin.y + j * spacing.y, origin.z + k * spacing.z};
    }

    void validate() const {
        if (dims.x < 1 || dims.y < 1 || dims.z < 1)
            throw GeometryError("dims must be >= 1, got " + std::to_string(dims.x) + "x" +
                                std::to_string(dims.y) + "x" + std::to_string(dims.z));
        if (!(spacing.x > 0.0) || !(spacing.y > 0.0) || !(spacing.z > 0.0))
            throw GeometryError("spacing must be strictly positive");
    }
};

// Dense voxel grid, row-major with x fastest: index = x + nx*(y + ny*z).
template <typename T>
struct Volume {
    VolumeGeometry geom;
    std::vector<T> data;

    Volume() = default;
    explicit Volume(const VolumeGeometry& g, T fill = T{}) : geom(g), data(g.voxel_count(), fill) {
        geom.validate();
    }

    size_t index(int x, int y, int z) const {
        return static_cast<size_t>(x) +
               static_cast<size_t>(geom.dims.x) * (static_cast<size_t>(y) + static_cast<size_t>(geom.dims.y) * static_cast<size_t>(z));
    }

    T& at(int x, int y, int z) { return data[index(x, y, z)]; }
    const T& at(int x, int y, int z) const { return data[index(x, y, z)]; }

    bool operator==(const Volume&) const = default;
};

using ScalarVolume = Volume<float>;   // intensities
using LabelVolume = Volume<uint8_t>;  // class ids

constexpr uint8_t kBackground = 0;
constexpr uint8_t kHumerus = 1;
constexpr uint8_t kScapula = 2;
constexpr int kNumClasses = 3;

// Resampling onto a new grid. Sample positions outside the source extent
// clamp to the nearest edge value.
ScalarVolume resample_trilinear(const ScalarVolume& vol, const VolumeGeometry& target);
LabelVolume resample_nearest(const LabelVolume& lbl, const VolumeGeometry& target);

// Continuous-index samplers shared with the warp code.
double sample_trilinear(const ScalarVolume& vol, double u, double v, double w);
uint8_t sample_nearest(const LabelVolume& vol, double u, double v, double w);

// Center crop / pad to target_dims. On odd surplus the extra voxel is
// dropped (or added) at the high-index side. Scalar padding uses the volume
// minimum, label padding uses class 0. Origin shifts so retained voxels
// keep their physical positions.
ScalarVolume crop_or_pad_centered(const ScalarVolume& vol, const Vec3i& target_dims);
LabelVolume crop_or_pad_centered(const LabelVolume& vol, const Vec3i& target_dims);

// (v - min) / (max - min); all zeros when the volume is constant.
ScalarVolume normalize_min_max(const ScalarVolume& vol);

}  // namespace sseg
