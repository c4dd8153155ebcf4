#pragma once

#include <algorithm>
#include <vector>

#include "sseg/volume.hpp"

namespace sseg {

// Channel-major activation tensor over a voxel grid: data[c][z][y][x],
// x fastest. The per-channel block is exactly the canonical volume layout,
// so channel c is a ready-made row of a (channels x voxels) matrix.
struct Tensor {
    int channels = 0;
    Vec3i dims;
    std::vector<double> data;

    Tensor() = default;
    Tensor(int c, const Vec3i& d)
        : channels(c), dims(d), data(static_cast<size_t>(c) * volume_size(d), 0.0) {}

    static size_t volume_size(const Vec3i& d) {
        return static_cast<size_t>(d.x) * static_cast<size_t>(d.y) * static_cast<size_t>(d.z);
    }

    size_t voxels() const { return volume_size(dims); }
    size_t size() const { return data.size(); }

    double* channel(int c) { return data.data() + static_cast<size_t>(c) * voxels(); }
    const double* channel(int c) const { return data.data() + static_cast<size_t>(c) * voxels(); }

    double& at(int c, int x, int y, int z) {
        return data[static_cast<size_t>(c) * voxels() + static_cast<size_t>(x) +
                    static_cast<size_t>(dims.x) * (static_cast<size_t>(y) + static_cast<size_t>(dims.y) * z)];
    }
    double at(int c, int x, int y, int z) const {
        return const_cast<Tensor*>(this)->at(c, x, y, z);
    }

    void zero() { std::fill(data.begin(), data.end(), 0.0); }

    void release() {
        data.clear();
        data.shrink_to_fit();
    }
};

}  // namespace sseg
