#include "sseg/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "sseg/error.hpp"

namespace sseg {

VolumeGeometry resampled_geometry(const VolumeGeometry& source, const Vec3d& spacing) {
    if (!(spacing.x > 0.0) || !(spacing.y > 0.0) || !(spacing.z > 0.0))
        throw GeometryError("target spacing must be positive");
    auto dim = [](int n, double s_old, double s_new) {
        const double extent = (n - 1) * s_old;
        return std::max(1, static_cast<int>(std::lround(extent / s_new)) + 1);
    };
    VolumeGeometry target;
    target.dims = {dim(source.dims.x, source.spacing.x, spacing.x),
                   dim(source.dims.y, source.spacing.y, spacing.y),
                   dim(source.dims.z, source.spacing.z, spacing.z)};
    target.spacing = spacing;
    target.origin = source.origin;
    return target;
}

ScalarVolume preprocess_image(const ScalarVolume& vol, const Vec3d& spacing, const Vec3i& dims) {
    ScalarVolume resampled = resample_trilinear(vol, resampled_geometry(vol.geom, spacing));
    ScalarVolume sized = crop_or_pad_centered(resampled, dims);
    return normalize_min_max(sized);
}

LabelVolume preprocess_labels(const LabelVolume& lbl, const Vec3d& spacing, const Vec3i& dims) {
    LabelVolume resampled = resample_nearest(lbl, resampled_geometry(lbl.geom, spacing));
    return crop_or_pad_centered(resampled, dims);
}

}  // namespace sseg
