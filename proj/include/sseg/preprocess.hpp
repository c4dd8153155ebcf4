#pragma once

#include "sseg/volume.hpp"

namespace sseg {

// Grid with the requested spacing covering the volume's physical extent
// (same origin; dims rounded from the extent, at least 1).
VolumeGeometry resampled_geometry(const VolumeGeometry& source, const Vec3d& spacing);

// Protocol preprocessing: resample to the target spacing, center crop/pad to
// the target dims, then min-max normalize (images only). Running it on an
// already-preprocessed volume is a bit-exact identity.
ScalarVolume preprocess_image(const ScalarVolume& vol, const Vec3d& spacing, const Vec3i& dims);
LabelVolume preprocess_labels(const LabelVolume& lbl, const Vec3d& spacing, const Vec3i& dims);

}  // namespace sseg
