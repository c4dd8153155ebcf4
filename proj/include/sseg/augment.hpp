#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "sseg/volume.hpp"

namespace sseg {

// Smooth elastic distortion: i.i.d. Gaussian displacements (mm) on a coarse
// control grid, interpolated trilinearly over the volume extent. Zero
// magnitude yields the zero field.
struct DistortionField {
    VolumeGeometry geometry;       // grid the field applies to
    double control_spacing = 0.0;  // mm between control nodes
    double magnitude = 0.0;        // sigma of node displacements (mm)
    Vec3i nodes;                   // control grid dims
    std::vector<double> dx, dy, dz;  // per-node displacement components (mm)

    // Displacement at an absolute physical position (mm), edge-clamped to
    // the control grid.
    Vec3d displacement_at(const Vec3d& p) const;
};

// Throws ConfigError when sigma < 0 or control_spacing <= 0.
DistortionField sample_distortion(const VolumeGeometry& geometry, double sigma,
                                  double control_spacing, uint64_t seed);

// Backward warping: each output voxel samples the input at its displaced
// physical position. Scalars interpolate trilinearly, labels take the
// nearest voxel; positions outside the extent clamp to the edge. Throws
// GeometryError when the volume does not match the field's grid.
ScalarVolume warp(const ScalarVolume& vol, const DistortionField& field);
LabelVolume warp(const LabelVolume& vol, const DistortionField& field);

// Mirror along one axis (0 = x, 1 = y, 2 = z); an involution.
ScalarVolume flip_volume(const ScalarVolume& vol, int axis);
LabelVolume flip_volume(const LabelVolume& vol, int axis);

// Flips the pair with one 50/50 decision per axis allowed by the mask
// (bit 0 = x, bit 1 = y, bit 2 = z); both members get the same decisions.
std::pair<ScalarVolume, LabelVolume> random_flip(const ScalarVolume& image,
                                                 const LabelVolume& labels, int axes_mask,
                                                 uint64_t seed);

}  // namespace sseg
