#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "sseg/volume.hpp"

namespace sseg {

// Range helper for per-case randomization. lo == hi pins the value.
struct Range {
    double lo = 0.0, hi = 0.0;
    bool operator==(const Range&) const = default;
};

// Synthetic shoulder-like scene: one compact ball-and-shaft bone (humerus
// analogue, class 1) and one thin spiny plate (scapula analogue, class 2)
// in an MR-like intensity field.
struct PhantomSpec {
    VolumeGeometry geometry{{48, 48, 32}, {1.0, 1.0, 1.0}, {0.0, 0.0, 0.0}};

    // Humerus analogue, millimetres. Center fractions are relative to the
    // volume extent.
    Range head_radius{5.5, 7.0};
    Range shaft_radius{2.2, 3.2};
    Range shaft_length{10.0, 16.0};
    Range head_cx{0.28, 0.36};  // fraction of x extent
    Range head_cy{0.30, 0.42};
    Range head_cz{0.52, 0.62};
    Range shaft_tilt{-0.25, 0.25};  // radians off the -z axis, in the x-z plane

    // Scapula analogue, millimetres / fractions.
    Range plate_thickness{2.0, 3.2};
    Range plate_x{0.66, 0.74};     // plate center plane, fraction of x extent
    Range plate_tilt{-0.12, 0.12};  // radians, rotation of the plate normal
    Range plate_y_lo{0.18, 0.26};
    Range plate_y_hi{0.74, 0.84};
    Range plate_z_lo{0.16, 0.26};
    Range plate_z_hi{0.72, 0.84};
    Range spine_radius{1.6, 2.4};   // spine protrusion radius
    Range spine_length{4.0, 7.0};   // how far it sticks out of the plate (+x)
    Range spine_z{0.40, 0.60};      // protrusion position along z, fraction of plate span

    // Intensity model. Class means are drawn once per case from
    // N(mean, std); the bias field is multiplicative and low-frequency.
    double background_mean = 0.35, background_std = 0.04;
    double humerus_mean = 0.72, humerus_std = 0.05;
    double scapula_mean = 0.66, scapula_std = 0.05;
    double bias_amplitude = 0.25;      // bias = 1 + A * smooth field in [-1,1]
    double bias_spacing_mm = 24.0;     // control spacing of the bias grid
    double noise_std = 0.06;           // additive Gaussian, before normalization

    uint64_t seed = 0;
};

// Per-slice label degradation emulating imperfect manual annotation.
// Every effect scales with severity; severity 0 is the identity.
struct CorruptionSpec {
    double severity = 0.5;       // in [0, 1]
    double jitter_radius = 2.0;  // max in-plane dilation/erosion radius, voxels
    double slice_dropout = 0.3;  // per-slice, per-class dropout probability at severity 1
    double flip_prob = 0.2;      // boundary voxel flip probability at severity 1
    uint64_t seed = 0;
};

std::pair<ScalarVolume, LabelVolume> generate_phantom(const PhantomSpec& spec);

LabelVolume corrupt_labels(const LabelVolume& clean, const CorruptionSpec& spec);

struct BenchmarkCase {
    std::string case_id;
    std::filesystem::path image;      // float32 volume
    std::filesystem::path corrupted;  // training labels
    std::filesystem::path clean;      // reference labels
    uint64_t seed = 0;
};

// Writes n phantom cases (image + corrupted GT + clean reference) plus
// manifest.csv into out_dir. Shape and intensity parameters are
// re-randomized per case from the spec ranges.
std::vector<BenchmarkCase> generate_benchmark(int n_cases, const PhantomSpec& spec,
                                              const CorruptionSpec& corruption,
                                              const std::filesystem::path& out_dir);

// Benchmark manifest CSV: case_id,image,corrupted,clean,seed with paths
// relative to the manifest location.
void write_benchmark_manifest(const std::vector<BenchmarkCase>& cases,
                              const std::filesystem::path& manifest_path);
std::vector<BenchmarkCase> read_benchmark_manifest(const std::filesystem::path& manifest_path);

}  // namespace sseg
