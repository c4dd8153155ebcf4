#pragma once

#include <string>
#include <vector>

#include "sseg/volume.hpp"

namespace sseg {

// Evaluation targets. Both = union of humerus and scapula treated as one
// foreground.
enum class Target { Humerus, Scapula, Both };

const char* target_name(Target t);
std::vector<Target> all_targets();

struct MetricEntry {
    double value = 0.0;
    bool defined = false;
};

struct TargetMetrics {
    MetricEntry dsc;  // unitless
    MetricEntry hd;   // mm
    MetricEntry asd;  // mm
};

struct MetricsReport {
    std::string case_id;
    TargetMetrics humerus, scapula, both;

    TargetMetrics& for_target(Target t);
    const TargetMetrics& for_target(Target t) const;
};

// Aggregate over defined entries only; undefined_count tracks exclusions.
struct AggregateReport {
    MetricsReport mean;                          // case_id = "mean"
    int cases = 0;
    int undefined_count[3][3] = {};              // [target][metric: dsc,hd,asd]
};

// Binary mask of a target, used by the metric kernels and tests.
std::vector<uint8_t> target_mask(const LabelVolume& lbl, Target t);

// 2|A∩B| / (|A|+|B|). Both masks empty: 1.0 but flagged undefined.
// Exactly one empty: 0.0.
MetricEntry dice(const LabelVolume& a, const LabelVolume& b, Target t);

// Foreground voxels with a 6-connected background (or out-of-grid) neighbor.
// Returned as linear voxel indices in canonical order.
std::vector<size_t> surface_voxels(const LabelVolume& lbl, Target t);

// Directed distances (mm, center-to-center) from every surface voxel of
// `from` to the nearest surface voxel of `to`, via an exact anisotropic
// Euclidean distance transform. Order follows surface_voxels(from).
std::vector<double> directed_surface_distances(const LabelVolume& from, const LabelVolume& to,
                                               Target t);

// Hausdorff distance in mm; percentile in (0,100], 100 = exact maximum,
// taken as the max of the two directed percentiles.
// Throws NumericError when either surface is empty.
double hausdorff(const LabelVolume& a, const LabelVolume& b, Target t, double percentile = 100.0);

// Symmetric average surface distance in mm.
double asd(const LabelVolume& a, const LabelVolume& b, Target t);

MetricsReport evaluate_case(const LabelVolume& pred, const LabelVolume& truth,
                            const std::string& case_id = "");

AggregateReport aggregate(const std::vector<MetricsReport>& reports);

// CSV schema: case_id,target,dsc,hd,asd,defined
// defined is one of: all (every metric defined), dsc_only (surfaces empty on
// one side), none (both masks empty). Non-finite cells print as nan; the
// defined column is authoritative for which values to trust. Rows are
// ordered by case id, then humerus/scapula/both.
std::string reports_to_csv(const std::vector<MetricsReport>& reports);
std::string aggregate_to_csv_row(const AggregateReport& agg);

}  // namespace sseg
