#include "sseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "sseg/error.hpp"

namespace sseg {

const char* target_name(Target t) {
    switch (t) {
        case Target::Humerus: return "humerus";
        case Target::Scapula: return "scapula";
        case Target::Both: return "both";
    }
    return "?";
}

std::vector<Target> all_targets() { return {Target::Humerus, Target::Scapula, Target::Both}; }

TargetMetrics& MetricsReport::for_target(Target t) {
    switch (t) {
        case Target::Humerus: return humerus;
        case Target::Scapula: return scapula;
        default: return both;
    }
}

const TargetMetrics& MetricsReport::for_target(Target t) const {
    return const_cast<MetricsReport*>(this)->for_target(t);
}

std::vector<uint8_t> target_mask(const LabelVolume& lbl, Target t) {
    std::vector<uint8_t> mask(lbl.data.size());
    for (size_t i = 0; i < lbl.data.size(); ++i) {
        const uint8_t v = lbl.data[i];
        switch (t) {
            case Target::Humerus: mask[i] = (v == kHumerus); break;
            case Target::Scapula: mask[i] = (v == kScapula); break;
            case Target::Both: mask[i] = (v == kHumerus || v == kScapula); break;
        }
    }
    return mask;
}

namespace {

void require_same_geometry(const LabelVolume& a, const LabelVolume& b) {
    if (!(a.geom == b.geom)) throw GeometryError("label volumes have different geometries");
}

}  // namespace

MetricEntry dice(const LabelVolume& a, const LabelVolume& b, Target t) {
    require_same_geometry(a, b);
    const auto ma = target_mask(a, t);
    const auto mb = target_mask(b, t);
    size_t na = 0, nb = 0, inter = 0;
    for (size_t i = 0; i < ma.size(); ++i) {
        na += ma[i];
        nb += mb[i];
        inter += static_cast<size_t>(ma[i] & mb[i]);
    }
    if (na == 0 && nb == 0) return {1.0, false};  // equal-but-empty, flagged
    if (na == 0 || nb == 0) return {0.0, true};
    return {2.0 * static_cast<double>(inter) / static_cast<double>(na + nb), true};
}

std::vector<size_t> surface_voxels(const LabelVolume& lbl, Target t) {
    const auto mask = target_mask(lbl, t);
    const Vec3i d = lbl.geom.dims;
    std::vector<size_t> surface;
    size_t idx = 0;
    for (int z = 0; z < d.z; ++z)
        for (int y = 0; y < d.y; ++y)
            for (int x = 0; x < d.x; ++x, ++idx) {
                if (!mask[idx]) continue;
                const bool border =
                    x == 0 || !mask[idx - 1] || x == d.x - 1 || !mask[idx + 1] ||
                    y == 0 || !mask[idx - d.x] || y == d.y - 1 || !mask[idx + d.x] ||
                    z == 0 || !mask[idx - static_cast<size_t>(d.x) * d.y] ||
                    z == d.z - 1 || !mask[idx + static_cast<size_t>(d.x) * d.y];
                if (border) surface.push_back(idx);
            }
    return surface;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One pass of the lower-envelope (Felzenszwalb-Huttenlocher) squared
// distance transform along a line. f holds current squared distances,
// site the propagated nearest-site id per sample. w is spacing^2 on this
// axis, n the line length, stride walks the flat arrays. Positions still at
// infinity (no site reachable yet) are skipped as envelope candidates.
void envelope_pass(double* f, int* site, int n, size_t stride, double w, std::vector<int>& v,
                   std::vector<double>& z, std::vector<double>& fv, std::vector<int>& sv) {
    v.resize(n);
    fv.resize(n);
    sv.resize(n);
    z.resize(n + 1);
    int k = -1;  // index of the rightmost parabola in the envelope
    for (int q = 0; q < n; ++q) {
        const double fq = f[q * stride];
        if (fq == kInf) continue;
        double s = 0.0;
        while (k >= 0) {
            const int p = v[k];
            // Intersection of the parabolas rooted at p and q.
            s = ((fq + w * (static_cast<double>(q) * q)) - (fv[k] + w * (static_cast<double>(p) * p))) /
                (2.0 * w * (q - p));
            if (s > z[k]) break;
            --k;
        }
        ++k;
        v[k] = q;
        fv[k] = fq;
        sv[k] = site[q * stride];
        z[k] = (k == 0) ? -kInf : s;
        z[k + 1] = kInf;
    }
    if (k < 0) return;  // whole line stays at infinity
    int j = 0;
    for (int q = 0; q < n; ++q) {
        while (z[j + 1] < q) ++j;
        const double dq = q - v[j];
        f[q * stride] = w * (dq * dq) + fv[j];
        site[q * stride] = sv[j];
    }
}

}  // namespace

std::vector<double> directed_surface_distances(const LabelVolume& from, const LabelVolume& to,
                                               Target t) {
    require_same_geometry(from, to);
    const auto src = surface_voxels(from, t);
    const auto dst = surface_voxels(to, t);
    if (src.empty() || dst.empty())
        throw NumericError(std::string("empty target surface for ") + target_name(t));

    const Vec3i d = from.geom.dims;
    const Vec3d sp = from.geom.spacing;
    const size_t n = from.geom.voxel_count();
    const size_t plane = static_cast<size_t>(d.x) * d.y;

    // Squared-distance transform seeded at the destination surface, with
    // nearest-site propagation so final distances can be recomputed in one
    // canonical expression (this keeps them bit-identical to a pairwise
    // evaluation of the same formula).
    std::vector<double> f(n, kInf);
    std::vector<int> site(n, -1);
    for (size_t s : dst) {
        f[s] = 0.0;
        site[s] = static_cast<int>(s);
    }

    std::vector<int> v;
    std::vector<double> zb, fv;
    std::vector<int> sv;
    const double wx = sp.x * sp.x, wy = sp.y * sp.y, wz = sp.z * sp.z;

    for (int y = 0; y < d.y; ++y)  // z lines
        for (int x = 0; x < d.x; ++x)
            envelope_pass(f.data() + x + static_cast<size_t>(d.x) * y, site.data() + x + static_cast<size_t>(d.x) * y,
                          d.z, plane, wz, v, zb, fv, sv);
    for (int z = 0; z < d.z; ++z)  // y lines
        for (int x = 0; x < d.x; ++x)
            envelope_pass(f.data() + x + plane * z, site.data() + x + plane * z, d.y, d.x, wy, v, zb,
                          fv, sv);
    for (int z = 0; z < d.z; ++z)  // x lines
        for (int y = 0; y < d.y; ++y)
            envelope_pass(f.data() + static_cast<size_t>(d.x) * y + plane * z,
                          site.data() + static_cast<size_t>(d.x) * y + plane * z, d.x, 1, wx, v, zb,
                          fv, sv);

    // Canonical recompute from the winning site: dz term innermost, then y,
    // then x, matching the oracle expression exactly.
    std::vector<double> result;
    result.reserve(src.size());
    for (size_t p : src) {
        const int s = site[p];
        const int px = static_cast<int>(p % d.x), py = static_cast<int>((p / d.x) % d.y),
                  pz = static_cast<int>(p / plane);
        const int sx = static_cast<int>(s % d.x), sy = static_cast<int>((s / d.x) % d.y),
                  sz = static_cast<int>(s / plane);
        const double dx = px - sx, dy = py - sy, dz = pz - sz;
        const double sq = wx * (dx * dx) + (wy * (dy * dy) + wz * (dz * dz));
        result.push_back(std::sqrt(sq));
    }
    return result;
}

namespace {

double percentile_of(std::vector<double> values, double percentile) {
    std::sort(values.begin(), values.end());
    if (percentile >= 100.0) return values.back();
    // Nearest-rank definition.
    const size_t rank = static_cast<size_t>(std::ceil(percentile / 100.0 * values.size()));
    return values[std::max<size_t>(rank, 1) - 1];
}

}  // namespace

double hausdorff(const LabelVolume& a, const LabelVolume& b, Target t, double percentile) {
    if (!(percentile > 0.0) || percentile > 100.0)
        throw NumericError("hausdorff percentile must be in (0, 100]");
    const auto ab = directed_surface_distances(a, b, t);
    const auto ba = directed_surface_distances(b, a, t);
    return std::max(percentile_of(ab, percentile), percentile_of(ba, percentile));
}

double asd(const LabelVolume& a, const LabelVolume& b, Target t) {
    const auto ab = directed_surface_distances(a, b, t);
    const auto ba = directed_surface_distances(b, a, t);
    double sum = 0.0;
    for (double v : ab) sum += v;
    for (double v : ba) sum += v;
    return sum / static_cast<double>(ab.size() + ba.size());
}

MetricsReport evaluate_case(const LabelVolume& pred, const LabelVolume& truth,
                            const std::string& case_id) {
    require_same_geometry(pred, truth);
    MetricsReport r;
    r.case_id = case_id;
    for (Target t : all_targets()) {
        TargetMetrics& m = r.for_target(t);
        m.dsc = dice(pred, truth, t);
        try {
            m.hd = {hausdorff(pred, truth, t), true};
            m.asd = {asd(pred, truth, t), true};
        } catch (const NumericError&) {
            m.hd = {std::numeric_limits<double>::quiet_NaN(), false};
            m.asd = {std::numeric_limits<double>::quiet_NaN(), false};
        }
    }
    return r;
}

AggregateReport aggregate(const std::vector<MetricsReport>& reports) {
    AggregateReport agg;
    agg.cases = static_cast<int>(reports.size());
    agg.mean.case_id = "mean";
    int ti = 0;
    for (Target t : all_targets()) {
        double sums[3] = {0, 0, 0};
        int counts[3] = {0, 0, 0};
        for (const auto& rep : reports) {
            const TargetMetrics& m = rep.for_target(t);
            const MetricEntry* entries[3] = {&m.dsc, &m.hd, &m.asd};
            for (int k = 0; k < 3; ++k) {
                if (entries[k]->defined) {
                    sums[k] += entries[k]->value;
                    ++counts[k];
                } else {
                    ++agg.undefined_count[ti][k];
                }
            }
        }
        TargetMetrics& out = agg.mean.for_target(t);
        MetricEntry* outs[3] = {&out.dsc, &out.hd, &out.asd};
        for (int k = 0; k < 3; ++k) {
            if (counts[k] > 0)
                *outs[k] = {sums[k] / counts[k], true};
            else
                *outs[k] = {std::numeric_limits<double>::quiet_NaN(), false};
        }
        ++ti;
    }
    return agg;
}

namespace {

std::string format_metric(const MetricEntry& e) {
    if (!std::isfinite(e.value)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", e.value);
    return buf;
}

void append_report_rows(std::ostringstream& out, const MetricsReport& r) {
    for (Target t : all_targets()) {
        const TargetMetrics& m = r.for_target(t);
        const char* flag = "all";
        if (!m.dsc.defined)
            flag = "none";
        else if (!m.hd.defined || !m.asd.defined)
            flag = "dsc_only";
        out << r.case_id << ',' << target_name(t) << ',' << format_metric(m.dsc) << ','
            << format_metric(m.hd) << ',' << format_metric(m.asd) << ',' << flag << '\n';
    }
}

}  // namespace

std::string reports_to_csv(const std::vector<MetricsReport>& reports) {
    std::vector<const MetricsReport*> ordered;
    ordered.reserve(reports.size());
    for (const auto& r : reports) ordered.push_back(&r);
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const MetricsReport* a, const MetricsReport* b) { return a->case_id < b->case_id; });

    std::ostringstream out;
    out << "case_id,target,dsc,hd,asd,defined\n";
    for (const auto* r : ordered) append_report_rows(out, *r);
    return out.str();
}

std::string aggregate_to_csv_row(const AggregateReport& agg) {
    std::ostringstream out;
    append_report_rows(out, agg.mean);
    return out.str();
}

}  // namespace sseg
