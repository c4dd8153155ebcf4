#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "sseg/metrics.hpp"
#include "sseg/rng.hpp"
#include "sseg/volume.hpp"

using namespace sseg;

namespace {

LabelVolume blank(const Vec3i& dims, const Vec3d& spacing = {1.0, 1.0, 1.0}) {
    return LabelVolume(VolumeGeometry{dims, spacing, {0.0, 0.0, 0.0}});
}

// All-pairs nearest-surface distances using the same canonical expression as
// the transform's final recompute: wx*dx^2 + (wy*dy^2 + wz*dz^2), then sqrt.
std::vector<double> brute_directed(const LabelVolume& from, const LabelVolume& to, Target t) {
    const auto src = surface_voxels(from, t);
    const auto dst = surface_voxels(to, t);
    const Vec3i d = from.geom.dims;
    const Vec3d sp = from.geom.spacing;
    const double wx = sp.x * sp.x, wy = sp.y * sp.y, wz = sp.z * sp.z;
    const size_t plane = static_cast<size_t>(d.x) * d.y;
    std::vector<double> out;
    out.reserve(src.size());
    for (size_t p : src) {
        const int px = static_cast<int>(p % d.x), py = static_cast<int>((p / d.x) % d.y),
                  pz = static_cast<int>(p / plane);
        double best = std::numeric_limits<double>::infinity();
        for (size_t s : dst) {
            const int sx = static_cast<int>(s % d.x), sy = static_cast<int>((s / d.x) % d.y),
                      sz = static_cast<int>(s / plane);
            const double dx = px - sx, dy = py - sy, dz = pz - sz;
            const double sq = wx * (dx * dx) + (wy * (dy * dy) + wz * (dz * dz));
            best = std::min(best, sq);
        }
        out.push_back(std::sqrt(best));
    }
    return out;
}

double brute_hausdorff(const LabelVolume& a, const LabelVolume& b, Target t) {
    const auto ab = brute_directed(a, b, t);
    const auto ba = brute_directed(b, a, t);
    const double ma = *std::max_element(ab.begin(), ab.end());
    const double mb = *std::max_element(ba.begin(), ba.end());
    return std::max(ma, mb);
}

double brute_asd(const LabelVolume& a, const LabelVolume& b, Target t) {
    const auto ab = brute_directed(a, b, t);
    const auto ba = brute_directed(b, a, t);
    double sum = 0.0;
    for (double v : ab) sum += v;
    for (double v : ba) sum += v;
    return sum / static_cast<double>(ab.size() + ba.size());
}

}  // namespace

TEST_CASE("dice matches hand-counted overlap") {
    auto a = blank({4, 4, 1});
    auto b = blank({4, 4, 1});
    // |A| = 4, |B| = 6, |A ∩ B| = 3  ->  2*3 / 10 = 0.6
    for (int i = 0; i < 4; ++i) a.data[i] = kHumerus;
    for (int i = 1; i < 7; ++i) b.data[i] = kHumerus;
    const auto d = dice(a, b, Target::Humerus);
    CHECK(d.defined);
    CHECK(d.value == doctest::Approx(0.6));
    // The scapula channel is empty on both sides.
    const auto ds = dice(a, b, Target::Scapula);
    CHECK_FALSE(ds.defined);
    CHECK(ds.value == 1.0);
}

TEST_CASE("both-target pools the two bone classes") {
    auto a = blank({3, 1, 1});
    auto b = blank({3, 1, 1});
    a.data = {kHumerus, kScapula, kBackground};
    b.data = {kScapula, kScapula, kBackground};
    CHECK(dice(a, b, Target::Both).value == doctest::Approx(1.0));
    CHECK(dice(a, b, Target::Humerus).value == doctest::Approx(0.0));
}

TEST_CASE("a solid cube's surface excludes only its interior") {
    auto v = blank({5, 5, 5});
    for (int z = 1; z <= 3; ++z)
        for (int y = 1; y <= 3; ++y)
            for (int x = 1; x <= 3; ++x) v.at(x, y, z) = kHumerus;
    const auto surf = surface_voxels(v, Target::Humerus);
    CHECK(surf.size() == 26);  // 27 voxels minus the center
    const size_t center = v.index(2, 2, 2);
    CHECK(std::find(surf.begin(), surf.end(), center) == surf.end());

    // Voxels on the grid boundary count as surface even without a
    // background neighbor inside the grid.
    auto full = blank({2, 2, 2});
    std::fill(full.data.begin(), full.data.end(), kScapula);
    CHECK(surface_voxels(full, Target::Scapula).size() == 8);
}

TEST_CASE("isolated voxel pairs give pythagorean distances") {
    auto a = blank({8, 8, 8});
    auto b = blank({8, 8, 8});
    a.at(1, 1, 1) = kHumerus;
    b.at(4, 5, 1) = kHumerus;  // offset (3, 4, 0) -> distance 5
    CHECK(hausdorff(a, b, Target::Humerus) == doctest::Approx(5.0));
    CHECK(asd(a, b, Target::Humerus) == doctest::Approx(5.0));

    auto c = blank({4, 4, 4}, {2.0, 3.0, 6.0});
    auto d = blank({4, 4, 4}, {2.0, 3.0, 6.0});
    c.at(0, 0, 0) = kScapula;
    d.at(1, 1, 1) = kScapula;  // sqrt(4 + 9 + 36) = 7 in millimetres
    CHECK(hausdorff(c, d, Target::Scapula) == doctest::Approx(7.0));
}

TEST_CASE("identical masks have zero surface distance and unit overlap") {
    auto v = blank({6, 6, 6});
    for (int z = 2; z < 5; ++z)
        for (int y = 1; y < 4; ++y)
            for (int x = 2; x < 4; ++x) v.at(x, y, z) = kHumerus;
    CHECK(dice(v, v, Target::Humerus).value == 1.0);
    CHECK(hausdorff(v, v, Target::Humerus) == 0.0);
    CHECK(asd(v, v, Target::Humerus) == 0.0);
}

TEST_CASE("transform distances match the all-pairs oracle") {
    Rng rng(321);
    int compared = 0;
    for (int trial = 0; trial < 40; ++trial) {
        const Vec3i dims{2 + static_cast<int>(rng.below(11)), 2 + static_cast<int>(rng.below(11)),
                         2 + static_cast<int>(rng.below(11))};
        const Vec3d sp{rng.uniform(0.3, 3.0), rng.uniform(0.3, 3.0), rng.uniform(0.3, 3.0)};
        auto a = blank(dims, sp);
        auto b = blank(dims, sp);
        const double pa = rng.uniform(0.1, 0.6), pb = rng.uniform(0.1, 0.6);
        for (auto& v : a.data) v = rng.bernoulli(pa) ? kHumerus : kBackground;
        for (auto& v : b.data) v = rng.bernoulli(pb) ? kHumerus : kBackground;
        if (surface_voxels(a, Target::Humerus).empty() ||
            surface_voxels(b, Target::Humerus).empty())
            continue;

        // Hausdorff agrees bitwise; directed distances agree elementwise.
        CHECK(hausdorff(a, b, Target::Humerus) == brute_hausdorff(a, b, Target::Humerus));
        CHECK(asd(a, b, Target::Humerus) ==
              doctest::Approx(brute_asd(a, b, Target::Humerus)).epsilon(1e-12));
        const auto got = directed_surface_distances(a, b, Target::Humerus);
        const auto want = brute_directed(a, b, Target::Humerus);
        REQUIRE(got.size() == want.size());
        for (size_t i = 0; i < got.size(); ++i) CHECK(got[i] == want[i]);
        ++compared;
    }
    CHECK(compared >= 30);  // the suite must not silently skip everything
}

TEST_CASE("hausdorff percentile uses nearest-rank on each direction") {
    auto a = blank({12, 1, 1});
    auto b = blank({12, 1, 1});
    a.at(0, 0, 0) = kHumerus;
    a.at(9, 0, 0) = kHumerus;
    b.at(0, 0, 0) = kHumerus;
    // Directed a->b distances {0, 9}; b->a {0}.
    CHECK(hausdorff(a, b, Target::Humerus, 100.0) == doctest::Approx(9.0));
    CHECK(hausdorff(a, b, Target::Humerus, 50.0) == doctest::Approx(0.0));
    CHECK(hausdorff(a, b, Target::Humerus, 75.0) == doctest::Approx(9.0));
    CHECK_THROWS_AS(hausdorff(a, b, Target::Humerus, 0.0), NumericError);
    CHECK_THROWS_AS(hausdorff(a, b, Target::Humerus, 101.0), NumericError);
}

TEST_CASE("surface metrics refuse empty surfaces; evaluate_case flags them") {
    auto empty = blank({4, 4, 4});
    auto full = blank({4, 4, 4});
    full.at(1, 1, 1) = kHumerus;
    CHECK_THROWS_AS(hausdorff(empty, full, Target::Humerus), NumericError);
    CHECK_THROWS_AS(asd(full, empty, Target::Humerus), NumericError);

    const auto rep = evaluate_case(empty, empty, "case");
    CHECK(rep.humerus.dsc.value == 1.0);
    CHECK_FALSE(rep.humerus.dsc.defined);
    CHECK_FALSE(rep.humerus.hd.defined);
    CHECK_FALSE(rep.humerus.asd.defined);

    const auto half = evaluate_case(empty, full, "case");
    CHECK(half.humerus.dsc.value == 0.0);
    CHECK(half.humerus.dsc.defined);
    CHECK_FALSE(half.humerus.hd.defined);
}

TEST_CASE("uniform spacing scale multiplies surface metrics and fixes dice") {
    Rng rng(9);
    auto a = blank({10, 9, 8});
    auto b = blank({10, 9, 8});
    for (auto& v : a.data) v = rng.bernoulli(0.3) ? kScapula : kBackground;
    for (auto& v : b.data) v = rng.bernoulli(0.3) ? kScapula : kBackground;
    REQUIRE_FALSE(surface_voxels(a, Target::Scapula).empty());
    REQUIRE_FALSE(surface_voxels(b, Target::Scapula).empty());

    const double s = 3.5;
    auto a2 = a;
    auto b2 = b;
    a2.geom.spacing = {s, s, s};
    b2.geom.spacing = {s, s, s};

    CHECK(hausdorff(a2, b2, Target::Scapula) ==
          doctest::Approx(s * hausdorff(a, b, Target::Scapula)).epsilon(1e-12));
    CHECK(asd(a2, b2, Target::Scapula) ==
          doctest::Approx(s * asd(a, b, Target::Scapula)).epsilon(1e-12));
    CHECK(dice(a2, b2, Target::Scapula).value == dice(a, b, Target::Scapula).value);
}

TEST_CASE("metric kernels reject mismatched geometries") {
    auto a = blank({4, 4, 4});
    auto b = blank({4, 4, 2});
    CHECK_THROWS_AS(dice(a, b, Target::Humerus), GeometryError);
    auto c = blank({4, 4, 4}, {1.0, 1.0, 2.0});
    CHECK_THROWS_AS(evaluate_case(a, c), GeometryError);
}

TEST_CASE("aggregate averages defined entries and counts exclusions") {
    auto empty = blank({4, 4, 4});
    auto one = blank({4, 4, 4});
    one.at(0, 0, 0) = kHumerus;
    std::vector<MetricsReport> reps = {evaluate_case(one, one, "a"),
                                       evaluate_case(empty, one, "b")};
    const auto agg = aggregate(reps);
    CHECK(agg.cases == 2);
    // dsc defined on both: mean of 1.0 and 0.0.
    CHECK(agg.mean.humerus.dsc.value == doctest::Approx(0.5));
    // hd defined only on the identical pair.
    CHECK(agg.mean.humerus.hd.value == doctest::Approx(0.0));
    CHECK(agg.undefined_count[0][1] == 1);
    CHECK(agg.undefined_count[0][2] == 1);
    // Scapula never appears: dsc flagged undefined everywhere.
    CHECK_FALSE(agg.mean.scapula.dsc.defined);
    CHECK(agg.undefined_count[1][0] == 2);
}

TEST_CASE("csv output sorts cases and spells the defined column") {
    auto one = blank({4, 4, 4});
    one.at(0, 0, 0) = kHumerus;
    auto empty = blank({4, 4, 4});
    std::vector<MetricsReport> reps = {evaluate_case(one, one, "zeta"),
                                       evaluate_case(empty, empty, "alpha")};
    const std::string csv = reports_to_csv(reps);
    CHECK(csv.find("case_id,target,dsc,hd,asd,defined\n") == 0);
    const auto alpha = csv.find("alpha,humerus");
    const auto zeta = csv.find("zeta,humerus");
    REQUIRE(alpha != std::string::npos);
    REQUIRE(zeta != std::string::npos);
    CHECK(alpha < zeta);
    CHECK(csv.find("alpha,humerus,1,nan,nan,none") != std::string::npos);
    CHECK(csv.find("zeta,humerus,1,0,0,all") != std::string::npos);
    CHECK(csv.find("zeta,scapula,1,nan,nan,none") != std::string::npos);
}
