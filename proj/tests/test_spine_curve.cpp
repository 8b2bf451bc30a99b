#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "spinegrade/error.hpp"
#include "spinegrade/spine_curve.hpp"
#include "support.hpp"

using namespace spinegrade;
using namespace spinegrade::geom;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::Io;
}

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

double det(const std::array<Vec3, 3>& m) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

/// Seven labeled point components on the curve, spaced evenly in y.
seg::VertebraSegmentation labeled(const SpineCurve& truth, double y0, double dy) {
    seg::VertebraSegmentation s;
    for (std::size_t v = 0; v < kVertebraCount; ++v) {
        seg::Component c;
        const double y = y0 + dy * static_cast<double>(v);
        c.centroid = {truth(y), y};
        s.vertebrae.push_back({kAllVertebrae[v], c});
    }
    return s;
}

/// f(p) = c0 + g . p over world coordinates, sampled at the voxel centers.
Volume3D linear_field(Dims d, Vec3f spacing, Vec3f origin, double c0, const Vec3& g) {
    Volume3D v(d, spacing, origin);
    for (std::uint32_t k = 0; k < d.nz; ++k)
        for (std::uint32_t j = 0; j < d.ny; ++j)
            for (std::uint32_t i = 0; i < d.nx; ++i) v.at(i, j, k) = static_cast<float>(c0 + dot(g, v.world(i, j, k)));
    return v;
}

}  // namespace

TEST_CASE("noise-free centroids recover the generating polynomial") {
    const SpineCurve truth{{42.0, -0.3, 2.5e-3, -6.0e-6}};
    std::vector<Point2> pts;
    for (int v = 0; v < 7; ++v) {
        const double y = 30.0 + 33.5 * v;
        pts.push_back({truth(y), y});
    }
    std::reverse(pts.begin(), pts.end());  // input order is irrelevant
    const SpineCurve fit = fit_spine_curve(pts, 3);
    REQUIRE(fit.degree() == 3);
    for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(fit.coefficients[k] - truth.coefficients[k]) < 1e-9);
    CHECK(fit.fit_residual < 1e-9);
    CHECK(fit.y_min == 30.0);
    CHECK(fit.y_max == doctest::Approx(231.0));
    CHECK(fit.derivative(100.0) == doctest::Approx(-0.3 + 2 * 2.5e-3 * 100 - 3 * 6e-6 * 1e4));

    // A degree-2 fit of the same data leaves a residual.
    CHECK(fit_spine_curve(pts, 2).fit_residual > 1e-3);
}

TEST_CASE("least squares matches the normal-equation solution on noisy data") {
    // Quadratic fit to four points: solve the 3x3 normal equations directly as the oracle.
    const std::vector<Point2> pts{{1.0, 0.0}, {2.5, 1.0}, {2.0, 2.0}, {4.0, 3.0}};
    double m[3][4] = {};
    for (const auto& p : pts) {
        const double b[3] = {1.0, p.y, p.y * p.y};
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) m[r][c] += b[r] * b[c];
            m[r][3] += b[r] * p.x;
        }
    }
    for (int c = 0; c < 3; ++c)
        for (int r = c + 1; r < 3; ++r) {
            const double f = m[r][c] / m[c][c];
            for (int k = c; k < 4; ++k) m[r][k] -= f * m[c][k];
        }
    double x[3];
    for (int r = 2; r >= 0; --r) {
        x[r] = m[r][3];
        for (int k = r + 1; k < 3; ++k) x[r] -= m[r][k] * x[k];
        x[r] /= m[r][r];
    }
    const SpineCurve fit = fit_spine_curve(pts, 2);
    for (int k = 0; k < 3; ++k) CHECK(fit.coefficients[k] == doctest::Approx(x[k]).epsilon(1e-12));
}

TEST_CASE("ill-posed fits are rejected") {
    const std::vector<Point2> three{{0, 0}, {1, 1}, {2, 2}};
    CHECK(code_of([&] { fit_spine_curve(three, 3); }) == ErrorCode::InsufficientPoints);
    CHECK(code_of([&] { fit_spine_curve(three, 1); }) == ErrorCode::InvalidConfig);
    const std::vector<Point2> repeated{{0, 0}, {1, 1}, {2, 1}, {3, 4}};
    CHECK(code_of([&] { fit_spine_curve(repeated, 3); }) == ErrorCode::DegenerateFit);
    const std::vector<Point2> nan{{0, 0}, {1, 1}, {std::nan(""), 2}, {3, 4}};
    CHECK(code_of([&] { fit_spine_curve(nan, 3); }) == ErrorCode::NonFiniteInput);
}

TEST_CASE("disc frames sit midway between adjacent centroids with the curve's slope") {
    const SpineCurve curve{{10.0, 0.2, -1e-3, 0.0}};
    const auto seg = labeled(curve, 20.0, 30.0);
    const auto frames = locate_discs(seg, curve);
    REQUIRE(frames.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
        const DiscFrame& f = frames[i];
        CHECK(f.level == kAllDiscLevels[i]);
        const double y = 20.0 + 30.0 * i + 15.0;
        CHECK(f.disc_point.y == doctest::Approx(y));
        CHECK(f.disc_point.x == doctest::Approx(0.5 * (curve(y - 15) + curve(y + 15))));
        CHECK(f.plane_angle() == doctest::Approx(std::atan(curve.derivative(y))));
        CHECK(std::hypot(f.tangent.x, f.tangent.y) == doctest::Approx(1.0));
        CHECK(f.plane_normal.x * f.tangent.x + f.plane_normal.y * f.tangent.y == doctest::Approx(0.0));
    }
}

TEST_CASE("gaps in the labels skip the broken pairs") {
    const SpineCurve curve{{0.0, 0.0, 0.0, 0.0}};
    auto seg = labeled(curve, 0.0, 30.0);
    seg.vertebrae.erase(seg.vertebrae.begin() + 3);  // drop L3
    const auto frames = locate_discs(seg, curve);
    REQUIRE(frames.size() == 4);
    CHECK(frames[2].level == DiscLevel::L4L5);

    seg::VertebraSegmentation sparse;
    sparse.vertebrae = {seg.vertebrae[0], seg.vertebrae[2]};  // T12 and L2
    CHECK(code_of([&] { locate_discs(sparse, curve); }) == ErrorCode::MissingAdjacentVertebra);
}

TEST_CASE("frame bases are orthonormal and right-handed") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> ang(-1.2, 1.2);
    for (int t = 0; t < 50; ++t) {
        DiscFrame f;
        const double a = ang(rng);
        f.tangent = {std::sin(a), std::cos(a)};
        f.plane_normal = {f.tangent.y, -f.tangent.x};
        f.disc_point = {1.0, 2.0};
        f = build_frames(f, 7.5);
        for (const Frame3* fr : {&f.axial, &f.sagittal}) {
            CHECK(fr->origin == Vec3{1.0, 2.0, 7.5});
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    CHECK(dot(fr->axes[i], fr->axes[j]) == doctest::Approx(i == j ? 1.0 : 0.0));
            CHECK(det(fr->axes) == doctest::Approx(1.0));
        }
        // The axial third axis follows the spine; its first axis points anteriorly.
        CHECK(f.axial.axes[2][0] == doctest::Approx(f.tangent.x));
        CHECK(f.axial.axes[0][0] == doctest::Approx(-f.plane_normal.x));
        CHECK(f.sagittal.axes[0][0] == doctest::Approx(f.plane_normal.x));
    }
}

TEST_CASE("resampling a rotated frame reproduces a linear field") {
    const Vec3 g{0.01, -0.02, 0.005};
    const Volume3D src = linear_field({120, 200, 50}, {1.0f, 1.0f, 1.5f}, {-10.0f, 5.0f, -30.0f}, 1.0, g);
    DiscFrame f;
    const double a = 0.4;
    f.tangent = {std::sin(a), std::cos(a)};
    f.plane_normal = {f.tangent.y, -f.tangent.x};
    f.disc_point = {50.0, 100.0};
    f = build_frames(f, 10.0);
    const GridSpec grid{{45, 45, 6}, {60.0, 60.0, 12.0}};
    const ResampleResult r = resample(src, f.axial, grid);
    CHECK(r.inside == r.volume.size());
    double worst = 0.0;
    const Vec3 sp{60.0 / 45, 60.0 / 45, 12.0 / 6};
    for (std::uint32_t k = 0; k < 6; ++k)
        for (std::uint32_t j = 0; j < 45; ++j)
            for (std::uint32_t i = 0; i < 45; ++i) {
                const double u[3] = {(i + 0.5) * sp[0] - 30.0, (j + 0.5) * sp[1] - 30.0, (k + 0.5) * sp[2] - 6.0};
                Vec3 w = f.axial.origin;
                for (int ax = 0; ax < 3; ++ax)
                    for (int c = 0; c < 3; ++c) w[c] += u[ax] * f.axial.axes[ax][c];
                worst = std::max(worst, std::abs(r.volume.at(i, j, k) - (1.0 + dot(g, w))));
            }
    CHECK(worst < 1e-4);
    CHECK(r.volume.spacing()[0] == doctest::Approx(sp[0]));
}

TEST_CASE("disc volumes have the fixed grids and zero mean") {
    const Volume3D src =
        linear_field({160, 260, 30}, {0.8f, 0.8f, 2.0f}, {-64.0f, 0.0f, -30.0f}, 5.0, {0.3, -0.1, 0.2});
    DiscFrame f;
    f.tangent = {std::sin(0.2), std::cos(0.2)};
    f.plane_normal = {f.tangent.y, -f.tangent.x};
    f.disc_point = {0.0, 100.0};
    f.level = DiscLevel::L3L4;
    f = build_frames(f, mid_sagittal_z(src));
    CHECK(mid_sagittal_z(src) == 0.0);
    const DiscVolumePair p = resample_disc_volume(src, f);
    CHECK(p.level == DiscLevel::L3L4);
    CHECK(p.axial.dims() == Dims{360, 360, 8});
    CHECK(p.sagittal.dims() == Dims{160, 320, 25});
    for (const Volume3D* v : {&p.axial, &p.sagittal}) {
        double s = 0.0;
        for (float x : v->data()) s += x;
        CHECK(std::abs(s / static_cast<double>(v->size())) < 1e-5);
    }
    CHECK(p.axial_coverage > 0.5);

    DiscFrame far = f;
    far.disc_point = {500.0, 100.0};
    far = build_frames(far, 0.0);
    CHECK(code_of([&] { resample_disc_volume(src, far); }) == ErrorCode::InsufficientCoverage);
}

TEST_CASE("mean subtraction is two-pass and exact for simple data") {
    Volume3D v({4, 1, 1}, {1, 1, 1}, {0, 0, 0}, {1.0f, 2.0f, 3.0f, 6.0f});
    subtract_mean(v);
    CHECK(v.data()[0] == -2.0f);
    CHECK(v.data()[3] == 3.0f);
}

TEST_CASE("disc features pool the axial volume into cells") {
    Volume3D v({16, 8, 2}, {1, 1, 1}, {0, 0, 0});
    for (std::uint32_t k = 0; k < 2; ++k)
        for (std::uint32_t j = 0; j < 8; ++j)
            for (std::uint32_t i = 0; i < 16; ++i) v.at(i, j, k) = static_cast<float>(i / 4 + 10 * (j / 2) + k);
    const auto f = disc_features(v, 4);
    REQUIRE(f.size() == 16);
    for (std::uint32_t cj = 0; cj < 4; ++cj)
        for (std::uint32_t ci = 0; ci < 4; ++ci) CHECK(f[cj * 4 + ci] == doctest::Approx(ci + 10.0 * cj + 0.5));
    CHECK(code_of([&] { disc_features(v, 3); }) == ErrorCode::ShapeMismatch);
}
