#include "spinegrade/spine_curve.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "spinegrade/error.hpp"
#include "spinegrade/kernels.hpp"

namespace spinegrade::geom {

double SpineCurve::operator()(double y) const noexcept {
    double r = 0.0;
    for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) r = r * y + *it;
    return r;
}

double SpineCurve::derivative(double y) const noexcept {
    double r = 0.0;
    for (std::size_t k = coefficients.size(); k-- > 1;) r = r * y + static_cast<double>(k) * coefficients[k];
    return r;
}

SpineCurve fit_spine_curve(std::span<const Point2> centroids, int degree) {
    if (degree < 2) throw Error(ErrorCode::InvalidConfig, "spine curve degree must be >= 2");
    const std::size_t n = centroids.size();
    const auto terms = static_cast<std::size_t>(degree) + 1;
    if (n < terms)
        throw Error(ErrorCode::InsufficientPoints,
                    std::to_string(n) + " centroids cannot determine a degree-" + std::to_string(degree) + " curve");

    std::vector<Point2> pts(centroids.begin(), centroids.end());
    for (const Point2& p : pts)
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw Error(ErrorCode::NonFiniteInput, "non-finite centroid");
    std::sort(pts.begin(), pts.end(), [](Point2 a, Point2 b) { return a.y < b.y; });
    for (std::size_t i = 1; i < n; ++i)
        if (!(pts[i].y > pts[i - 1].y)) throw Error(ErrorCode::DegenerateFit, "repeated centroid y value");

    // Solve in u = (y - m) / s for conditioning, then expand back to monomials in y.
    const double m = 0.5 * (pts.front().y + pts.back().y);
    const double s = 0.5 * (pts.back().y - pts.front().y);
    Eigen::MatrixXd a(n, terms);
    Eigen::VectorXd b(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = (pts[i].y - m) / s;
        double pw = 1.0;
        for (std::size_t j = 0; j < terms; ++j) {
            a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = pw;
            pw *= u;
        }
        b(static_cast<Eigen::Index>(i)) = pts[i].x;
    }
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    if (qr.rank() < static_cast<Eigen::Index>(terms)) throw Error(ErrorCode::DegenerateFit, "rank-deficient fit");
    const Eigen::VectorXd scaled = qr.solve(b);

    SpineCurve curve;
    curve.coefficients.assign(terms, 0.0);
    for (std::size_t j = 0; j < terms; ++j) {
        // a_j * ((y - m) / s)^j = a_j / s^j * sum_k C(j,k) y^k (-m)^(j-k)
        const double aj = scaled(static_cast<Eigen::Index>(j)) / std::pow(s, static_cast<double>(j));
        double binom = 1.0;
        for (std::size_t k = 0; k <= j; ++k) {
            curve.coefficients[k] += aj * binom * std::pow(-m, static_cast<double>(j - k));
            binom = binom * static_cast<double>(j - k) / static_cast<double>(k + 1);
        }
    }
    curve.y_min = pts.front().y;
    curve.y_max = pts.back().y;
    double ss = 0.0;
    for (const Point2& p : pts) {
        const double r = p.x - curve(p.y);
        ss += r * r;
    }
    curve.fit_residual = std::sqrt(ss / static_cast<double>(n));
    return curve;
}

double DiscFrame::plane_angle() const noexcept { return std::atan2(tangent.x, tangent.y); }

std::vector<DiscFrame> locate_discs(const seg::VertebraSegmentation& seg, const SpineCurve& curve) {
    std::vector<DiscFrame> out;
    const auto& vs = seg.vertebrae;
    for (std::size_t i = 0; i + 1 < vs.size(); ++i) {
        const auto level = disc_between(vs[i].label, vs[i + 1].label);
        if (!level) continue;
        const Point2 a = vs[i].component.centroid;
        const Point2 b = vs[i + 1].component.centroid;
        DiscFrame f;
        f.level = *level;
        f.disc_point = {0.5 * (a.x + b.x), 0.5 * (a.y + b.y)};
        const double slope = curve.derivative(f.disc_point.y);
        const double norm = std::hypot(slope, 1.0);
        f.tangent = {slope / norm, 1.0 / norm};
        f.plane_normal = {f.tangent.y, -f.tangent.x};
        out.push_back(f);
    }
    if (out.empty()) throw Error(ErrorCode::MissingAdjacentVertebra, "no pair of adjacent labeled vertebrae");
    return out;
}

namespace {

Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

}  // namespace

DiscFrame build_frames(DiscFrame frame, double z_center, const Vec3& left_right) {
    const Vec3 origin{frame.disc_point.x, frame.disc_point.y, z_center};
    const Vec3 t{frame.tangent.x, frame.tangent.y, 0.0};
    frame.sagittal = {origin, {cross(t, left_right), t, left_right}};
    frame.axial = {origin, {cross(left_right, t), left_right, t}};
    return frame;
}

ResampleResult resample(const Volume3D& source, const Frame3& frame, const GridSpec& grid) {
    const Dims d = grid.dims;
    const Vec3 spacing{grid.extent_mm[0] / d.nx, grid.extent_mm[1] / d.ny, grid.extent_mm[2] / d.nz};
    const Vec3f out_spacing{static_cast<float>(spacing[0]), static_cast<float>(spacing[1]),
                            static_cast<float>(spacing[2])};
    const Vec3f out_origin{static_cast<float>(0.5 * spacing[0] - 0.5 * grid.extent_mm[0]),
                           static_cast<float>(0.5 * spacing[1] - 0.5 * grid.extent_mm[1]),
                           static_cast<float>(0.5 * spacing[2] - 0.5 * grid.extent_mm[2])};
    ResampleResult r{Volume3D(d, out_spacing, out_origin), 0};

    const kernels::SampleGrid src{source.data().data(), source.dims().nx, source.dims().ny, source.dims().nz};
    const Vec3f& so = source.origin();
    const Vec3f& ss = source.spacing();
    // Source-index step per voxel along the output's fastest axis.
    const double step[3] = {frame.axes[0][0] * spacing[0] / ss[0], frame.axes[0][1] * spacing[0] / ss[1],
                            frame.axes[0][2] * spacing[0] / ss[2]};
    const double u0 = 0.5 * spacing[0] - 0.5 * grid.extent_mm[0];
    const kernels::KernelTable& k = kernels::active();
    float* out = r.volume.data().data();
    for (std::uint32_t kk = 0; kk < d.nz; ++kk) {
        const double u2 = (kk + 0.5) * spacing[2] - 0.5 * grid.extent_mm[2];
        for (std::uint32_t jj = 0; jj < d.ny; ++jj) {
            const double u1 = (jj + 0.5) * spacing[1] - 0.5 * grid.extent_mm[1];
            double start[3];
            for (int a = 0; a < 3; ++a) {
                const double world =
                    frame.origin[a] + u0 * frame.axes[0][a] + u1 * frame.axes[1][a] + u2 * frame.axes[2][a];
                start[a] = (world - so[a]) / ss[a];
            }
            r.inside += k.trilinear_line(src, start, step, d.nx, out + r.volume.offset(0, jj, kk));
        }
    }
    return r;
}

void subtract_mean(Volume3D& v) {
    const kernels::KernelTable& k = kernels::active();
    auto data = v.data();
    if (data.empty()) return;
    for (int pass = 0; pass < 2; ++pass) {
        const double mean = k.sum(data.data(), data.size()) / static_cast<double>(data.size());
        k.subtract(data.data(), data.size(), mean);
    }
}

DiscVolumePair resample_disc_volume(const Volume3D& source, const DiscFrame& frame) {
    DiscVolumePair pair;
    pair.level = frame.level;
    auto run = [&](const Frame3& f, const GridSpec& g, const char* name, double& coverage) {
        ResampleResult r = resample(source, f, g);
        coverage = r.coverage();
        if (coverage < 0.5)
            throw Error(ErrorCode::InsufficientCoverage, std::string(name) + " grid at " +
                                                             std::string(to_string(frame.level)) + " is only " +
                                                             std::to_string(coverage * 100.0) + "% inside the source");
        subtract_mean(r.volume);
        return std::move(r.volume);
    };
    pair.axial = run(frame.axial, kAxialGrid, "axial", pair.axial_coverage);
    pair.sagittal = run(frame.sagittal, kSagittalGrid, "sagittal", pair.sagittal_coverage);
    return pair;
}

std::vector<double> disc_features(const Volume3D& axial, std::uint32_t cells) {
    const Dims d = axial.dims();
    if (cells == 0 || d.nx % cells != 0 || d.ny % cells != 0)
        throw Error(ErrorCode::ShapeMismatch, "axial grid is not divisible into the requested cells");
    const std::uint32_t bx = d.nx / cells, by = d.ny / cells;
    std::vector<double> out(static_cast<std::size_t>(cells) * cells, 0.0);
    for (std::uint32_t k = 0; k < d.nz; ++k)
        for (std::uint32_t j = 0; j < d.ny; ++j)
            for (std::uint32_t i = 0; i < d.nx; ++i) out[(j / by) * cells + i / bx] += axial.at(i, j, k);
    const double n = static_cast<double>(bx) * by * d.nz;
    for (double& v : out) v /= n;
    return out;
}

double mid_sagittal_z(const Volume3D& v) noexcept {
    return v.origin()[2] + static_cast<double>(v.dims().nz / 2) * v.spacing()[2];
}

}  // namespace spinegrade::geom
