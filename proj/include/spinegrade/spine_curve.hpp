#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "spinegrade/levels.hpp"
#include "spinegrade/segmentation.hpp"
#include "spinegrade/volume.hpp"

namespace spinegrade::geom {

/// World axes of a sagittal series: x anterior-posterior, y craniocaudal (increasing
/// caudally), z left-right (the source volume's third axis).
using seg::Point2;

/// x = f(y) in monomial form: coefficients[k] multiplies y^k.
struct SpineCurve {
    std::vector<double> coefficients;
    double y_min = 0.0;
    double y_max = 0.0;
    double fit_residual = 0.0;  // RMS of x residuals, mm

    int degree() const noexcept { return static_cast<int>(coefficients.size()) - 1; }
    double operator()(double y) const noexcept;
    double derivative(double y) const noexcept;
};

inline constexpr int kDefaultCurveDegree = 3;

/// Least-squares fit of x = f(y). Throws InvalidConfig for degree < 2, InsufficientPoints
/// for fewer than degree+1 centroids and DegenerateFit for repeated y values.
SpineCurve fit_spine_curve(std::span<const Point2> centroids, int degree = kDefaultCurveDegree);

/// Orthonormal basis with an origin: world point = origin + u0*axes[0] + u1*axes[1] + u2*axes[2].
struct Frame3 {
    Vec3 origin{};
    std::array<Vec3, 3> axes{};
};

struct DiscFrame {
    DiscLevel level{};
    Point2 disc_point;
    Point2 tangent;       // normalize(f'(y_d), 1)
    Point2 plane_normal;  // (t.y, -t.x), in-plane and perpendicular to the tangent
    Frame3 axial;         // (-plane_normal, left-right, tangent)
    Frame3 sagittal;      // (plane_normal, tangent, left-right)

    /// Signed disc-plane tilt from horizontal, atan(f'(y_d)), radians.
    double plane_angle() const noexcept;
};

/// One frame per pair of anatomically adjacent labeled vertebrae (cranial to caudal) with
/// the 2D fields filled; bases stay empty until build_frames. Pairs broken by a missing
/// vertebra are skipped; throws MissingAdjacentVertebra when no adjacent pair exists.
std::vector<DiscFrame> locate_discs(const seg::VertebraSegmentation& seg, const SpineCurve& curve);

/// Fills the axial and sagittal bases, centered at (disc_point, z_center). The left-right
/// axis must be a unit vector perpendicular to the sagittal plane.
DiscFrame build_frames(DiscFrame frame, double z_center, const Vec3& left_right = {0.0, 0.0, 1.0});

struct GridSpec {
    Dims dims;
    Vec3 extent_mm;  // physical size per axis; spacing = extent / dims
};

/// 9 x 9 x 1.6 cm at 360 x 360 x 8 and 4 x 8 x 5 cm at 160 x 320 x 25.
inline constexpr GridSpec kAxialGrid{{360, 360, 8}, {90.0, 90.0, 16.0}};
inline constexpr GridSpec kSagittalGrid{{160, 320, 25}, {40.0, 80.0, 50.0}};

struct ResampleResult {
    Volume3D volume;  // geometry in frame coordinates (origin at the first voxel center)
    std::size_t inside = 0;
    double coverage() const noexcept {
        return volume.size() == 0 ? 0.0 : static_cast<double>(inside) / static_cast<double>(volume.size());
    }
};

/// Trilinear sampling of source at the grid's voxel centers, (i+0.5)*s - extent/2 along each
/// frame axis; out-of-bounds samples are 0 and excluded from `inside`. No normalization.
ResampleResult resample(const Volume3D& source, const Frame3& frame, const GridSpec& grid);

/// Subtracts the mean in place (two passes, accumulated in double).
void subtract_mean(Volume3D& v);

struct DiscVolumePair {
    DiscLevel level{};
    Volume3D axial;
    Volume3D sagittal;
    double axial_coverage = 0.0;
    double sagittal_coverage = 0.0;
};

/// Axial and sagittal resampling followed by mean subtraction. Throws InsufficientCoverage
/// if either grid has fewer than half its samples inside the source.
DiscVolumePair resample_disc_volume(const Volume3D& source, const DiscFrame& frame);

/// Grading features of one disc: the axial volume averaged over its slices and pooled into
/// cells x cells in-plane blocks (row-major, first axis fastest).
std::vector<double> disc_features(const Volume3D& axial, std::uint32_t cells = 8);

/// World z of the slice the segmentation stage reads (index nz/2).
double mid_sagittal_z(const Volume3D& v) noexcept;

}  // namespace spinegrade::geom
