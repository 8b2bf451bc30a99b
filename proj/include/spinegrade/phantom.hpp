#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "spinegrade/levels.hpp"
#include "spinegrade/segmentation.hpp"
#include "spinegrade/spine_curve.hpp"
#include "spinegrade/volume.hpp"

namespace spinegrade::phantom {

/// Synthetic sagittal series. World axes follow the segmentation convention: x runs
/// anterior to posterior, y cranial to caudal, z right to left. Vertebral bodies are
/// rectangles (S1 a trapezoid) centered on x = f(y) and aligned with the curve tangent,
/// extruded across the central slab in z.
struct PhantomSpec {
    std::vector<double> curve{60.0, 0.1, 0.0008, -0.0000025};  // x(y) monomial coefficients
    Dims dims{160, 300, 50};
    Vec3f spacing{1.0f, 1.0f, 2.0f};
    double first_centroid_y = 40.0;  // T12
    double arc_spacing = 36.0;       // centroid to centroid along the curve
    double body_width = 40.0;        // anterior-posterior
    double body_height = 26.0;       // along the tangent
    double body_depth = 40.0;        // left-right
    double s1_bottom_width = 28.0;   // caudal edge of the trapezoid (cranial edge = body_width)

    double background = 20.0;
    double body_intensity = 100.0;
    double disc_intensity = 60.0;
    double canal_intensity = 150.0;
    double noise_sigma = 0.0;   // additive Gaussian intensity noise
    double jitter_sigma = 0.0;  // per-vertebra centroid displacement, mm

    // Grade markers: fluid-signal spheres behind each disc whose brightness falls with the grade.
    double marker_radius = 5.0;
    double canal_marker_offset = 28.0;     // posterior of the disc point
    double foramen_marker_offset = 24.0;   // posterior of the disc point
    double foramen_marker_lateral = 16.0;  // left / right of the mid-sagittal plane
    double marker_bright = 240.0;
    double marker_step = 50.0;  // intensity lost per grade

    float mask_inside = 0.95f;
    float mask_outside = 0.02f;

    std::uint64_t seed = 1;

    bool fused_bodies = false;     // bridge L3 and L4 in the lumbar mask
    bool missing_s1 = false;       // empty sacral mask
    bool extra_component = false;  // spurious blob cranial to T12 in the lumbar mask
    bool s1_overlap = false;       // extend L5 in the lumbar mask into the top of S1

    friend bool operator==(const PhantomSpec&, const PhantomSpec&) = default;
};

/// TOML-style key = value; keys mirror the field names ("curve = [a, b, c, d]",
/// "dims = [160, 300, 50]", "spacing = [1, 1, 2]", booleans true/false). Throws InvalidConfig.
PhantomSpec parse_phantom_spec(std::string_view text);
PhantomSpec load_phantom_spec(const std::filesystem::path& path);
std::string format_phantom_spec(const PhantomSpec& spec);

struct Phantom {
    Volume3D sagittal;
    MaskVolume lumbar;   // mid-sagittal slice, nz = 1
    MaskVolume sacral;   // mid-sagittal slice, nz = 1
    Volume3D label_map;  // mid-sagittal slice, vertebra index + 1
    std::vector<seg::LabeledPoint> truth_centroids;    // actual (jittered) body centers
    std::vector<seg::LabeledPoint> nominal_centroids;  // on-curve positions before jitter
    std::vector<geom::DiscFrame> truth_frames;         // analytic tangents, with 3D bases
    std::vector<StenosisLabelSet> truth_labels;        // one per disc level
    std::string report;                                // free-text report of truth_labels
};

/// Deterministic in (spec, study): the study index perturbs the seed for grades, noise and
/// jitter. Throws SpecOutOfBounds when a body or marker leaves the volume, InvalidConfig
/// for non-positive sizes.
Phantom generate_phantom(const PhantomSpec& spec, std::uint32_t study = 0);

/// Report sentences for one level's grades, in the register of radiology findings.
std::string describe_level(const StenosisLabelSet& labels, std::uint64_t style_seed);

/// Study identifiers used by multi-study generation: "phantom_000", "phantom_001", ...
std::string study_id(std::uint32_t study);

}  // namespace spinegrade::phantom
