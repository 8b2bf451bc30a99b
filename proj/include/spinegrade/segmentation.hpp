#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spinegrade/levels.hpp"
#include "spinegrade/volume.hpp"

namespace spinegrade::seg {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

/// Pixel lattice of one sagittal slice: pixel (i,j) is centered at (ox + i*sx, oy + j*sy) mm.
struct SliceGeometry {
    std::uint32_t nx = 0;
    std::uint32_t ny = 0;
    double sx = 1.0;
    double sy = 1.0;
    double ox = 0.0;
    double oy = 0.0;

    static SliceGeometry of(const Volume3D& v);
    Point2 center(std::uint32_t linear) const noexcept {
        return {ox + (linear % nx) * sx, oy + (linear / nx) * sy};
    }
    /// Linear index of the pixel containing p, if inside the slice.
    std::optional<std::uint32_t> pixel_at(Point2 p) const noexcept;
};

struct Component {
    std::vector<std::uint32_t> pixels;  // sorted linear indices into the slice
    Point2 centroid;                    // mean of pixel centers, mm
    double area_mm2 = 0.0;
    std::uint32_t i_min = 0, i_max = 0, j_min = 0, j_max = 0;

    bool contains(std::uint32_t pixel) const;
    bool overlaps(const Component& other) const;
};

struct ComponentOptions {
    double threshold = 0.5;
    double min_area_mm2 = 30.0;
};

/// 8-connected components of {p >= threshold} on a sagittal slice (the middle slice when
/// nz > 1), smaller than the area floor dropped, ordered by centroid y (cranial first).
std::vector<Component> binarize_and_components(const MaskVolume& mask, const ComponentOptions& options = {});

struct LabeledVertebra {
    Vertebra label;
    Component component;
};

struct VertebraSegmentation {
    SliceGeometry geometry;
    std::vector<LabeledVertebra> vertebrae;  // cranial to caudal, labels unique
    std::vector<Component> rejected;         // detected but left unlabeled
    std::vector<std::string> diagnostics;

    const LabeledVertebra* find(Vertebra v) const;
    std::vector<Point2> centroids() const;
};

/// Anchors at the lowest sacral component (S1) and counts upward through the lumbar
/// components: L5, L4, ... T12. Throws NoSacrum without a sacral component and
/// OverlapS1Lumbar when S1 shares pixels with a lumbar component.
VertebraSegmentation assign_levels(const SliceGeometry& geometry, std::vector<Component> lumbar,
                                   std::vector<Component> sacral);

/// Same labeling, but records NoSacrum / overlap as diagnostics instead of throwing
/// (without a sacrum the lowest lumbar component is taken as L5). Used for scoring
/// detections that are known to be faulty.
VertebraSegmentation assign_levels_lenient(const SliceGeometry& geometry, std::vector<Component> lumbar,
                                           std::vector<Component> sacral);

/// (2*sum(p*g) + eps) / (sum(p) + sum(g) + eps). Throws GeometryMismatch.
double dice_coefficient(const MaskVolume& pred, const MaskVolume& truth, double epsilon = 1.0);
double dice_coefficient(std::span<const float> pred, std::span<const float> truth, double epsilon = 1.0);

struct LabeledPoint {
    Vertebra label;
    Point2 point;
};

struct CentroidErrors {
    std::vector<std::pair<Vertebra, double>> per_vertebra;  // mm, cranial to caudal
    double mean = 0.0;
    double stddev = 0.0;  // population
};

/// Throws LabelMismatch unless pred and truth carry exactly the same labels.
CentroidErrors centroid_error(const VertebraSegmentation& pred, const std::vector<LabeledPoint>& truth);

enum class FailureReason {
    CentroidNotSolitary = 1,  // a detected area holds zero or several truth centroids
    CountMismatch = 2,
    SacrumOverlapsLumbar = 3,
};
std::string_view to_string(FailureReason r) noexcept;

struct SegmentationScore {
    double dice = 0.0;
    double centroid_error_mm = 0.0;
    bool success = false;
    std::optional<FailureReason> failure_reason;  // present iff !success
};

struct TruthSpine {
    std::vector<LabeledPoint> centroids;
    std::optional<Volume3D> label_map;  // pixel value = vertebra index + 1, 0 background
};

/// The three detection criteria, checked in order; the first violation is reported.
/// Detected areas are every labeled and rejected component.
SegmentationScore success_criteria(const VertebraSegmentation& seg, const TruthSpine& truth);

struct LabelScore {
    Vertebra label;
    double dice = 0.0;               // NaN when no truth label map is available
    double centroid_error_mm = 0.0;  // NaN when the label is missing from truth
};

struct ScoreReport {
    SegmentationScore overall;
    std::vector<LabelScore> per_label;
};

/// success_criteria plus per-vertebra Dice (against the truth label map, epsilon 1) and
/// centroid distances; the overall dice / error are means over the scored labels.
ScoreReport score_segmentation(const VertebraSegmentation& seg, const TruthSpine& truth);

}  // namespace spinegrade::seg
