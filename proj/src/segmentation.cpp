#include "spinegrade/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "spinegrade/error.hpp"
#include "spinegrade/kernels.hpp"

namespace spinegrade::seg {

SliceGeometry SliceGeometry::of(const Volume3D& v) {
    SliceGeometry g;
    g.nx = v.dims().nx;
    g.ny = v.dims().ny;
    g.sx = v.spacing()[0];
    g.sy = v.spacing()[1];
    g.ox = v.origin()[0];
    g.oy = v.origin()[1];
    return g;
}

std::optional<std::uint32_t> SliceGeometry::pixel_at(Point2 p) const noexcept {
    const double fi = std::round((p.x - ox) / sx);
    const double fj = std::round((p.y - oy) / sy);
    if (!(fi >= 0.0 && fj >= 0.0 && fi < nx && fj < ny)) return std::nullopt;
    return static_cast<std::uint32_t>(fj) * nx + static_cast<std::uint32_t>(fi);
}

bool Component::contains(std::uint32_t pixel) const {
    return std::binary_search(pixels.begin(), pixels.end(), pixel);
}

bool Component::overlaps(const Component& other) const {
    if (i_max < other.i_min || other.i_max < i_min || j_max < other.j_min || other.j_max < j_min) return false;
    auto a = pixels.begin();
    auto b = other.pixels.begin();
    while (a != pixels.end() && b != other.pixels.end()) {
        if (*a == *b) return true;
        if (*a < *b)
            ++a;
        else
            ++b;
    }
    return false;
}

std::vector<Component> binarize_and_components(const MaskVolume& mask, const ComponentOptions& options) {
    if (!(options.threshold > 0.0 && options.threshold < 1.0))
        throw Error(ErrorCode::InvalidConfig, "component threshold must lie in (0,1)");
    if (!(options.min_area_mm2 >= 0.0)) throw Error(ErrorCode::InvalidConfig, "area floor must be >= 0");

    const Volume3D& vol = mask.volume();
    const std::size_t k = vol.dims().nz / 2;
    const SliceGeometry geo = SliceGeometry::of(vol);
    const std::uint32_t nx = geo.nx;
    const std::uint32_t ny = geo.ny;
    const float* slice = vol.data().data() + vol.offset(0, 0, k);
    const double pixel_area = geo.sx * geo.sy;

    std::vector<std::uint8_t> seen(static_cast<std::size_t>(nx) * ny, 0);
    std::vector<std::uint32_t> stack;
    std::vector<Component> out;
    for (std::uint32_t seed = 0; seed < nx * ny; ++seed) {
        if (seen[seed] || !(slice[seed] >= options.threshold)) continue;
        Component c;
        c.i_min = c.j_min = std::numeric_limits<std::uint32_t>::max();
        seen[seed] = 1;
        stack.assign(1, seed);
        while (!stack.empty()) {
            const std::uint32_t p = stack.back();
            stack.pop_back();
            c.pixels.push_back(p);
            const std::uint32_t i = p % nx;
            const std::uint32_t j = p / nx;
            c.i_min = std::min(c.i_min, i);
            c.i_max = std::max(c.i_max, i);
            c.j_min = std::min(c.j_min, j);
            c.j_max = std::max(c.j_max, j);
            for (int dj = -1; dj <= 1; ++dj) {
                for (int di = -1; di <= 1; ++di) {
                    if (di == 0 && dj == 0) continue;
                    const std::int64_t ii = static_cast<std::int64_t>(i) + di;
                    const std::int64_t jj = static_cast<std::int64_t>(j) + dj;
                    if (ii < 0 || jj < 0 || ii >= nx || jj >= ny) continue;
                    const auto q = static_cast<std::uint32_t>(jj * nx + ii);
                    if (seen[q] || !(slice[q] >= options.threshold)) continue;
                    seen[q] = 1;
                    stack.push_back(q);
                }
            }
        }
        c.area_mm2 = static_cast<double>(c.pixels.size()) * pixel_area;
        if (c.area_mm2 < options.min_area_mm2) continue;
        std::sort(c.pixels.begin(), c.pixels.end());
        double sx = 0.0, sy = 0.0;
        for (std::uint32_t p : c.pixels) {
            const Point2 q = geo.center(p);
            sx += q.x;
            sy += q.y;
        }
        c.centroid = {sx / c.pixels.size(), sy / c.pixels.size()};
        out.push_back(std::move(c));
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const Component& a, const Component& b) { return a.centroid.y < b.centroid.y; });
    return out;
}

const LabeledVertebra* VertebraSegmentation::find(Vertebra v) const {
    for (const auto& lv : vertebrae)
        if (lv.label == v) return &lv;
    return nullptr;
}

std::vector<Point2> VertebraSegmentation::centroids() const {
    std::vector<Point2> out;
    out.reserve(vertebrae.size());
    for (const auto& lv : vertebrae) out.push_back(lv.component.centroid);
    return out;
}

namespace {

auto by_y = [](const Component& a, const Component& b) { return a.centroid.y < b.centroid.y; };

VertebraSegmentation label_components(const SliceGeometry& geometry, std::vector<Component> lumbar,
                                      std::vector<Component> sacral, bool strict) {
    VertebraSegmentation seg;
    seg.geometry = geometry;
    std::stable_sort(lumbar.begin(), lumbar.end(), by_y);
    std::stable_sort(sacral.begin(), sacral.end(), by_y);

    std::optional<Component> s1;
    if (sacral.empty()) {
        if (strict) throw Error(ErrorCode::NoSacrum, "no sacral component detected");
        seg.diagnostics.emplace_back("no sacral component; lowest lumbar component taken as L5");
    } else {
        // The lowest sacral component is S1; any others are rejected.
        s1 = std::move(sacral.back());
        sacral.pop_back();
        for (auto& c : sacral) {
            seg.diagnostics.emplace_back("extra sacral component rejected");
            seg.rejected.push_back(std::move(c));
        }
        for (const auto& c : lumbar) {
            if (c.overlaps(*s1)) {
                if (strict) throw Error(ErrorCode::OverlapS1Lumbar, "S1 overlaps a lumbar component");
                seg.diagnostics.emplace_back("S1 overlaps a lumbar component");
                break;
            }
        }
    }

    // Lumbar components below the S1 centroid cannot be lumbar vertebrae.
    std::vector<Component> candidates;
    for (auto& c : lumbar) {
        if (s1 && c.centroid.y >= s1->centroid.y) {
            seg.diagnostics.emplace_back("lumbar component below S1 rejected");
            seg.rejected.push_back(std::move(c));
        } else {
            candidates.push_back(std::move(c));
        }
    }

    // Count upward from L5.
    std::vector<LabeledVertebra> labeled;
    int next = static_cast<int>(index(Vertebra::L5));
    for (auto it = candidates.rbegin(); it != candidates.rend(); ++it) {
        if (next < 0) {
            seg.diagnostics.emplace_back("surplus component above T12 rejected");
            seg.rejected.push_back(std::move(*it));
            continue;
        }
        labeled.push_back({static_cast<Vertebra>(next), std::move(*it)});
        --next;
    }
    std::reverse(labeled.begin(), labeled.end());
    seg.vertebrae = std::move(labeled);
    if (s1) seg.vertebrae.push_back({Vertebra::S1, std::move(*s1)});
    return seg;
}

}  // namespace

VertebraSegmentation assign_levels(const SliceGeometry& geometry, std::vector<Component> lumbar,
                                   std::vector<Component> sacral) {
    return label_components(geometry, std::move(lumbar), std::move(sacral), true);
}

VertebraSegmentation assign_levels_lenient(const SliceGeometry& geometry, std::vector<Component> lumbar,
                                           std::vector<Component> sacral) {
    return label_components(geometry, std::move(lumbar), std::move(sacral), false);
}

double dice_coefficient(std::span<const float> pred, std::span<const float> truth, double epsilon) {
    if (pred.size() != truth.size()) throw Error(ErrorCode::GeometryMismatch, "dice inputs differ in size");
    if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidConfig, "dice epsilon must be > 0");
    const kernels::OverlapSums s = kernels::active().overlap_sums(pred.data(), truth.data(), pred.size());
    return (2.0 * s.intersection + epsilon) / (s.pred + s.truth + epsilon);
}

double dice_coefficient(const MaskVolume& pred, const MaskVolume& truth, double epsilon) {
    if (!pred.same_geometry(truth)) throw Error(ErrorCode::GeometryMismatch, "dice inputs differ in geometry");
    return dice_coefficient(pred.data(), truth.data(), epsilon);
}

namespace {

double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

const LabeledPoint* find_point(const std::vector<LabeledPoint>& pts, Vertebra v) {
    for (const auto& p : pts)
        if (p.label == v) return &p;
    return nullptr;
}

}  // namespace

CentroidErrors centroid_error(const VertebraSegmentation& pred, const std::vector<LabeledPoint>& truth) {
    if (pred.vertebrae.size() != truth.size())
        throw Error(ErrorCode::LabelMismatch, "predicted and truth centroid counts differ");
    CentroidErrors out;
    for (const auto& lv : pred.vertebrae) {
        const LabeledPoint* t = find_point(truth, lv.label);
        if (t == nullptr)
            throw Error(ErrorCode::LabelMismatch, "no truth centroid for " + std::string(to_string(lv.label)));
        out.per_vertebra.emplace_back(lv.label, distance(lv.component.centroid, t->point));
    }
    if (out.per_vertebra.empty()) return out;
    double s = 0.0;
    for (const auto& [v, d] : out.per_vertebra) s += d;
    out.mean = s / out.per_vertebra.size();
    double ss = 0.0;
    for (const auto& [v, d] : out.per_vertebra) ss += (d - out.mean) * (d - out.mean);
    out.stddev = std::sqrt(ss / out.per_vertebra.size());
    return out;
}

std::string_view to_string(FailureReason r) noexcept {
    switch (r) {
        case FailureReason::CentroidNotSolitary: return "centroid_not_solitary";
        case FailureReason::CountMismatch: return "count_mismatch";
        case FailureReason::SacrumOverlapsLumbar: return "s1_lumbar_overlap";
    }
    return "unknown";
}

SegmentationScore success_criteria(const VertebraSegmentation& seg, const TruthSpine& truth) {
    std::vector<const Component*> areas;
    for (const auto& lv : seg.vertebrae) areas.push_back(&lv.component);
    for (const auto& c : seg.rejected) areas.push_back(&c);

    std::vector<std::optional<std::uint32_t>> truth_pixels;
    for (const auto& p : truth.centroids) truth_pixels.push_back(seg.geometry.pixel_at(p.point));

    SegmentationScore score;
    auto fail = [&](FailureReason r) {
        score.success = false;
        score.failure_reason = r;
        return score;
    };

    for (const Component* area : areas) {
        int hits = 0;
        for (const auto& px : truth_pixels)
            if (px && area->contains(*px)) ++hits;
        if (hits != 1) return fail(FailureReason::CentroidNotSolitary);
    }
    if (areas.size() != truth.centroids.size()) return fail(FailureReason::CountMismatch);
    if (const LabeledVertebra* s1 = seg.find(Vertebra::S1)) {
        for (const auto& lv : seg.vertebrae)
            if (lv.label != Vertebra::S1 && lv.component.overlaps(s1->component))
                return fail(FailureReason::SacrumOverlapsLumbar);
    }
    score.success = true;
    return score;
}

ScoreReport score_segmentation(const VertebraSegmentation& seg, const TruthSpine& truth) {
    ScoreReport report;
    report.overall = success_criteria(seg, truth);

    const std::size_t npix = static_cast<std::size_t>(seg.geometry.nx) * seg.geometry.ny;
    const float* truth_map = nullptr;
    if (truth.label_map) {
        const Volume3D& m = *truth.label_map;
        if (m.dims().nx != seg.geometry.nx || m.dims().ny != seg.geometry.ny)
            throw Error(ErrorCode::GeometryMismatch, "truth label map does not match the segmentation slice");
        truth_map = m.data().data() + m.offset(0, 0, m.dims().nz / 2);
    }

    std::vector<float> pred_ind(npix);
    std::vector<float> truth_ind(npix);
    double dice_sum = 0.0, err_sum = 0.0;
    std::size_t dice_n = 0, err_n = 0;
    for (const auto& lv : seg.vertebrae) {
        LabelScore ls{lv.label, std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
        if (truth_map != nullptr) {
            std::fill(pred_ind.begin(), pred_ind.end(), 0.0f);
            for (std::uint32_t p : lv.component.pixels) pred_ind[p] = 1.0f;
            const float code = static_cast<float>(index(lv.label) + 1);
            for (std::size_t p = 0; p < npix; ++p) truth_ind[p] = truth_map[p] == code ? 1.0f : 0.0f;
            ls.dice = dice_coefficient(pred_ind, truth_ind, 1.0);
            dice_sum += ls.dice;
            ++dice_n;
        }
        if (const LabeledPoint* t = find_point(truth.centroids, lv.label)) {
            ls.centroid_error_mm = distance(lv.component.centroid, t->point);
            err_sum += ls.centroid_error_mm;
            ++err_n;
        }
        report.per_label.push_back(ls);
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    report.overall.dice = dice_n > 0 ? dice_sum / dice_n : nan;
    report.overall.centroid_error_mm = err_n > 0 ? err_sum / err_n : nan;
    return report;
}

}  // namespace spinegrade::seg
