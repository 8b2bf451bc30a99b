#include <doctest.h>

#include <cmath>
#include <numbers>

#include "spinegrade/error.hpp"
#include "spinegrade/phantom.hpp"
#include "spinegrade/report_parser.hpp"
#include "support.hpp"

using namespace spinegrade;
using namespace spinegrade::phantom;

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

seg::VertebraSegmentation label(const Phantom& p, bool strict = true) {
    const auto geo = seg::SliceGeometry::of(p.lumbar.volume());
    auto lumbar = seg::binarize_and_components(p.lumbar);
    auto sacral = seg::binarize_and_components(p.sacral);
    return strict ? seg::assign_levels(geo, std::move(lumbar), std::move(sacral))
                  : seg::assign_levels_lenient(geo, std::move(lumbar), std::move(sacral));
}

seg::TruthSpine truth_of(const Phantom& p) { return {p.truth_centroids, p.label_map}; }

}  // namespace

TEST_CASE("spec text round-trips and validates keys") {
    PhantomSpec s;
    s.curve = {50.0, 0.2, 1e-4};
    s.dims = {120, 280, 40};
    s.noise_sigma = 2.5;
    s.fused_bodies = true;
    s.seed = 9;
    CHECK(parse_phantom_spec(format_phantom_spec(s)) == s);
    CHECK(parse_phantom_spec("# defaults only\n") == PhantomSpec{});
    CHECK(code_of([] { parse_phantom_spec("colour = 3"); }) == ErrorCode::InvalidConfig);
    CHECK(code_of([] { parse_phantom_spec("dims = [1, 2]"); }) == ErrorCode::InvalidConfig);
    CHECK(code_of([] { parse_phantom_spec("missing_s1 = maybe"); }) == ErrorCode::InvalidConfig);
    CHECK(load_phantom_spec(SPINEGRADE_DATA_DIR "/phantom_default.toml") == PhantomSpec{});
}

TEST_CASE("generation is deterministic per study") {
    const PhantomSpec s;
    const Phantom a = generate_phantom(s, 3);
    const Phantom b = generate_phantom(s, 3);
    CHECK(a.sagittal == b.sagittal);
    CHECK(a.report == b.report);
    CHECK(a.truth_labels == b.truth_labels);
    CHECK_FALSE(generate_phantom(s, 4).report == a.report);
    CHECK(a.sagittal.dims() == s.dims);
    CHECK(a.lumbar.dims().nz == 1);
    CHECK(a.truth_centroids.size() == 7);
    CHECK(a.truth_frames.size() == 6);
    CHECK(a.truth_labels.size() == 6);
    CHECK(study_id(7) == "phantom_007");
}

TEST_CASE("the clean phantom closes the geometry loop") {
    const PhantomSpec s;
    const Phantom p = generate_phantom(s, 0);
    const auto seg = label(p);
    REQUIRE(seg.vertebrae.size() == 7);
    const auto err = seg::centroid_error(seg, p.truth_centroids);
    for (const auto& [v, d] : err.per_vertebra) {
        CAPTURE(to_string(v));
        CHECK(d < 0.5);
    }
    const auto curve = geom::fit_spine_curve(seg.centroids(), 3);
    const auto frames = geom::locate_discs(seg, curve);
    REQUIRE(frames.size() == p.truth_frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
        CHECK(frames[i].level == p.truth_frames[i].level);
        const double deg = std::abs(frames[i].plane_angle() - p.truth_frames[i].plane_angle()) * 180.0 / std::numbers::pi;
        CHECK(deg < 1.0);
    }

    // Noise-free nominal centroids recover the generating curve.
    std::vector<geom::Point2> nominal;
    for (const auto& lp : p.nominal_centroids) nominal.push_back(lp.point);
    const auto exact = geom::fit_spine_curve(nominal, 3);
    for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(exact.coefficients[k] - s.curve[k]) < 1e-9);

    const auto score = seg::score_segmentation(seg, truth_of(p));
    CHECK(score.overall.success);
    CHECK(score.overall.dice > 0.95);
}

TEST_CASE("each failure mode trips its own criterion") {
    SUBCASE("fused bodies") {
        PhantomSpec s;
        s.fused_bodies = true;
        const Phantom p = generate_phantom(s);
        const auto r = seg::success_criteria(label(p, false), truth_of(p));
        CHECK_FALSE(r.success);
        CHECK(r.failure_reason == seg::FailureReason::CentroidNotSolitary);
    }
    SUBCASE("missing sacrum") {
        PhantomSpec s;
        s.missing_s1 = true;
        const Phantom p = generate_phantom(s);
        CHECK(code_of([&] { label(p, true); }) == ErrorCode::NoSacrum);
        const auto r = seg::success_criteria(label(p, false), truth_of(p));
        CHECK(r.failure_reason == seg::FailureReason::CountMismatch);
    }
    SUBCASE("sacrum overlapping L5") {
        PhantomSpec s;
        s.s1_overlap = true;
        const Phantom p = generate_phantom(s);
        CHECK(code_of([&] { label(p, true); }) == ErrorCode::OverlapS1Lumbar);
        const auto r = seg::success_criteria(label(p, false), truth_of(p));
        CHECK(r.failure_reason == seg::FailureReason::SacrumOverlapsLumbar);
    }
    SUBCASE("spurious blob") {
        PhantomSpec s;
        s.extra_component = true;
        const Phantom p = generate_phantom(s);
        const auto r = seg::success_criteria(label(p, false), truth_of(p));
        CHECK(r.failure_reason == seg::FailureReason::CentroidNotSolitary);
    }
}

TEST_CASE("generated reports parse back to the truth grades") {
    for (std::uint32_t study = 0; study < 10; ++study) {
        const Phantom p = generate_phantom(PhantomSpec{}, study);
        const auto parsed = report::parse_report(p.report);
        CAPTURE(p.report);
        CHECK(parsed.diagnostics.empty());
        CHECK(parsed.complete);
        REQUIRE(parsed.levels.size() == 6);
        for (std::size_t l = 0; l < 6; ++l)
            for (StenosisSite site : kAllSites)
                CHECK(parsed.levels[l].grade(site) == p.truth_labels[l].grade(site));
    }
}

TEST_CASE("jitter and noise move the data but keep labels valid") {
    PhantomSpec s;
    s.jitter_sigma = 1.0;
    s.noise_sigma = 5.0;
    const Phantom p = generate_phantom(s, 2);
    double moved = 0.0;
    for (std::size_t v = 0; v < 7; ++v)
        moved += std::hypot(p.truth_centroids[v].point.x - p.nominal_centroids[v].point.x,
                            p.truth_centroids[v].point.y - p.nominal_centroids[v].point.y);
    CHECK(moved > 0.0);
    CHECK(seg::success_criteria(label(p), truth_of(p)).success);
}

TEST_CASE("specs that leave the volume are rejected") {
    PhantomSpec s;
    s.dims = {160, 150, 50};
    CHECK(code_of([&] { generate_phantom(s); }) == ErrorCode::SpecOutOfBounds);
    PhantomSpec t;
    t.body_width = -1.0;
    CHECK(code_of([&] { generate_phantom(t); }) == ErrorCode::InvalidConfig);
    PhantomSpec u;
    u.body_height = 40.0;
    CHECK(code_of([&] { generate_phantom(u); }) == ErrorCode::InvalidConfig);
}
