#include <doctest.h>

#include <cmath>
#include <random>

#include "spinegrade/error.hpp"
#include "spinegrade/segmentation.hpp"
#include "support.hpp"

using namespace spinegrade;
using namespace spinegrade::seg;

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

std::vector<Component> components(const Volume3D& v, double min_area = 0.0) {
    return binarize_and_components(MaskVolume(v), {0.5, min_area});
}

/// Seven stacked blocks on a 20 x 80 slice: six lumbar (T12..L5) and one sacral (S1).
struct Column {
    Volume3D lumbar;
    Volume3D sacral;
    std::vector<LabeledPoint> truth;
};

Column column() {
    std::vector<std::pair<int, int>> lumbar_on, sacral_on;
    std::vector<LabeledPoint> truth;
    for (int v = 0; v < 7; ++v) {
        const int j0 = 2 + v * 11;
        auto block = test::rect(5, j0, 14, j0 + 8);
        (v < 6 ? lumbar_on : sacral_on).insert((v < 6 ? lumbar_on : sacral_on).end(), block.begin(), block.end());
        truth.push_back({static_cast<Vertebra>(v), {9.5, j0 + 4.0}});
    }
    return {test::slice_mask(20, 80, lumbar_on), test::slice_mask(20, 80, sacral_on), truth};
}

VertebraSegmentation segment(const Column& c) {
    return assign_levels(SliceGeometry::of(c.lumbar), components(c.lumbar), components(c.sacral));
}

}  // namespace

TEST_CASE("components are 8-connected, area-filtered and ordered cranial first") {
    auto on = test::rect(1, 10, 3, 12);       // 9 px, lower
    auto upper = test::rect(6, 1, 7, 2);      // 4 px, upper
    on.insert(on.end(), upper.begin(), upper.end());
    on.emplace_back(4, 13);                   // diagonal neighbour joins the lower block
    on.emplace_back(9, 18);                   // isolated pixel
    const Volume3D v = test::slice_mask(12, 20, on, 1.0f, {0.5f, 2.0f, 1.0f});
    const auto all = components(v);
    REQUIRE(all.size() == 3);
    CHECK(all[0].pixels.size() == 4);
    CHECK(all[1].pixels.size() == 10);
    CHECK(all[1].area_mm2 == 10.0);
    CHECK(all[2].pixels.size() == 1);
    CHECK(all[0].centroid.x == doctest::Approx(3.25));
    CHECK(all[0].centroid.y == doctest::Approx(3.0));
    CHECK(all[1].i_max == 4);
    CHECK(all[1].j_max == 13);

    const auto big = components(v, 2.0);
    REQUIRE(big.size() == 2);
    CHECK(big[0].pixels.size() == 4);

    CHECK(code_of([&] { binarize_and_components(MaskVolume(v), {1.0, 0.0}); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("threshold is inclusive and the middle slice is used") {
    Volume3D v({4, 4, 3}, {1, 1, 1}, {0, 0, 0});
    v.at(1, 1, 1) = 0.5f;
    v.at(3, 3, 0) = 1.0f;
    const auto c = components(v);
    REQUIRE(c.size() == 1);
    CHECK(c[0].pixels == std::vector<std::uint32_t>{5});
}

TEST_CASE("levels are counted upward from the sacrum") {
    const Column c = column();
    const VertebraSegmentation seg = segment(c);
    REQUIRE(seg.vertebrae.size() == 7);
    for (std::size_t i = 0; i < 7; ++i) CHECK(seg.vertebrae[i].label == kAllVertebrae[i]);
    CHECK(seg.find(Vertebra::S1)->component.centroid.y == doctest::Approx(72.0));
    CHECK(seg.rejected.empty());

    // With only four lumbar blocks the labels still end at L5.
    std::vector<Component> lumbar = components(c.lumbar);
    lumbar.erase(lumbar.begin(), lumbar.begin() + 2);
    const auto partial = assign_levels(seg.geometry, lumbar, components(c.sacral));
    REQUIRE(partial.vertebrae.size() == 5);
    CHECK(partial.vertebrae.front().label == Vertebra::L2);
    CHECK(partial.vertebrae[3].label == Vertebra::L5);
}

TEST_CASE("labeling failures throw in strict mode and are diagnosed in lenient mode") {
    const Column c = column();
    const auto geo = SliceGeometry::of(c.lumbar);
    CHECK(code_of([&] { assign_levels(geo, components(c.lumbar), {}); }) == ErrorCode::NoSacrum);
    const auto lenient = assign_levels_lenient(geo, components(c.lumbar), {});
    CHECK(lenient.vertebrae.back().label == Vertebra::L5);
    CHECK_FALSE(lenient.diagnostics.empty());

    // A sacral block that reaches into L5.
    auto sac = test::rect(5, 58, 14, 76);
    const Volume3D overlapping = test::slice_mask(20, 80, sac);
    CHECK(code_of([&] { assign_levels(geo, components(c.lumbar), components(overlapping)); }) ==
          ErrorCode::OverlapS1Lumbar);
    const auto ov = assign_levels_lenient(geo, components(c.lumbar), components(overlapping));
    CHECK(ov.find(Vertebra::S1) != nullptr);
}

TEST_CASE("dice identities") {
    std::vector<float> a(100, 0.0f), b(100, 0.0f);
    for (int i = 0; i < 50; ++i) a[i] = 1.0f, b[50 + i] = 1.0f;
    CHECK(dice_coefficient(a, a) == 1.0);
    CHECK(std::abs(dice_coefficient(a, b) - 1.0 / 101.0) < 1e-12);
    std::vector<float> z(100, 0.0f);
    CHECK(dice_coefficient(z, z) == 1.0);  // epsilon makes empty-vs-empty perfect

    std::mt19937_64 rng(21);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (int t = 0; t < 100; ++t) {
        std::vector<float> p(257), g(257);
        for (auto& x : p) x = u(rng);
        for (auto& x : g) x = u(rng);
        const double d = dice_coefficient(p, g);
        CHECK(d == dice_coefficient(g, p));
        CHECK(d > 0.0);
        CHECK(d <= 1.0);
    }
    CHECK(code_of([&] { dice_coefficient(std::span<const float>(a), std::span<const float>(a).first(3)); }) ==
          ErrorCode::GeometryMismatch);
    const MaskVolume m1(test::slice_mask(4, 4, {}));
    const MaskVolume m2(test::slice_mask(4, 5, {}));
    CHECK(code_of([&] { dice_coefficient(m1, m2); }) == ErrorCode::GeometryMismatch);
}

TEST_CASE("centroid error reports per-vertebra distances") {
    const Column c = column();
    const VertebraSegmentation seg = segment(c);
    auto truth = c.truth;
    truth[2].point.x += 3.0;
    truth[2].point.y += 4.0;
    const CentroidErrors e = centroid_error(seg, truth);
    REQUIRE(e.per_vertebra.size() == 7);
    CHECK(e.per_vertebra[2].second == doctest::Approx(5.0));
    CHECK(e.mean == doctest::Approx(5.0 / 7.0));
    CHECK(e.stddev == doctest::Approx(std::sqrt(25.0 / 7.0 - 25.0 / 49.0)));
    truth.pop_back();
    CHECK(code_of([&] { centroid_error(seg, truth); }) == ErrorCode::LabelMismatch);
}

TEST_CASE("success criteria flag each failure with its reason") {
    const Column c = column();
    const TruthSpine truth{c.truth, std::nullopt};
    const auto geo = SliceGeometry::of(c.lumbar);

    SUBCASE("clean") {
        const auto s = success_criteria(segment(c), truth);
        CHECK(s.success);
        CHECK_FALSE(s.failure_reason.has_value());
    }
    SUBCASE("two bodies fused into one area") {
        Volume3D fused = c.lumbar;
        for (int i = 5; i <= 14; ++i) fused.at(i, 11, 0) = fused.at(i, 12, 0) = 1.0f;
        const auto seg = assign_levels_lenient(geo, components(fused), components(c.sacral));
        CHECK(success_criteria(seg, truth).failure_reason == FailureReason::CentroidNotSolitary);
    }
    SUBCASE("a missed body") {
        auto lumbar = components(c.lumbar);
        lumbar.erase(lumbar.begin());
        const auto seg = assign_levels_lenient(geo, lumbar, components(c.sacral));
        CHECK(success_criteria(seg, truth).failure_reason == FailureReason::CountMismatch);
    }
    SUBCASE("sacrum reaching into the lumbar spine") {
        // S1 grows upward to touch L5, but each area still holds exactly one centroid.
        Volume3D sac = c.sacral;
        for (int j = 58; j <= 68; ++j) sac.at(5, j, 0) = sac.at(6, j, 0) = 1.0f;
        const auto seg = assign_levels_lenient(geo, components(c.lumbar), components(sac));
        const auto s = success_criteria(seg, truth);
        CHECK_FALSE(s.success);
        CHECK(s.failure_reason == FailureReason::SacrumOverlapsLumbar);
    }
    CHECK(to_string(FailureReason::CountMismatch) == "count_mismatch");
}

TEST_CASE("per-label scores against a truth label map") {
    const Column c = column();
    Volume3D labels({20, 80, 1}, {1, 1, 1}, {0, 0, 0});
    for (std::uint32_t p = 0; p < 20 * 80; ++p) {
        if (c.lumbar.data()[p] > 0 || c.sacral.data()[p] > 0) {
            const std::uint32_t j = p / 20;
            labels.data()[p] = static_cast<float>((j - 2) / 11 + 1);
        }
    }
    const ScoreReport r = score_segmentation(segment(c), {c.truth, labels});
    CHECK(r.overall.success);
    CHECK(r.overall.dice == 1.0);
    CHECK(r.overall.centroid_error_mm == doctest::Approx(0.0));
    REQUIRE(r.per_label.size() == 7);
    CHECK(r.per_label[6].label == Vertebra::S1);

    const ScoreReport no_map = score_segmentation(segment(c), {c.truth, std::nullopt});
    CHECK(std::isnan(no_map.overall.dice));
}
