#include <doctest.h>

#include <cmath>
#include <json.hpp>
#include <random>

#include "spinegrade/error.hpp"
#include "spinegrade/evaluation.hpp"

using namespace spinegrade;
using namespace spinegrade::eval;

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

/// O(n_pos * n_neg) pair count, the definition the rank formula must reproduce.
double brute_auc(const std::vector<double>& s, const std::vector<int>& l) {
    double hits = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j)
            if (l[i] == 1 && l[j] == 0) {
                pairs += 1.0;
                hits += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
            }
    return hits / pairs;
}

grading::Vec4 one_hot(std::size_t j, double mass = 0.97) {
    grading::Vec4 p;
    p.fill((1.0 - mass) / 3.0);
    p[j] = mass;
    return p;
}

DiscPrediction disc(const std::string& id, DiscLevel level, std::array<int, 3> truth, std::array<int, 3> pred) {
    DiscPrediction d{id, level, {}, {}};
    for (std::size_t t = 0; t < 3; ++t) {
        if (truth[t] >= 0) d.truth.grade[t] = truth[t];
        d.probs.p[t] = one_hot(static_cast<std::size_t>(pred[t]));
    }
    return d;
}

}  // namespace

TEST_CASE("splits are seeded, disjoint and sized by rounding") {
    std::vector<std::string> ids;
    for (int i = 0; i < 20; ++i) ids.push_back("s" + std::to_string(i));
    ids.push_back("s3");  // duplicates collapse
    const SplitAssignment a = split_dataset(ids, {}, 7);
    CHECK(a.assignment.size() == 20);
    CHECK(a.count(Split::Train) == 14);
    CHECK(a.count(Split::Validation) == 3);
    CHECK(a.count(Split::Test) == 3);
    std::reverse(ids.begin(), ids.end());
    CHECK(split_dataset(ids, {}, 7).assignment == a.assignment);  // input order is irrelevant
    CHECK_FALSE(split_dataset(ids, {}, 8).assignment == a.assignment);
    CHECK(a.ids(Split::Test).size() == 3);
    const auto train = a.ids(Split::Train);
    CHECK(std::is_sorted(train.begin(), train.end()));

    CHECK(code_of([&] { split_dataset(ids, {0.7, 0.2, 0.2}, 1); }) == ErrorCode::BadRatios);
    CHECK(code_of([&] { split_dataset(ids, {1.0, 0.0, 0.0}, 1); }) == ErrorCode::BadRatios);
    CHECK(disc_key("abc", DiscLevel::L4L5) == "abc/L4L5");
    CHECK(to_string(SplitMode::Disc) == "disc");
}

TEST_CASE("class accuracy averages supported classes") {
    ConfusionMatrix cm(2);
    cm.add(0, 0, 8);
    cm.add(0, 1, 2);
    cm.add(1, 0, 3);
    cm.add(1, 1, 7);
    const ClassAccuracy a = class_accuracy(cm);
    CHECK(*a.per_class[0] == doctest::Approx(0.8));
    CHECK(*a.per_class[1] == doctest::Approx(0.7));
    CHECK(a.class_average == doctest::Approx(0.75));

    ConfusionMatrix sparse(4);
    sparse.add(0, 0, 5);
    sparse.add(3, 1, 2);
    const ClassAccuracy s = class_accuracy(sparse);
    CHECK_FALSE(s.per_class[1].has_value());
    CHECK(s.diagnostics.size() == 2);
    CHECK(s.class_average == doctest::Approx(0.5));
    CHECK(code_of([&] { sparse.add(4, 0); }) == ErrorCode::ValueOutOfRange);
}

TEST_CASE("confusion merges sum the folded cells") {
    ConfusionMatrix cm(4);
    std::uint64_t v = 1;
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) cm.add(i, j, v++);
    const ConfusionMatrix m = merge_mild_moderate(cm);
    CHECK(m.classes() == 3);
    CHECK(m.at(1, 1) == 6 + 7 + 10 + 11);
    CHECK(m.at(0, 1) == 2 + 3);
    CHECK(m.at(2, 2) == 16);
    CHECK(m.total() == cm.total());
    const ConfusionMatrix b = binary_collapse(cm);
    CHECK(b.at(0, 0) == 1 + 2 + 3 + 5 + 6 + 7 + 9 + 10 + 11);
    CHECK(b.at(1, 1) == 16);
    CHECK(b.total() == cm.total());
    CHECK(code_of([&] { merge_mild_moderate(m); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("AUC reference cases") {
    CHECK(auc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, std::vector<int>{1, 1, 0, 0}) == 1.0);
    CHECK(auc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, std::vector<int>{1, 0, 1, 0}) == 0.5);
    const std::vector<double> s{0.9, 0.4, 0.8, 0.3};
    const std::vector<int> l{1, 1, 0, 0};
    CHECK(auc(s, l) == 0.75);
    CHECK(brute_auc(s, l) == 0.75);
    CHECK(code_of([] { auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}); }) == ErrorCode::SingleClass);
    CHECK(code_of([] { auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1}); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("AUC matches the pairwise oracle and ignores monotone transforms") {
    std::mt19937_64 rng(61);
    std::uniform_int_distribution<int> bit(0, 1);
    std::uniform_int_distribution<int> level(0, 9);  // coarse scores force ties
    for (int t = 0; t < 100; ++t) {
        std::vector<double> s(30);
        std::vector<int> l(30);
        for (std::size_t i = 0; i < 30; ++i) s[i] = level(rng) / 10.0, l[i] = bit(rng);
        l[0] = 1, l[1] = 0;
        const double a = auc(s, l);
        CHECK(a == doctest::Approx(brute_auc(s, l)).epsilon(1e-12));
        std::vector<double> e(30), c(30);
        for (std::size_t i = 0; i < 30; ++i) e[i] = std::exp(3 * s[i]), c[i] = s[i] * s[i] * s[i] - 7;
        CHECK(auc(e, l) == a);
        CHECK(auc(c, l) == a);
    }
}

TEST_CASE("bootstrap interval is seeded and brackets the estimate") {
    std::mt19937_64 rng(62);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> s(80);
    std::vector<int> l(80);
    for (std::size_t i = 0; i < 80; ++i) l[i] = static_cast<int>(i % 2), s[i] = n(rng) + l[i];
    const AucResult a = auc_with_ci(s, l, 5, 500);
    const AucResult b = auc_with_ci(s, l, 5, 500);
    CHECK(a.ci_low == b.ci_low);
    CHECK(a.ci_high == b.ci_high);
    CHECK(a.ci_low < a.auc);
    CHECK(a.auc < a.ci_high);
    CHECK(a.resamples == 500);
    const AucResult none = auc_with_ci(s, l, 5, 0);
    CHECK(none.ci_low == none.auc);
}

TEST_CASE("per-level binary accuracy pools the foramina") {
    std::vector<DiscPrediction> p{
        disc("a", DiscLevel::L4L5, {3, 3, 0}, {3, 0, 0}),
        disc("b", DiscLevel::L4L5, {0, 1, -1}, {3, 2, 3}),
        disc("b", DiscLevel::L5S1, {0, -1, -1}, {0, 0, 0}),
    };
    CHECK(per_level_binary_accuracy(p, DiscLevel::L4L5, SiteGroup::Central) == 0.5);
    CHECK(per_level_binary_accuracy(p, DiscLevel::L4L5, SiteGroup::Foraminal) == doctest::Approx(2.0 / 3.0));
    CHECK(code_of([&] { per_level_binary_accuracy(p, DiscLevel::L5S1, SiteGroup::Foraminal); }) ==
          ErrorCode::EmptyLevel);
    // A lenient threshold calls every disc positive.
    CHECK(per_level_binary_accuracy(p, DiscLevel::L4L5, SiteGroup::Central, 0.0) == 0.5);
}

TEST_CASE("evaluate assembles per-task metrics and reports") {
    std::vector<DiscPrediction> p;
    for (int i = 0; i < 8; ++i) {
        const int g = i % 4;
        p.push_back(disc("s" + std::to_string(i), kAllDiscLevels[static_cast<std::size_t>(i % 6)], {g, g, g},
                         {g, i == 1 ? 2 : g, g}));
    }
    const MetricReport r = evaluate(p);
    REQUIRE(r.tasks.size() == 3);
    CHECK(r.discs == 8);
    CHECK(r.tasks[0].accuracy.class_average == 1.0);
    CHECK(r.tasks[1].accuracy.class_average == doctest::Approx(0.875));
    CHECK(r.class_average == doctest::Approx((1.0 + 0.875 + 1.0) / 3.0));
    REQUIRE(r.tasks[0].auc.has_value());
    CHECK(r.tasks[0].auc->auc == 1.0);
    CHECK(r.per_level.size() == 6);

    EvalOptions merged;
    merged.merge_mild_moderate = true;
    const MetricReport m = evaluate(p, merged);
    CHECK(m.class_names.size() == 3);
    CHECK(m.tasks[1].accuracy.class_average == 1.0);  // the mild/moderate swap is forgiven

    EvalOptions binary;
    binary.binary = true;
    binary.level = DiscLevel::L1L2;
    const MetricReport b = evaluate(p, binary);
    CHECK(b.discs == 2);
    CHECK(b.per_level.size() == 1);
    CHECK(b.tasks[0].confusion.classes() == 2);

    const auto j = nlohmann::json::parse(to_json(r));
    CHECK(j["class_average"].get<double>() == doctest::Approx(r.class_average));
    CHECK(j["tasks"][1]["task"] == "RFS");
    CHECK(j["tasks"][0]["confusion"][3][3] == 2);
    CHECK(to_text_table(r).find("class avg") != std::string::npos);

    EvalOptions bad;
    bad.threshold = 1.5;
    CHECK(code_of([&] { evaluate(p, bad); }) == ErrorCode::InvalidConfig);
}
