#include <doctest.h>

#include <chrono>
#include <fstream>
#include <sstream>

#include "spinegrade/error.hpp"
#include "spinegrade/report_parser.hpp"
#include "support.hpp"

using namespace spinegrade;
using namespace spinegrade::report;

namespace {

struct Triple {
    std::optional<int> scs, rfs, lfs;
};

Triple grades_at(const ReportParse& r, DiscLevel level) {
    for (const auto& l : r.levels)
        if (l.level() == level) {
            auto v = [&](StenosisSite s) -> std::optional<int> {
                const auto g = l.grade(s);
                return g ? std::optional<int>(g->value()) : std::nullopt;
            };
            return {v(StenosisSite::SCS), v(StenosisSite::RFS), v(StenosisSite::LFS)};
        }
    FAIL("level not found");
    return {};
}

std::size_t count_kind(const ReportParse& r, DiagnosticKind k) {
    std::size_t n = 0;
    for (const auto& d : r.diagnostics) n += d.kind == k ? 1 : 0;
    return n;
}

void check(const std::string& text, DiscLevel level, Triple expect) {
    CAPTURE(text);
    const ReportParse r = parse_report(text);
    const Triple got = grades_at(r, level);
    CHECK(got.scs == expect.scs);
    CHECK(got.rfs == expect.rfs);
    CHECK(got.lfs == expect.lfs);
}

}  // namespace

TEST_CASE("complex sentence constructions yield the expected triples") {
    check("L4-L5: There is no significant central canal stenosis and mild right and moderate left foraminal "
          "narrowing.",
          DiscLevel::L4L5, {0, 1, 2});
    check("L4-L5: Moderate right and mild left stenosis are present. No evidence of spinal canal narrowing is "
          "observed.",
          DiscLevel::L4L5, {0, 2, 1});
    check("L4-L5: Severe canal stenosis and bilateral foraminal narrowing which is severe as well.",
          DiscLevel::L4L5, {3, 3, 3});
}

TEST_CASE("intermediate descriptors take the higher grade") {
    CHECK(match_severity("mild-moderate").value() == 2);
    CHECK(match_severity("mild to moderate").value() == 2);
    CHECK(match_severity("moderate-severe").value() == 3);
    CHECK(match_severity("moderate to severe").value() == 3);
    CHECK(match_severity("mild").value() == 1);
    CHECK(match_severity("no significant").value() == 0);
    CHECK_THROWS_AS(match_severity("marked"), Error);
    check("L1-L2: Mild-moderate canal stenosis. Moderate-severe bilateral foraminal stenosis.", DiscLevel::L1L2,
          {2, 3, 3});
}

TEST_CASE("every listed synonym maps without UnknownSeverity") {
    const std::vector<std::string> stenosis{"stenosis",     "narrowing",           "compromise",
                                            "triangulation", "nerve root encroachment", "neural impingement"};
    const std::vector<std::string> canal{"central canal", "central spinal canal", "central spinal", "spinal canal",
                                         "central zone",  "central",              "canal"};
    const std::vector<std::string> foramen{"neural foramen", "neuro-foramen", "neuroforamen", "foramen",
                                           "neuroforaminal"};
    for (const auto& st : stenosis) {
        for (const auto& site : canal) {
            const auto r = parse_report("L2-L3: Mild " + site + " " + st + ".");
            CAPTURE(site);
            CAPTURE(st);
            CHECK(r.diagnostics.empty());
            CHECK(grades_at(r, DiscLevel::L2L3).scs == 1);
        }
        for (const auto& site : foramen) {
            const auto r = parse_report("L2-L3: Moderate " + site + " " + st + ".");
            CAPTURE(site);
            CAPTURE(st);
            CHECK(r.diagnostics.empty());
            CHECK(grades_at(r, DiscLevel::L2L3).rfs == 2);
            CHECK(grades_at(r, DiscLevel::L2L3).lfs == 2);
        }
    }
    for (const std::string normal : {"Normal.", "Unremarkable.", "Without significant spinal canal or foraminal stenosis."}) {
        const auto r = parse_report("L3-L4: " + normal);
        CAPTURE(normal);
        CHECK(count_kind(r, DiagnosticKind::UnknownSeverity) == 0);
        check("L3-L4: " + normal, DiscLevel::L3L4, {0, 0, 0});
    }
}

TEST_CASE("laterality binds in either order") {
    check("L4-L5: mild left and severe right neural foraminal narrowing", DiscLevel::L4L5, {std::nullopt, 3, 1});
    check("L5-S1: Right foraminal stenosis is moderate.", DiscLevel::L5S1, {std::nullopt, 2, std::nullopt});
}

TEST_CASE("degraded text surfaces diagnostics instead of throwing") {
    SUBCASE("missing severity") {
        const auto r = parse_report("L5-S1: canal stenosis.");
        CHECK(count_kind(r, DiagnosticKind::UnknownSeverity) == 1);
        CHECK_FALSE(grades_at(r, DiscLevel::L5S1).scs.has_value());
    }
    SUBCASE("no site cue") {
        const auto r = parse_report("L4-L5: Mild stenosis.");
        CHECK(count_kind(r, DiagnosticKind::AmbiguousBinding) == 1);
    }
    SUBCASE("first grade wins") {
        const auto r = parse_report("L4-L5: mild canal stenosis. Severe canal stenosis.");
        CHECK(count_kind(r, DiagnosticKind::ConflictingGrade) == 1);
        CHECK(grades_at(r, DiscLevel::L4L5).scs == 1);
    }
    SUBCASE("text before any level") {
        const auto r = parse_report("Mild canal stenosis. L4-L5: normal.");
        CHECK(count_kind(r, DiagnosticKind::Unscoped) == 1);
        CHECK(grades_at(r, DiscLevel::L4L5).scs == 0);
    }
    SUBCASE("several levels in one sentence") {
        const auto r = parse_report("At L3-L4 and L4-L5 there is mild canal stenosis.");
        CHECK(count_kind(r, DiagnosticKind::MultipleLevels) == 1);
        CHECK(grades_at(r, DiscLevel::L3L4).scs == 1);
    }
}

TEST_CASE("level headings accept abbreviated spellings") {
    const auto r = parse_report("L4-5: Moderate central canal stenosis.  T12-L1: normal.");
    CHECK(grades_at(r, DiscLevel::L4L5).scs == 2);
    CHECK(grades_at(r, DiscLevel::T12L1).lfs == 0);
}

TEST_CASE("provenance spans point into the raw report") {
    const std::string raw = "L4-L5:   There is  MODERATE central canal stenosis.";
    const auto r = parse_report(raw);
    REQUIRE(r.levels.size() == 1);
    const auto& prov = r.levels[0].provenance();
    REQUIRE_FALSE(prov.empty());
    CHECK(raw.substr(prov[0].span.begin, prov[0].span.end - prov[0].span.begin) == "MODERATE");
}

TEST_CASE("normalization keeps an offset per output byte") {
    const NormalizedText n = normalize("  Mild\t\tCANAL  ");
    CHECK(n.text == "mild canal");
    CHECK(n.offsets.size() == n.text.size() + 1);
    const TextSpan s = n.to_original(5, 10);
    CHECK(s.begin == 8);
    CHECK(s.end == 13);
}

TEST_CASE("completeness requires all six levels with all three grades") {
    std::string full;
    for (const char* l : {"T12-L1", "L1-L2", "L2-L3", "L3-L4", "L4-L5", "L5-S1"}) full += std::string(l) + ": normal. ";
    CHECK(parse_report(full).complete);
    CHECK_FALSE(parse_report("L4-L5: normal.").complete);
}

TEST_CASE("a vocabulary table adds synonyms without code changes") {
    const std::string extra = std::string(Vocabulary::builtin_table_text()) + "\ncritical\tseverity\t3\n";
    const Vocabulary v = Vocabulary::parse(extra);
    CHECK(parse_report("L4-L5: critical canal stenosis.", v).levels.at(0).grade(StenosisSite::SCS)->value() == 3);
    CHECK(count_kind(parse_report("L4-L5: critical canal stenosis."), DiagnosticKind::UnknownSeverity) == 1);
    CHECK_THROWS_AS(Vocabulary::parse("mild\tunknown-category\t1\n"), Error);
}

TEST_CASE("label CSV output") {
    std::vector<StudyLabels> studies{{"s1", parse_report("L4-L5: mild canal stenosis.")}};
    std::ostringstream out;
    write_label_csv(out, studies);
    CHECK(out.str() == "study_id,level,scs,rfs,lfs,complete\ns1,L4L5,1,,,false\n");
}

TEST_CASE("report inputs from a directory and from a record file") {
    test::TempDir dir("reports");
    std::ofstream(dir / "b.txt") << "L4-L5: normal.";
    std::ofstream(dir / "a.txt") << "L1-L2: mild canal stenosis.";
    const auto from_dir = read_report_inputs(dir.path().string());
    REQUIRE(from_dir.size() == 2);
    CHECK(from_dir[0].first == "a");
    CHECK(from_dir[1].second == "L4-L5: normal.");

    test::TempDir rec("records");
    std::ofstream(rec / "all.tsv") << "x1\tL4-L5: normal.\nx2\tL5-S1: severe canal stenosis.\n";
    const auto from_records = read_report_inputs((rec / "all.tsv").string());
    REQUIRE(from_records.size() == 2);
    CHECK(from_records[1].first == "x2");
}

TEST_CASE("parsing the fixtures is fast") {
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < 200; ++i)
        parse_report("L4-L5: There is no significant central canal stenosis and mild right and moderate left "
                     "foraminal narrowing. L5-S1: Severe canal stenosis and bilateral foraminal narrowing which is "
                     "severe as well.");
    CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 1.0);
}
