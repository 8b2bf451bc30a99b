#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "spinegrade/error.hpp"
#include "spinegrade/pipeline.hpp"
#include "support.hpp"

using namespace spinegrade;
using namespace spinegrade::pipeline;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Runs the CLI with the given arguments (stdout and stderr discarded) and returns its exit code.
int cli(const std::string& args) {
    const std::string cmd = std::string("\"") + SPINEGRADE_CLI + "\" " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

/// Text after the provenance line.
std::string body(const std::string& csv) { return csv.substr(csv.find('\n') + 1); }

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

std::size_t count_entries(const fs::path& dir) {
    std::size_t n = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++n;
    return n;
}

}  // namespace

TEST_CASE("provenance and number formatting") {
    CHECK(provenance_line("split", {{"seed", "7"}, {"mode", "study"}}) ==
          "# spinegrade " + std::string(version()) + " split seed=7 mode=study\n");
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(1.0) == "1");
    CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("parallel_for visits every index and rethrows") {
    std::vector<int> seen(100, 0);
    parallel_for(seen.size(), 4, [&](std::size_t i) { seen[i] += 1; });
    CHECK(std::all_of(seen.begin(), seen.end(), [](int v) { return v == 1; }));
    CHECK_THROWS_AS(parallel_for(10, 2,
                                 [](std::size_t i) {
                                     if (i == 5) throw Error(ErrorCode::Io, "boom");
                                 }),
                    Error);
}

TEST_CASE("phantom dataset feeds the segmentation and extraction stages") {
    test::TempDir dir("dataset");
    write_phantom_dataset(phantom::PhantomSpec{}, 3, dir.path(), 2);
    const auto studies = list_studies(dir / "studies");
    REQUIRE(studies.size() == 3);
    CHECK(studies[0].id == "phantom_000");
    CHECK(fs::exists(dir / "reports" / "phantom_002.txt"));
    CHECK(slurp(dir / "truth_labels.csv").rfind("# spinegrade", 0) == 0);

    const auto centroids = read_centroids_csv(studies[1].dir / kCentroidsFile);
    CHECK(centroids.size() == 7);
    std::ostringstream cbuf;
    write_centroids_csv(cbuf, centroids);
    CHECK(cbuf.str() == slurp(studies[1].dir / kCentroidsFile));

    const StudySegmentation s = segment_study(studies[0], {});
    REQUIRE(s.score.has_value());
    CHECK(s.score->overall.success);
    std::ostringstream scores;
    write_scores_csv(scores, {s});
    CHECK(scores.str().find("phantom_000,S1,") != std::string::npos);

    const auto discs = extract_study(studies[0], {});
    REQUIRE(discs.size() == 6);
    CHECK(discs[0].features.size() == 64);
    CHECK(discs[5].level == DiscLevel::L5S1);
    std::ostringstream fbuf;
    write_features_csv(fbuf, discs);
    const fs::path fpath = dir / "features.csv";
    std::ofstream(fpath) << fbuf.str();
    const auto back = read_features_csv(fpath);
    REQUIRE(back.size() == 6);
    CHECK(back[3].features == discs[3].features);  // shortest round-trip decimals are exact
    const auto frames = nlohmann::json::parse(frames_json(discs));
    CHECK(frames.size() == 6);

    CHECK_THROWS_AS(list_studies(dir / "nope"), Error);
}

TEST_CASE("split files round-trip in both modes") {
    const auto split = eval::split_dataset({"a", "b", "c", "d", "e", "f", "g", "h"}, {}, 3);
    test::TempDir dir("split");
    std::ostringstream buf;
    write_split_csv(buf, split);
    std::ofstream(dir / "split.csv") << buf.str();
    const auto back = read_split_csv(dir / "split.csv");
    CHECK(back.assignment == split.assignment);
    CHECK(back.mode == eval::SplitMode::Study);

    const auto discs = eval::split_dataset({"a/L4L5", "a/L5S1", "b/L4L5"}, {}, 3, eval::SplitMode::Disc);
    std::ostringstream dbuf;
    write_split_csv(dbuf, discs);
    std::ofstream(dir / "disc.csv") << dbuf.str();
    CHECK(read_split_csv(dir / "disc.csv").mode == eval::SplitMode::Disc);

    DiscRecord r;
    r.study_id = "a";
    r.level = DiscLevel::L4L5;
    CHECK(split_key(r, eval::SplitMode::Study) == "a");
    CHECK(split_key(r, eval::SplitMode::Disc) == "a/L4L5");
}

TEST_CASE("pipeline configuration is validated up front") {
    PipelineConfig c;
    CHECK_NOTHROW(c.validate());
    c.ratios = {0.5, 0.5, 0.5};
    CHECK_THROWS_AS(c.validate(), Error);
    PipelineConfig d;
    d.count = 0;
    CHECK_THROWS_AS(d.validate(), Error);
    const auto pairs = PipelineConfig{}.pairs();
    CHECK(std::any_of(pairs.begin(), pairs.end(), [](const auto& kv) { return kv.first == "split_seed"; }));
}

TEST_CASE("command line stages chain over files") {
    test::TempDir dir("cli");
    const fs::path d = dir.path();
    REQUIRE(cli("phantom-gen --count 6 -o " + q(d / "ph")) == 0);
    REQUIRE(cli("parse-reports " + q(d / "ph" / "reports") + " -o " + q(d / "labels.csv")) == 0);
    REQUIRE(cli("segment-score " + q(d / "ph" / "studies") + " -o " + q(d / "scores.csv")) == 0);
    REQUIRE(cli("extract-discs " + q(d / "ph" / "studies") + " -o " + q(d / "discs")) == 0);
    REQUIRE(cli("train-toy --features " + q(d / "discs" / "features.csv") + " --labels " + q(d / "labels.csv") +
                " -o " + q(d / "model")) == 0);
    REQUIRE(cli("evaluate --model " + q(d / "model" / "model.spnm") + " --features " +
                q(d / "discs" / "features.csv") + " --labels " + q(d / "labels.csv") + " --split " +
                q(d / "model" / "split.csv") + " --binary -o " + q(d / "eval")) == 0);

    // Parsed report grades match the generating grades row for row.
    CHECK(body(slurp(d / "labels.csv")) == body(slurp(d / "ph" / "truth_labels.csv")));
    const auto metrics = nlohmann::json::parse(slurp(d / "eval" / "metrics.json"));
    CHECK(metrics["class_names"].size() == 2);
    const auto manifest = nlohmann::json::parse(slurp(d / "labels.csv.manifest.json"));
    CHECK(manifest["command"] == "parse-reports");
    CHECK(manifest.contains("isa"));
    CHECK(fs::exists(d / "discs" / "manifest.json"));
}

TEST_CASE("command line errors exit 1 and leave no outputs") {
    test::TempDir dir("cli_err");
    const fs::path d = dir.path();
    CHECK(cli("parse-reports " + q(d / "missing") + " -o " + q(d / "labels.csv")) == 1);
    CHECK(cli("extract-discs " + q(d / "missing") + " -o " + q(d / "discs")) == 1);
    std::ofstream(d / "bad.toml") << "epochs = 0\n";
    CHECK(cli("pipeline --count 4 --config " + q(d / "bad.toml") + " -o " + q(d / "run")) == 1);
    std::ofstream(d / "ph.toml") << "colour = blue\n";
    CHECK(cli("phantom-gen --phantom " + q(d / "ph.toml") + " -o " + q(d / "ph")) == 1);
    CHECK(cli("evaluate --model x --features y --labels z --threshold 2 -o " + q(d / "ev")) == 1);
    CHECK(cli("no-such-command") == 1);
    CHECK(count_entries(d) == 2);  // only the two config files written above
}
