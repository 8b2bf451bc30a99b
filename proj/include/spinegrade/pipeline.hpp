#pragma once

// Batch stages behind the command-line front end. Every stage reads and writes plain
// files so it can be re-run on its own; `run_pipeline` chains them over a phantom dataset.
//
// Study directory layout (one directory per study, named by its id):
//   sagittal.spnv      source series
//   lumbar_mask.spnv   lumbar probability map, mid-sagittal slice (nz = 1)
//   sacral_mask.spnv   sacral probability map, mid-sagittal slice (nz = 1)
//   label_map.spnv     optional truth label map (vertebra index + 1)
//   centroids.csv      optional truth centroids: label,x_mm,y_mm

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "spinegrade/evaluation.hpp"
#include "spinegrade/phantom.hpp"
#include "spinegrade/report_parser.hpp"
#include "spinegrade/segmentation.hpp"
#include "spinegrade/spine_curve.hpp"
#include "spinegrade/toy_model.hpp"
#include "spinegrade/volume_io.hpp"

namespace spinegrade::pipeline {

namespace fs = std::filesystem;

inline constexpr const char* kSagittalFile = "sagittal.spnv";
inline constexpr const char* kLumbarFile = "lumbar_mask.spnv";
inline constexpr const char* kSacralFile = "sacral_mask.spnv";
inline constexpr const char* kLabelMapFile = "label_map.spnv";
inline constexpr const char* kCentroidsFile = "centroids.csv";

/// Ordered key/value description of a configuration, written into provenance headers and
/// manifests. Paths are never included so outputs stay byte-identical across locations.
using ConfigPairs = std::vector<std::pair<std::string, std::string>>;

std::string_view version() noexcept;

/// "# spinegrade <version> <stage> key=value ..." line that starts every CSV output.
std::string provenance_line(std::string_view stage, const ConfigPairs& config);

/// Shortest round-trip decimal form.
std::string format_double(double v);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads; the first exception is rethrown.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn);

struct Study {
    std::string id;
    fs::path dir;
};

/// Immediate subdirectories of root that hold a lumbar mask, sorted by name.
/// Throws Io when root is not a directory.
std::vector<Study> list_studies(const fs::path& root);

// ---- phantom-gen ----------------------------------------------------------------------

/// Writes count studies under out/studies/<id>/, their reports under out/reports/<id>.txt
/// and the generating grades to out/truth_labels.csv.
void write_phantom_dataset(const phantom::PhantomSpec& spec, std::uint32_t count, const fs::path& out,
                           unsigned jobs = 1);

void write_centroids_csv(std::ostream& out, const std::vector<seg::LabeledPoint>& points);
std::vector<seg::LabeledPoint> read_centroids_csv(const fs::path& path);

// ---- segment-score --------------------------------------------------------------------

struct StudySegmentation {
    std::string study_id;
    seg::VertebraSegmentation segmentation;  // lenient labeling, so faulty detections can be scored
    std::optional<seg::ScoreReport> score;   // present when truth centroids exist
};

StudySegmentation segment_study(const Study& study, const seg::ComponentOptions& options);

/// `study_id,label,dice,centroid_err_mm,success,reason`; one row per labeled vertebra, or a
/// single row with an empty label when nothing was labeled.
void write_scores_csv(std::ostream& out, const std::vector<StudySegmentation>& studies);

// ---- extract-discs --------------------------------------------------------------------

struct ExtractOptions {
    seg::ComponentOptions components;
    int degree = geom::kDefaultCurveDegree;
    std::optional<fs::path> keep_volumes;  // write SPNV pairs and JSON sidecars here
};

struct DiscRecord {
    std::string study_id;
    DiscLevel level{};
    geom::DiscFrame frame;
    double axial_coverage = 0.0;
    double sagittal_coverage = 0.0;
    std::vector<double> features;
};

/// Segments with strict level assignment, fits the spine curve, builds frames at the
/// mid-sagittal slice and resamples every disc. Throws the first stage error.
std::vector<DiscRecord> extract_study(const Study& study, const ExtractOptions& options);

/// `study_id,level,f0,...,fN`
void write_features_csv(std::ostream& out, const std::vector<DiscRecord>& discs);
std::vector<DiscRecord> read_features_csv(const fs::path& path);

/// Frame origin and bases per disc (full-precision decimals).
std::string frames_json(const std::vector<DiscRecord>& discs);
std::string sidecar_json(const DiscRecord& disc);

// ---- train-toy / evaluate -------------------------------------------------------------

void write_split_csv(std::ostream& out, const eval::SplitAssignment& split);
eval::SplitAssignment read_split_csv(const fs::path& path);

/// Split key of a disc under the given mode.
std::string split_key(const DiscRecord& disc, eval::SplitMode mode);

/// Feature rows joined with their labels; discs without a label row are dropped, as are
/// rows whose split key is not in `keep` (when given).
std::vector<grading::Sample> join_samples(const std::vector<DiscRecord>& discs, const io::LabelTable& labels,
                                          const eval::SplitAssignment* split = nullptr,
                                          std::optional<eval::Split> keep = std::nullopt);

std::vector<eval::DiscPrediction> predict(const grading::ToyModel& model, const std::vector<DiscRecord>& discs,
                                          const io::LabelTable& labels, const eval::SplitAssignment* split,
                                          std::optional<eval::Split> keep);

/// `study_id,level,task,truth,p0,p1,p2,p3`
void write_predictions_csv(std::ostream& out, const std::vector<eval::DiscPrediction>& preds);

void write_loss_history_csv(std::ostream& out, const std::vector<double>& history);

// ---- pipeline -------------------------------------------------------------------------

struct PipelineConfig {
    phantom::PhantomSpec spec;
    std::uint32_t count = 20;
    std::uint64_t seed = 7;  // split seed
    eval::SplitRatios ratios;
    eval::SplitMode split_mode = eval::SplitMode::Study;
    seg::ComponentOptions components;
    int degree = geom::kDefaultCurveDegree;
    grading::ToyConfig toy;
    eval::EvalOptions eval;
    unsigned jobs = 1;
    bool keep_volumes = false;

    /// Throws InvalidConfig / BadRatios before any stage runs.
    void validate() const;
    ConfigPairs pairs() const;
};

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct PipelineSummary {
    std::size_t studies = 0;
    std::size_t segmentation_successes = 0;
    std::size_t parsed_levels = 0;
    std::size_t parse_mismatches = 0;  // parsed labels differing from the generating grades
    std::size_t discs = 0;
    eval::SplitAssignment split;
    std::vector<double> loss_history;
    eval::MetricReport validation;
    eval::MetricReport test;
    std::vector<StageTiming> timings;
    std::vector<std::string> outputs;  // relative to the output directory
};

/// phantom-gen -> parse-reports -> segment-score -> extract-discs -> split -> train-toy ->
/// evaluate, all under `out`.
PipelineSummary run_pipeline(const PipelineConfig& config, const fs::path& out);

}  // namespace spinegrade::pipeline
