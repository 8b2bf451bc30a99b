// Command-line front end: one subcommand per stage plus `pipeline`, which chains them.
//
// Exit codes: 0 success, 1 validation error (bad flags, bad config, missing input),
// 2 data error (malformed or inconsistent input data).

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <sstream>

#include "spinegrade/error.hpp"
#include "spinegrade/kernels.hpp"
#include "spinegrade/pipeline.hpp"

namespace {

using namespace spinegrade;
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitData = 2;

/// Raised for command-line level problems that are not library errors.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require_file(const fs::path& p, const char* what) {
    if (!fs::is_regular_file(p)) throw UsageError(std::string(what) + " not found: " + p.string());
}

void require_dir(const fs::path& p, const char* what) {
    if (!fs::is_directory(p)) throw UsageError(std::string(what) + " not found: " + p.string());
}

void require_path(const fs::path& p, const char* what) {
    if (!fs::exists(p)) throw UsageError(std::string(what) + " not found: " + p.string());
}

void write_file(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + p.string());
    out << text;
    if (!out) throw Error(ErrorCode::Io, "write failed: " + p.string());
}

std::string default_out(const char* leaf) {
    const char* env = std::getenv("SPINEGRADE_OUT");
    return env != nullptr && *env != '\0' ? (fs::path(env) / leaf).string() : std::string(leaf);
}

/// Collects what every run manifest records.
class Manifest {
public:
    explicit Manifest(std::string command) : command_(std::move(command)), start_(Clock::now()) {}

    void input(const fs::path& p) {
        json j{{"path", p.string()}};
        if (fs::is_regular_file(p)) j["bytes"] = fs::file_size(p);
        inputs_.push_back(std::move(j));
    }
    void config(const pipeline::ConfigPairs& pairs) {
        for (const auto& [k, v] : pairs) config_[k] = v;
    }
    void config(const std::string& key, const std::string& value) { config_[key] = value; }
    void output(const std::string& p) { outputs_.push_back(p); }
    void lap(const std::string& stage) {
        const auto now = Clock::now();
        timings_[stage] = std::chrono::duration<double>(now - lap_start_).count();
        lap_start_ = now;
    }
    void timing(const std::string& stage, double seconds) { timings_[stage] = seconds; }

    void write(const fs::path& path) {
        timings_["total"] = std::chrono::duration<double>(Clock::now() - start_).count();
        json j;
        j["tool"] = "spinegrade";
        j["version"] = std::string(pipeline::version());
        j["command"] = command_;
        j["isa"] = std::string(kernels::to_string(kernels::active().isa));
        j["inputs"] = inputs_;
        j["config"] = config_;
        j["outputs"] = outputs_;
        j["timings_s"] = timings_;
        write_file(path, j.dump(2) + "\n");
    }

private:
    using Clock = std::chrono::steady_clock;
    std::string command_;
    Clock::time_point start_;
    Clock::time_point lap_start_ = Clock::now();
    json inputs_ = json::array();
    json config_ = json::object();
    json outputs_ = json::array();
    json timings_ = json::object();
};

std::optional<DiscLevel> level_option(const std::string& text) {
    if (text.empty()) return std::nullopt;
    const auto level = parse_disc_level(text);
    if (!level) throw UsageError("unknown level '" + text + "'");
    return level;
}

pipeline::ConfigPairs eval_pairs(const eval::EvalOptions& o) {
    pipeline::ConfigPairs p{{"merge_mild_moderate", o.merge_mild_moderate ? "true" : "false"},
                            {"binary", o.binary ? "true" : "false"},
                            {"decision_threshold", pipeline::format_double(o.threshold)},
                            {"bootstrap_seed", std::to_string(o.bootstrap_seed)},
                            {"bootstrap_resamples", std::to_string(o.bootstrap_resamples)}};
    if (o.level) p.emplace_back("level", std::string(to_string(*o.level)));
    return p;
}

pipeline::ConfigPairs text_pairs(const std::string& config_text) {
    pipeline::ConfigPairs p;
    std::istringstream in(config_text);
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find(" = ");
        if (eq != std::string::npos) p.emplace_back(line.substr(0, eq), line.substr(eq + 3));
    }
    return p;
}

void validate_eval(const eval::EvalOptions& o) {
    if (!(o.threshold >= 0.0 && o.threshold <= 1.0))
        throw Error(ErrorCode::InvalidConfig, "--threshold must lie in [0,1]");
    if (o.merge_mild_moderate && o.binary)
        throw Error(ErrorCode::InvalidConfig, "--merge-mild-moderate and --binary are exclusive");
}

grading::ClassWeights train_weights(const std::vector<grading::Sample>& train) {
    std::vector<grading::Targets> t;
    t.reserve(train.size());
    for (const auto& s : train) t.push_back(s.targets);
    return grading::class_weights(grading::count_classes(t));
}

io::LabelTable load_labels(const fs::path& p) {
    io::LabelTableRead r = io::read_labels(p.string());
    for (const auto& e : r.errors) std::cerr << p.string() << ":" << e.line << ": " << e.message << "\n";
    r.throw_if_errors();
    return std::move(r.table);
}

// ---- subcommands ----------------------------------------------------------------------

struct ParseArgs {
    std::string input;
    std::string out;
    std::string vocab;
};

int run_parse(const ParseArgs& a) {
    require_path(a.input, "report input");
    if (!a.vocab.empty()) require_file(a.vocab, "vocabulary");
    const report::Vocabulary vocab =
        a.vocab.empty() ? report::Vocabulary::builtin() : report::Vocabulary::load(a.vocab);
    const auto inputs = report::read_report_inputs(a.input);
    if (inputs.empty()) throw UsageError("no reports found in " + a.input);

    Manifest m("parse-reports");
    m.input(a.input);
    if (!a.vocab.empty()) m.input(a.vocab);
    std::vector<report::StudyLabels> parsed;
    std::map<std::string, std::size_t> kinds;
    for (const auto& [id, text] : inputs) {
        parsed.push_back({id, report::parse_report(text, vocab)});
        for (const auto& d : parsed.back().parse.diagnostics) {
            ++kinds[std::string(report::to_string(d.kind))];
            std::cerr << id << ": " << report::to_string(d.kind) << ": " << d.message << "\n";
        }
    }
    m.lap("parse");
    std::ostringstream o;
    o << pipeline::provenance_line("parse-reports", {{"vocabulary", a.vocab.empty() ? "builtin" : "custom"}});
    report::write_label_csv(o, parsed);
    write_file(a.out, o.str());
    m.output(a.out);
    m.config("vocabulary", a.vocab.empty() ? "builtin" : "custom");
    for (const auto& [k, n] : kinds) m.config("diagnostics." + k, std::to_string(n));
    m.write(a.out + ".manifest.json");
    std::cerr << "parsed " << parsed.size() << " reports\n";
    return kExitOk;
}

struct SegmentArgs {
    std::string input;
    std::string out;
    seg::ComponentOptions components;
    unsigned jobs = 1;
};

int run_segment(const SegmentArgs& a) {
    require_dir(a.input, "study directory");
    if (!(a.components.threshold > 0.0 && a.components.threshold < 1.0))
        throw Error(ErrorCode::InvalidConfig, "--mask-threshold must lie in (0,1)");
    const auto studies = pipeline::list_studies(a.input);
    if (studies.empty()) throw UsageError("no studies found in " + a.input);

    Manifest m("segment-score");
    m.input(a.input);
    const pipeline::ConfigPairs pairs{{"threshold", pipeline::format_double(a.components.threshold)},
                                      {"min_area_mm2", pipeline::format_double(a.components.min_area_mm2)}};
    m.config(pairs);
    std::vector<pipeline::StudySegmentation> segs(studies.size());
    pipeline::parallel_for(studies.size(), a.jobs,
                           [&](std::size_t i) { segs[i] = pipeline::segment_study(studies[i], a.components); });
    m.lap("segment");
    std::ostringstream o;
    o << pipeline::provenance_line("segment-score", pairs);
    pipeline::write_scores_csv(o, segs);
    write_file(a.out, o.str());
    m.output(a.out);
    m.write(a.out + ".manifest.json");
    std::size_t ok = 0, scored = 0;
    for (const auto& s : segs)
        if (s.score) ++scored, ok += s.score->overall.success ? 1 : 0;
    std::cerr << "segmented " << segs.size() << " studies; " << ok << "/" << scored << " scored successes\n";
    return kExitOk;
}

struct ExtractArgs {
    std::string input;
    std::string out;
    seg::ComponentOptions components;
    int degree = geom::kDefaultCurveDegree;
    bool keep_volumes = false;
    unsigned jobs = 1;
};

int run_extract(const ExtractArgs& a) {
    require_dir(a.input, "study directory");
    if (a.degree < 2) throw Error(ErrorCode::InvalidConfig, "--degree must be >= 2");
    const auto studies = pipeline::list_studies(a.input);
    if (studies.empty()) throw UsageError("no studies found in " + a.input);

    Manifest m("extract-discs");
    m.input(a.input);
    const pipeline::ConfigPairs pairs{{"threshold", pipeline::format_double(a.components.threshold)},
                                      {"min_area_mm2", pipeline::format_double(a.components.min_area_mm2)},
                                      {"degree", std::to_string(a.degree)}};
    m.config(pairs);
    pipeline::ExtractOptions ex{a.components, a.degree, std::nullopt};
    const fs::path out(a.out);
    if (a.keep_volumes) ex.keep_volumes = out / "discs";
    std::vector<std::vector<pipeline::DiscRecord>> per(studies.size());
    pipeline::parallel_for(studies.size(), a.jobs,
                           [&](std::size_t i) { per[i] = pipeline::extract_study(studies[i], ex); });
    std::vector<pipeline::DiscRecord> discs;
    for (auto& v : per)
        for (auto& d : v) discs.push_back(std::move(d));
    m.lap("extract");
    std::ostringstream o;
    o << pipeline::provenance_line("extract-discs", pairs);
    pipeline::write_features_csv(o, discs);
    write_file(out / "features.csv", o.str());
    write_file(out / "frames.json", pipeline::frames_json(discs));
    m.output((out / "features.csv").string());
    m.output((out / "frames.json").string());
    if (a.keep_volumes) m.output((out / "discs").string());
    m.write(out / "manifest.json");
    std::cerr << "extracted " << discs.size() << " discs from " << studies.size() << " studies\n";
    return kExitOk;
}

struct PhantomArgs {
    std::string spec;
    std::string out;
    std::uint32_t count = 20;
    std::optional<std::uint64_t> seed;
    unsigned jobs = 1;
};

phantom::PhantomSpec load_spec(const std::string& path, std::optional<std::uint64_t> seed) {
    phantom::PhantomSpec spec = path.empty() ? phantom::PhantomSpec{} : phantom::load_phantom_spec(path);
    if (seed) spec.seed = *seed;
    return spec;
}

int run_phantom(const PhantomArgs& a) {
    if (!a.spec.empty()) require_file(a.spec, "phantom spec");
    if (a.count == 0) throw Error(ErrorCode::InvalidConfig, "--count must be >= 1");
    const phantom::PhantomSpec spec = load_spec(a.spec, a.seed);
    (void)phantom::generate_phantom(spec, 0);  // surfaces SpecOutOfBounds before writing anything

    Manifest m("phantom-gen");
    if (!a.spec.empty()) m.input(a.spec);
    m.config("count", std::to_string(a.count));
    m.config(text_pairs(phantom::format_phantom_spec(spec)));
    const fs::path out(a.out);
    pipeline::write_phantom_dataset(spec, a.count, out, a.jobs);
    write_file(out / "phantom.toml", phantom::format_phantom_spec(spec));
    m.lap("generate");
    for (const char* p : {"studies", "reports", "truth_labels.csv", "phantom.toml"}) m.output((out / p).string());
    m.write(out / "manifest.json");
    std::cerr << "wrote " << a.count << " phantom studies\n";
    return kExitOk;
}

struct TrainArgs {
    std::string features;
    std::string labels;
    std::string split;
    std::string config;
    std::string out;
    std::uint64_t seed = 7;
    bool disc_split = false;
};

int run_train(const TrainArgs& a) {
    require_file(a.features, "features");
    require_file(a.labels, "labels");
    if (!a.split.empty()) require_file(a.split, "split");
    if (!a.config.empty()) require_file(a.config, "training config");
    const grading::ToyConfig config = a.config.empty() ? grading::ToyConfig{} : grading::load_toy_config(a.config);
    const auto discs = pipeline::read_features_csv(a.features);
    const io::LabelTable labels = load_labels(a.labels);
    const eval::SplitMode mode = a.disc_split ? eval::SplitMode::Disc : eval::SplitMode::Study;
    eval::SplitAssignment split;
    if (a.split.empty()) {
        std::vector<std::string> keys;
        for (const auto& d : discs) keys.push_back(pipeline::split_key(d, mode));
        split = eval::split_dataset(keys, {}, a.seed, mode);
    } else {
        split = pipeline::read_split_csv(a.split);
    }
    const auto train = pipeline::join_samples(discs, labels, &split, eval::Split::Train);
    if (train.empty()) throw Error(ErrorCode::EmptyDataset, "no labeled discs in the train split");

    Manifest m("train-toy");
    for (const auto& p : {a.features, a.labels, a.split, a.config})
        if (!p.empty()) m.input(p);
    m.config(text_pairs(grading::format_toy_config(config)));
    m.config("split_mode", std::string(eval::to_string(split.mode)));
    if (a.split.empty()) m.config("split_seed", std::to_string(a.seed));
    m.lap("load");
    const grading::TrainResult r = grading::toy_train(train, train_weights(train), config);
    m.lap("train");

    const fs::path out(a.out);
    fs::create_directories(out);
    grading::save_checkpoint(r.model, out / "model.spnm");
    std::ostringstream h;
    h << pipeline::provenance_line("train-toy", text_pairs(grading::format_toy_config(config)));
    pipeline::write_loss_history_csv(h, r.loss_history);
    write_file(out / "loss_history.csv", h.str());
    std::ostringstream s;
    pipeline::write_split_csv(s, split);
    write_file(out / "split.csv", s.str());
    for (const char* p : {"model.spnm", "loss_history.csv", "split.csv"}) m.output((out / p).string());
    m.write(out / "manifest.json");
    std::cerr << "trained on " << train.size() << " discs; final loss " << r.loss_history.back() << "\n";
    return kExitOk;
}

struct EvalArgs {
    std::string model;
    std::string features;
    std::string labels;
    std::string split;
    std::string subset = "test";
    std::string level;
    std::string out;
    eval::EvalOptions options;
};

int run_evaluate(EvalArgs a) {
    require_file(a.model, "model");
    require_file(a.features, "features");
    require_file(a.labels, "labels");
    if (!a.split.empty()) require_file(a.split, "split");
    a.options.level = level_option(a.level);
    validate_eval(a.options);
    std::optional<eval::Split> keep;
    if (!a.split.empty()) {
        if (a.subset == "train")
            keep = eval::Split::Train;
        else if (a.subset == "validation")
            keep = eval::Split::Validation;
        else if (a.subset == "test")
            keep = eval::Split::Test;
        else
            throw UsageError("--subset must be train, validation or test");
    }
    const grading::ToyModel model = grading::load_checkpoint(a.model);
    const auto discs = pipeline::read_features_csv(a.features);
    const io::LabelTable labels = load_labels(a.labels);
    std::optional<eval::SplitAssignment> split;
    if (!a.split.empty()) split = pipeline::read_split_csv(a.split);

    Manifest m("evaluate");
    for (const auto& p : {a.model, a.features, a.labels, a.split})
        if (!p.empty()) m.input(p);
    m.config(eval_pairs(a.options));
    if (keep) m.config("subset", a.subset);
    const auto preds = pipeline::predict(model, discs, labels, split ? &*split : nullptr, keep);
    const eval::MetricReport report = eval::evaluate(preds, a.options);
    m.lap("evaluate");

    const fs::path out(a.out);
    fs::create_directories(out);
    std::ostringstream p;
    p << pipeline::provenance_line("evaluate", eval_pairs(a.options));
    pipeline::write_predictions_csv(p, preds);
    write_file(out / "predictions.csv", p.str());
    write_file(out / "metrics.json", eval::to_json(report) + "\n");
    const std::string table = eval::to_text_table(report);
    write_file(out / "metrics.txt", table);
    for (const char* f : {"predictions.csv", "metrics.json", "metrics.txt"}) m.output((out / f).string());
    m.write(out / "manifest.json");
    std::cout << table;
    return kExitOk;
}

struct PipelineArgs {
    std::string spec;
    std::string config;
    std::string level;
    std::string out;
    std::optional<std::uint64_t> phantom_seed;
    pipeline::PipelineConfig run;
    bool disc_split = false;
};

int run_pipeline_cmd(PipelineArgs a) {
    if (!a.spec.empty()) require_file(a.spec, "phantom spec");
    if (!a.config.empty()) require_file(a.config, "training config");
    a.run.spec = load_spec(a.spec, a.phantom_seed);
    if (!a.config.empty()) a.run.toy = grading::load_toy_config(a.config);
    a.run.eval.level = level_option(a.level);
    if (a.disc_split) a.run.split_mode = eval::SplitMode::Disc;
    validate_eval(a.run.eval);
    a.run.validate();

    Manifest m("pipeline");
    if (!a.spec.empty()) m.input(a.spec);
    if (!a.config.empty()) m.input(a.config);
    m.config(a.run.pairs());
    m.config(text_pairs(phantom::format_phantom_spec(a.run.spec)));
    const fs::path out(a.out);
    const pipeline::PipelineSummary s = pipeline::run_pipeline(a.run, out);
    for (const auto& t : s.timings) m.timing(t.stage, t.seconds);
    for (const auto& o : s.outputs) m.output((out / o).string());
    m.write(out / "manifest.json");

    std::cout << "studies " << s.studies << ", segmentation successes " << s.segmentation_successes << ", discs "
              << s.discs << ", parse mismatches " << s.parse_mismatches << "\n"
              << "split train/validation/test " << s.split.count(eval::Split::Train) << "/"
              << s.split.count(eval::Split::Validation) << "/" << s.split.count(eval::Split::Test) << "\n"
              << "class-average accuracy: validation " << s.validation.class_average << ", test "
              << s.test.class_average << "\n";
    return kExitOk;
}

void add_eval_flags(CLI::App* cmd, eval::EvalOptions& o, std::string& level) {
    cmd->add_flag("--merge-mild-moderate", o.merge_mild_moderate, "Score mild and moderate as one class");
    cmd->add_flag("--binary", o.binary, "Score severe against the rest");
    cmd->add_option("--level", level, "Restrict metrics to one disc level, e.g. L4L5");
    cmd->add_option("--threshold", o.threshold, "Decision threshold on P(severe) for --binary")
        ->capture_default_str();
    cmd->add_option("--bootstrap-seed", o.bootstrap_seed, "Seed of the AUC bootstrap")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lumbar stenosis grading pipeline over SPNV volumes and free-text reports"};
    app.set_version_flag("--version", std::string(pipeline::version()));
    app.require_subcommand(1);

    ParseArgs parse_args;
    parse_args.out = default_out("labels.csv");
    auto* parse = app.add_subcommand("parse-reports", "Turn free-text reports into a label CSV");
    parse->add_option("input", parse_args.input, "Report file, record file or directory")->required();
    parse->add_option("-o,--out", parse_args.out, "Label CSV")->capture_default_str();
    parse->add_option("--vocab", parse_args.vocab, "Vocabulary TSV replacing the built-in table");

    SegmentArgs seg_args;
    seg_args.out = default_out("segmentation_scores.csv");
    auto* segment = app.add_subcommand("segment-score", "Label vertebrae and score them against truth");
    segment->add_option("input", seg_args.input, "Directory of study directories")->required();
    segment->add_option("-o,--out", seg_args.out, "Score CSV")->capture_default_str();
    segment->add_option("--mask-threshold", seg_args.components.threshold, "Probability threshold")
        ->capture_default_str();
    segment->add_option("--min-area", seg_args.components.min_area_mm2, "Smallest component kept, mm^2")
        ->capture_default_str();
    segment->add_option("--jobs", seg_args.jobs, "Studies processed in parallel")->check(CLI::PositiveNumber);

    ExtractArgs ex_args;
    ex_args.out = default_out("discs");
    auto* extract = app.add_subcommand("extract-discs", "Fit the spine curve and resample every disc");
    extract->add_option("input", ex_args.input, "Directory of study directories")->required();
    extract->add_option("-o,--out", ex_args.out, "Output directory")->capture_default_str();
    extract->add_option("--mask-threshold", ex_args.components.threshold, "Probability threshold")
        ->capture_default_str();
    extract->add_option("--min-area", ex_args.components.min_area_mm2, "Smallest component kept, mm^2")
        ->capture_default_str();
    extract->add_option("--degree", ex_args.degree, "Spine curve degree")->capture_default_str();
    extract->add_flag("--keep-volumes", ex_args.keep_volumes, "Write resampled disc volumes with sidecars");
    extract->add_option("--jobs", ex_args.jobs, "Studies processed in parallel")->check(CLI::PositiveNumber);

    PhantomArgs ph_args;
    ph_args.out = default_out("phantom");
    auto* phantom_cmd = app.add_subcommand("phantom-gen", "Write synthetic studies with known truth");
    phantom_cmd->add_option("--phantom", ph_args.spec, "Phantom spec (TOML-style key = value)");
    phantom_cmd->add_option("--count", ph_args.count, "Number of studies")->capture_default_str();
    phantom_cmd->add_option("--seed", ph_args.seed, "Override the spec seed");
    phantom_cmd->add_option("-o,--out", ph_args.out, "Output directory")->capture_default_str();
    phantom_cmd->add_option("--jobs", ph_args.jobs, "Studies generated in parallel")->check(CLI::PositiveNumber);

    TrainArgs tr_args;
    tr_args.out = default_out("model");
    auto* train = app.add_subcommand("train-toy", "Train the stand-in grading model");
    train->add_option("--features", tr_args.features, "Feature CSV from extract-discs")->required();
    train->add_option("--labels", tr_args.labels, "Label CSV")->required();
    train->add_option("--split", tr_args.split, "Existing split CSV; a new one is drawn otherwise");
    train->add_option("--config", tr_args.config, "Training config (key = value)");
    train->add_option("--seed", tr_args.seed, "Split seed when drawing a new split")->capture_default_str();
    train->add_flag("--disc-split", tr_args.disc_split, "Split by disc instead of by study");
    train->add_option("-o,--out", tr_args.out, "Output directory")->capture_default_str();

    EvalArgs ev_args;
    ev_args.out = default_out("evaluation");
    auto* evaluate = app.add_subcommand("evaluate", "Score a trained model");
    evaluate->add_option("--model", ev_args.model, "Checkpoint")->required();
    evaluate->add_option("--features", ev_args.features, "Feature CSV")->required();
    evaluate->add_option("--labels", ev_args.labels, "Label CSV")->required();
    evaluate->add_option("--split", ev_args.split, "Split CSV; all labeled discs are scored otherwise");
    evaluate->add_option("--subset", ev_args.subset, "train, validation or test")->capture_default_str();
    evaluate->add_option("-o,--out", ev_args.out, "Output directory")->capture_default_str();
    add_eval_flags(evaluate, ev_args.options, ev_args.level);

    PipelineArgs pl_args;
    pl_args.out = default_out("pipeline");
    auto* pipe = app.add_subcommand("pipeline", "Run every stage over a phantom dataset");
    pipe->add_option("--phantom", pl_args.spec, "Phantom spec (TOML-style key = value)");
    pipe->add_option("--config", pl_args.config, "Training config (key = value)");
    pipe->add_option("--count", pl_args.run.count, "Number of studies")->capture_default_str();
    pipe->add_option("--seed", pl_args.run.seed, "Split seed")->capture_default_str();
    pipe->add_option("--phantom-seed", pl_args.phantom_seed, "Override the spec seed");
    pipe->add_flag("--disc-split", pl_args.disc_split, "Split by disc instead of by study");
    pipe->add_option("--degree", pl_args.run.degree, "Spine curve degree")->capture_default_str();
    pipe->add_flag("--keep-volumes", pl_args.run.keep_volumes, "Write resampled disc volumes with sidecars");
    pipe->add_option("--jobs", pl_args.run.jobs, "Studies processed in parallel")->check(CLI::PositiveNumber);
    pipe->add_option("-o,--out", pl_args.out, "Output directory")->capture_default_str();
    add_eval_flags(pipe, pl_args.run.eval, pl_args.level);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (*parse) return run_parse(parse_args);
        if (*segment) return run_segment(seg_args);
        if (*extract) return run_extract(ex_args);
        if (*phantom_cmd) return run_phantom(ph_args);
        if (*train) return run_train(tr_args);
        if (*evaluate) return run_evaluate(ev_args);
        if (*pipe) return run_pipeline_cmd(pl_args);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        const bool validation = e.code() == ErrorCode::InvalidConfig || e.code() == ErrorCode::BadRatios;
        return validation ? kExitValidation : kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitValidation;
}
