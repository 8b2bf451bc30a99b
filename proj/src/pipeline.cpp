#include "spinegrade/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <fstream>
#include <json.hpp>
#include <mutex>
#include <sstream>
#include <thread>

#include "spinegrade/error.hpp"

#ifndef SPINEGRADE_VERSION
#define SPINEGRADE_VERSION "0.0.0"
#endif

namespace spinegrade::pipeline {

std::string_view version() noexcept { return SPINEGRADE_VERSION; }

std::string provenance_line(std::string_view stage, const ConfigPairs& config) {
    std::string line = "# spinegrade " + std::string(version()) + " " + std::string(stage);
    for (const auto& [k, v] : config) line += " " + k + "=" + v;
    return line + "\n";
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min<std::size_t>(std::max(1u, jobs), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    const std::lock_guard lock(mu);
                    if (!first) first = std::current_exception();
                    next = n;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first) std::rethrow_exception(first);
}

std::vector<Study> list_studies(const fs::path& root) {
    if (!fs::is_directory(root)) throw Error(ErrorCode::Io, "not a directory: " + root.string());
    std::vector<Study> out;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory() && fs::exists(entry.path() / kLumbarFile))
            out.push_back({entry.path().filename().string(), entry.path()});
    std::sort(out.begin(), out.end(), [](const Study& a, const Study& b) { return a.id < b.id; });
    return out;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    while (true) {
        const auto c = line.find(',');
        out.push_back(line.substr(0, c));
        if (c == std::string_view::npos) break;
        line = line.substr(c + 1);
    }
    return out;
}

double parse_double(std::string_view s, std::size_t line, const fs::path& path) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw Error(ErrorCode::MalformedRow, path.string() + ":" + std::to_string(line) + ": bad number '" +
                                                 std::string(s) + "'");
    return v;
}

/// Calls fn(fields, line_no) for each data line after the header; skips '#' lines.
template <typename Fn>
void for_each_row(const fs::path& path, std::string_view header_prefix, Fn fn) {
    const std::string text = read_text(path);
    std::istringstream in(text);
    std::string line;
    std::size_t no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            if (line.rfind(header_prefix, 0) != 0)
                throw Error(ErrorCode::MalformedRow, path.string() + ": expected header '" +
                                                         std::string(header_prefix) + "...'");
            header = true;
            continue;
        }
        fn(split_fields(line), no);
    }
}

}  // namespace

void write_centroids_csv(std::ostream& out, const std::vector<seg::LabeledPoint>& points) {
    out << "label,x_mm,y_mm\n";
    for (const auto& p : points)
        out << to_string(p.label) << ',' << format_double(p.point.x) << ',' << format_double(p.point.y) << '\n';
}

std::vector<seg::LabeledPoint> read_centroids_csv(const fs::path& path) {
    std::vector<seg::LabeledPoint> out;
    for_each_row(path, "label,", [&](const std::vector<std::string_view>& f, std::size_t no) {
        if (f.size() != 3) throw Error(ErrorCode::MalformedRow, path.string() + ":" + std::to_string(no));
        const auto v = parse_vertebra(f[0]);
        if (!v) throw Error(ErrorCode::MalformedRow, path.string() + ": unknown vertebra " + std::string(f[0]));
        out.push_back({*v, {parse_double(f[1], no, path), parse_double(f[2], no, path)}});
    });
    return out;
}

void write_phantom_dataset(const phantom::PhantomSpec& spec, std::uint32_t count, const fs::path& out,
                           unsigned jobs) {
    fs::create_directories(out / "studies");
    fs::create_directories(out / "reports");
    std::vector<std::vector<StenosisLabelSet>> truth(count);
    parallel_for(count, jobs, [&](std::size_t i) {
        const auto study = static_cast<std::uint32_t>(i);
        const phantom::Phantom ph = phantom::generate_phantom(spec, study);
        const std::string id = phantom::study_id(study);
        const fs::path dir = out / "studies" / id;
        fs::create_directories(dir);
        io::write_volume(ph.sagittal, (dir / kSagittalFile).string());
        io::write_volume(ph.lumbar.volume(), (dir / kLumbarFile).string());
        io::write_volume(ph.sacral.volume(), (dir / kSacralFile).string());
        io::write_volume(ph.label_map, (dir / kLabelMapFile).string());
        std::ostringstream c;
        write_centroids_csv(c, ph.truth_centroids);
        write_text(dir / kCentroidsFile, c.str());
        write_text(out / "reports" / (id + ".txt"), ph.report);
        truth[i] = ph.truth_labels;
    });
    io::LabelTable table;
    for (std::uint32_t i = 0; i < count; ++i)
        for (const auto& l : truth[i]) table.insert({phantom::study_id(i), l.level()}, {l, true});
    std::ostringstream t;
    t << provenance_line("phantom-gen", {{"count", std::to_string(count)}, {"seed", std::to_string(spec.seed)}});
    io::write_labels(t, table);
    write_text(out / "truth_labels.csv", t.str());
}

StudySegmentation segment_study(const Study& study, const seg::ComponentOptions& options) {
    const MaskVolume lumbar = io::read_mask((study.dir / kLumbarFile).string());
    const MaskVolume sacral = io::read_mask((study.dir / kSacralFile).string());
    if (!lumbar.same_geometry(sacral))
        throw Error(ErrorCode::GeometryMismatch, study.id + ": lumbar and sacral masks differ in geometry");
    StudySegmentation out;
    out.study_id = study.id;
    out.segmentation = seg::assign_levels_lenient(seg::SliceGeometry::of(lumbar.volume()),
                                                  seg::binarize_and_components(lumbar, options),
                                                  seg::binarize_and_components(sacral, options));
    if (fs::exists(study.dir / kCentroidsFile)) {
        seg::TruthSpine truth;
        truth.centroids = read_centroids_csv(study.dir / kCentroidsFile);
        if (fs::exists(study.dir / kLabelMapFile)) truth.label_map = io::read_volume((study.dir / kLabelMapFile).string());
        out.score = seg::score_segmentation(out.segmentation, truth);
    }
    return out;
}

void write_scores_csv(std::ostream& out, const std::vector<StudySegmentation>& studies) {
    out << "study_id,label,dice,centroid_err_mm,success,reason\n";
    auto num = [](double v) { return std::isnan(v) ? std::string() : format_double(v); };
    for (const auto& s : studies) {
        std::string success, reason;
        if (s.score) {
            success = s.score->overall.success ? "true" : "false";
            if (s.score->overall.failure_reason) reason = std::string(seg::to_string(*s.score->overall.failure_reason));
        }
        if (s.segmentation.vertebrae.empty()) {
            out << s.study_id << ",,,," << success << ',' << reason << '\n';
            continue;
        }
        for (const auto& lv : s.segmentation.vertebrae) {
            std::string dice, err;
            if (s.score) {
                for (const auto& ls : s.score->per_label)
                    if (ls.label == lv.label) dice = num(ls.dice), err = num(ls.centroid_error_mm);
            }
            out << s.study_id << ',' << to_string(lv.label) << ',' << dice << ',' << err << ',' << success << ','
                << reason << '\n';
        }
    }
}

std::vector<DiscRecord> extract_study(const Study& study, const ExtractOptions& options) {
    const Volume3D sagittal = io::read_volume((study.dir / kSagittalFile).string());
    const MaskVolume lumbar = io::read_mask((study.dir / kLumbarFile).string());
    const MaskVolume sacral = io::read_mask((study.dir / kSacralFile).string());
    const Volume3D& lv = lumbar.volume();
    if (!lumbar.same_geometry(sacral) || lv.dims().nx != sagittal.dims().nx || lv.dims().ny != sagittal.dims().ny ||
        lv.spacing()[0] != sagittal.spacing()[0] || lv.spacing()[1] != sagittal.spacing()[1] ||
        lv.origin()[0] != sagittal.origin()[0] || lv.origin()[1] != sagittal.origin()[1])
        throw Error(ErrorCode::GeometryMismatch, study.id + ": masks do not match the sagittal series in-plane");

    const seg::VertebraSegmentation segmentation =
        seg::assign_levels(seg::SliceGeometry::of(lv), seg::binarize_and_components(lumbar, options.components),
                           seg::binarize_and_components(sacral, options.components));
    const std::vector<geom::Point2> centroids = segmentation.centroids();
    const geom::SpineCurve curve = geom::fit_spine_curve(centroids, options.degree);
    const double z = geom::mid_sagittal_z(sagittal);

    std::vector<DiscRecord> out;
    for (const geom::DiscFrame& f2 : geom::locate_discs(segmentation, curve)) {
        DiscRecord rec;
        rec.study_id = study.id;
        rec.level = f2.level;
        rec.frame = geom::build_frames(f2, z);
        const geom::DiscVolumePair pair = geom::resample_disc_volume(sagittal, rec.frame);
        rec.axial_coverage = pair.axial_coverage;
        rec.sagittal_coverage = pair.sagittal_coverage;
        rec.features = geom::disc_features(pair.axial);
        if (options.keep_volumes) {
            const std::string stem = study.id + "_" + std::string(to_string(rec.level));
            fs::create_directories(*options.keep_volumes);
            io::write_volume(pair.axial, (*options.keep_volumes / (stem + "_axial.spnv")).string());
            io::write_volume(pair.sagittal, (*options.keep_volumes / (stem + "_sagittal.spnv")).string());
            write_text(*options.keep_volumes / (stem + ".json"), sidecar_json(rec));
        }
        out.push_back(std::move(rec));
    }
    return out;
}

void write_features_csv(std::ostream& out, const std::vector<DiscRecord>& discs) {
    const std::size_t n = discs.empty() ? 0 : discs.front().features.size();
    out << "study_id,level";
    for (std::size_t i = 0; i < n; ++i) out << ",f" << i;
    out << '\n';
    for (const auto& d : discs) {
        if (d.features.size() != n) throw Error(ErrorCode::ShapeMismatch, "ragged feature vectors");
        out << d.study_id << ',' << to_string(d.level);
        for (double v : d.features) out << ',' << format_double(v);
        out << '\n';
    }
}

std::vector<DiscRecord> read_features_csv(const fs::path& path) {
    std::vector<DiscRecord> out;
    for_each_row(path, "study_id,level", [&](const std::vector<std::string_view>& f, std::size_t no) {
        if (f.size() < 3) throw Error(ErrorCode::MalformedRow, path.string() + ":" + std::to_string(no));
        DiscRecord d;
        d.study_id = std::string(f[0]);
        const auto level = parse_disc_level(f[1]);
        if (!level) throw Error(ErrorCode::MalformedRow, path.string() + ": unknown level " + std::string(f[1]));
        d.level = *level;
        for (std::size_t i = 2; i < f.size(); ++i) d.features.push_back(parse_double(f[i], no, path));
        if (!out.empty() && out.front().features.size() != d.features.size())
            throw Error(ErrorCode::ShapeMismatch, path.string() + ":" + std::to_string(no) + ": ragged row");
        out.push_back(std::move(d));
    });
    return out;
}

namespace {

nlohmann::ordered_json frame_json(const geom::Frame3& f) {
    nlohmann::ordered_json j;
    j["origin"] = f.origin;
    j["basis"] = {f.axes[0], f.axes[1], f.axes[2]};
    return j;
}

nlohmann::ordered_json disc_json(const DiscRecord& d) {
    nlohmann::ordered_json j;
    j["study_id"] = d.study_id;
    j["level"] = std::string(to_string(d.level));
    j["disc_point"] = {d.frame.disc_point.x, d.frame.disc_point.y};
    j["tangent"] = {d.frame.tangent.x, d.frame.tangent.y};
    j["plane_normal"] = {d.frame.plane_normal.x, d.frame.plane_normal.y};
    j["plane_angle_deg"] = d.frame.plane_angle() * 180.0 / 3.14159265358979323846;
    j["axial"] = frame_json(d.frame.axial);
    j["sagittal"] = frame_json(d.frame.sagittal);
    j["axial_coverage"] = d.axial_coverage;
    j["sagittal_coverage"] = d.sagittal_coverage;
    return j;
}

}  // namespace

std::string frames_json(const std::vector<DiscRecord>& discs) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& d : discs) arr.push_back(disc_json(d));
    return arr.dump(2) + "\n";
}

std::string sidecar_json(const DiscRecord& disc) { return disc_json(disc).dump(2) + "\n"; }

void write_split_csv(std::ostream& out, const eval::SplitAssignment& split) {
    out << provenance_line("split", {{"mode", std::string(eval::to_string(split.mode))},
                                     {"seed", std::to_string(split.seed)},
                                     {"train", format_double(split.ratios.train)},
                                     {"validation", format_double(split.ratios.validation)},
                                     {"test", format_double(split.ratios.test)}});
    out << "key,split\n";
    for (const auto& [k, s] : split.assignment) out << k << ',' << eval::to_string(s) << '\n';
}

eval::SplitAssignment read_split_csv(const fs::path& path) {
    eval::SplitAssignment out;
    const std::string text = read_text(path);
    if (text.find(" mode=disc") != std::string::npos) out.mode = eval::SplitMode::Disc;
    for_each_row(path, "key,split", [&](const std::vector<std::string_view>& f, std::size_t no) {
        if (f.size() != 2) throw Error(ErrorCode::MalformedRow, path.string() + ":" + std::to_string(no));
        eval::Split s;
        if (f[1] == "train")
            s = eval::Split::Train;
        else if (f[1] == "validation")
            s = eval::Split::Validation;
        else if (f[1] == "test")
            s = eval::Split::Test;
        else
            throw Error(ErrorCode::MalformedRow, path.string() + ": unknown split " + std::string(f[1]));
        if (!out.assignment.emplace(std::string(f[0]), s).second)
            throw Error(ErrorCode::DuplicateKey, path.string() + ": duplicate key " + std::string(f[0]));
    });
    return out;
}

std::string split_key(const DiscRecord& disc, eval::SplitMode mode) {
    return mode == eval::SplitMode::Study ? disc.study_id : eval::disc_key(disc.study_id, disc.level);
}

namespace {

bool selected(const DiscRecord& d, const eval::SplitAssignment* split, std::optional<eval::Split> keep) {
    if (split == nullptr || !keep) return true;
    const auto it = split->assignment.find(split_key(d, split->mode));
    return it != split->assignment.end() && it->second == *keep;
}

}  // namespace

std::vector<grading::Sample> join_samples(const std::vector<DiscRecord>& discs, const io::LabelTable& labels,
                                          const eval::SplitAssignment* split, std::optional<eval::Split> keep) {
    std::vector<grading::Sample> out;
    for (const auto& d : discs) {
        if (!selected(d, split, keep)) continue;
        const io::LabelRow* row = labels.find(d.study_id, d.level);
        if (row == nullptr) continue;
        grading::Sample s{d.features, grading::Targets::from_labels(row->labels)};
        if (s.targets.any()) out.push_back(std::move(s));
    }
    return out;
}

std::vector<eval::DiscPrediction> predict(const grading::ToyModel& model, const std::vector<DiscRecord>& discs,
                                          const io::LabelTable& labels, const eval::SplitAssignment* split,
                                          std::optional<eval::Split> keep) {
    std::vector<eval::DiscPrediction> out;
    for (const auto& d : discs) {
        if (!selected(d, split, keep)) continue;
        const io::LabelRow* row = labels.find(d.study_id, d.level);
        if (row == nullptr) continue;
        out.push_back({d.study_id, d.level, model.forward(d.features), grading::Targets::from_labels(row->labels)});
    }
    return out;
}

void write_predictions_csv(std::ostream& out, const std::vector<eval::DiscPrediction>& preds) {
    out << "study_id,level,task,truth,p0,p1,p2,p3\n";
    for (const auto& p : preds) {
        for (StenosisSite s : kAllSites) {
            const std::size_t t = index(s);
            out << p.study_id << ',' << to_string(p.level) << ',' << to_string(s) << ',';
            if (p.truth.grade[t]) out << *p.truth.grade[t];
            for (double v : p.probs.p[t]) out << ',' << format_double(v);
            out << '\n';
        }
    }
}

void write_loss_history_csv(std::ostream& out, const std::vector<double>& history) {
    out << "epoch,loss\n";
    for (std::size_t i = 0; i < history.size(); ++i) out << i + 1 << ',' << format_double(history[i]) << '\n';
}

void PipelineConfig::validate() const {
    if (count < 3) throw Error(ErrorCode::InvalidConfig, "pipeline needs at least 3 studies");
    if (degree < 2) throw Error(ErrorCode::InvalidConfig, "curve degree must be >= 2");
    if (!(components.threshold > 0.0 && components.threshold < 1.0))
        throw Error(ErrorCode::InvalidConfig, "threshold must lie in (0,1)");
    if (!(components.min_area_mm2 >= 0.0)) throw Error(ErrorCode::InvalidConfig, "min area must be >= 0");
    if (!(eval.threshold >= 0.0 && eval.threshold <= 1.0))
        throw Error(ErrorCode::InvalidConfig, "decision threshold must lie in [0,1]");
    if (jobs == 0) throw Error(ErrorCode::InvalidConfig, "jobs must be >= 1");
    // Ratio validation is the split function's own check.
    (void)eval::split_dataset({}, ratios, seed);
}

ConfigPairs PipelineConfig::pairs() const {
    ConfigPairs p{{"count", std::to_string(count)},
                  {"phantom_seed", std::to_string(spec.seed)},
                  {"split_seed", std::to_string(seed)},
                  {"split_mode", std::string(eval::to_string(split_mode))},
                  {"ratios", format_double(ratios.train) + ":" + format_double(ratios.validation) + ":" +
                                 format_double(ratios.test)},
                  {"threshold", format_double(components.threshold)},
                  {"min_area_mm2", format_double(components.min_area_mm2)},
                  {"degree", std::to_string(degree)},
                  {"epochs", std::to_string(toy.epochs)},
                  {"toy_seed", std::to_string(toy.seed)},
                  {"rho", format_double(toy.rho)},
                  {"epsilon", format_double(toy.epsilon)},
                  {"batch_size", std::to_string(toy.batch_size)},
                  {"reduction", toy.mean_reduction ? "mean" : "sum"},
                  {"weight_decay", format_double(toy.weight_decay)},
                  {"merge_mild_moderate", eval.merge_mild_moderate ? "true" : "false"},
                  {"binary", eval.binary ? "true" : "false"},
                  {"decision_threshold", format_double(eval.threshold)}};
    std::string hidden;
    for (std::size_t i = 0; i < toy.hidden_sizes.size(); ++i)
        hidden += (i ? ":" : "") + std::to_string(toy.hidden_sizes[i]);
    p.emplace_back("hidden_sizes", hidden);
    if (eval.level) p.emplace_back("level", std::string(to_string(*eval.level)));
    return p;
}

PipelineSummary run_pipeline(const PipelineConfig& config, const fs::path& out) {
    config.validate();
    PipelineSummary sum;
    const ConfigPairs pairs = config.pairs();
    fs::create_directories(out);
    auto clock = std::chrono::steady_clock::now();
    auto lap = [&](const char* stage) {
        const auto now = std::chrono::steady_clock::now();
        sum.timings.push_back({stage, std::chrono::duration<double>(now - clock).count()});
        clock = now;
    };
    auto emit = [&](const std::string& rel, const std::string& text) {
        write_text(out / rel, text);
        sum.outputs.push_back(rel);
    };

    // phantom-gen
    const fs::path data = out / "phantom";
    write_phantom_dataset(config.spec, config.count, data, config.jobs);
    sum.outputs.push_back("phantom/");
    lap("phantom-gen");

    // parse-reports
    const report::Vocabulary& vocab = report::Vocabulary::builtin();
    std::vector<report::StudyLabels> parsed;
    for (const auto& [id, text] : report::read_report_inputs((data / "reports").string()))
        parsed.push_back({id, report::parse_report(text, vocab)});
    {
        std::ostringstream o;
        o << provenance_line("parse-reports", {});
        report::write_label_csv(o, parsed);
        emit("labels.csv", o.str());
    }
    io::LabelTableRead labels_read = io::read_labels((out / "labels.csv").string());
    labels_read.throw_if_errors();
    const io::LabelTable labels = std::move(labels_read.table);
    {
        io::LabelTableRead truth = io::read_labels((data / "truth_labels.csv").string());
        truth.throw_if_errors();
        sum.parsed_levels = labels.size();
        for (const auto& [key, row] : truth.table.rows()) {
            const io::LabelRow* p = labels.find(key.study_id, key.level);
            bool same = p != nullptr;
            for (StenosisSite s : kAllSites) same = same && p->labels.grade(s) == row.labels.grade(s);
            if (!same) ++sum.parse_mismatches;
        }
    }
    lap("parse-reports");

    // segment-score
    const std::vector<Study> studies = list_studies(data / "studies");
    sum.studies = studies.size();
    std::vector<StudySegmentation> segs(studies.size());
    parallel_for(studies.size(), config.jobs,
                 [&](std::size_t i) { segs[i] = segment_study(studies[i], config.components); });
    for (const auto& s : segs)
        if (s.score && s.score->overall.success) ++sum.segmentation_successes;
    {
        std::ostringstream o;
        o << provenance_line("segment-score", pairs);
        write_scores_csv(o, segs);
        emit("segmentation_scores.csv", o.str());
    }
    lap("segment-score");

    // extract-discs
    ExtractOptions ex{config.components, config.degree, std::nullopt};
    if (config.keep_volumes) ex.keep_volumes = out / "discs";
    std::vector<std::vector<DiscRecord>> per_study(studies.size());
    parallel_for(studies.size(), config.jobs, [&](std::size_t i) { per_study[i] = extract_study(studies[i], ex); });
    std::vector<DiscRecord> discs;
    for (auto& v : per_study)
        for (auto& d : v) discs.push_back(std::move(d));
    sum.discs = discs.size();
    {
        std::ostringstream o;
        o << provenance_line("extract-discs", pairs);
        write_features_csv(o, discs);
        emit("features.csv", o.str());
        emit("frames.json", frames_json(discs));
    }
    lap("extract-discs");

    // split
    std::vector<std::string> keys;
    for (const auto& d : discs) keys.push_back(split_key(d, config.split_mode));
    sum.split = eval::split_dataset(keys, config.ratios, config.seed, config.split_mode);
    {
        std::ostringstream o;
        write_split_csv(o, sum.split);
        emit("split.csv", o.str());
    }
    lap("split");

    // train-toy
    const std::vector<grading::Sample> train = join_samples(discs, labels, &sum.split, eval::Split::Train);
    if (train.empty()) throw Error(ErrorCode::EmptyDataset, "no labeled training discs");
    const grading::ClassWeights weights = grading::class_weights(grading::count_classes([&] {
        std::vector<grading::Targets> t;
        for (const auto& s : train) t.push_back(s.targets);
        return t;
    }()));
    grading::TrainResult trained = grading::toy_train(train, weights, config.toy);
    sum.loss_history = trained.loss_history;
    grading::save_checkpoint(trained.model, out / "model.spnm");
    sum.outputs.push_back("model.spnm");
    {
        std::ostringstream o;
        o << provenance_line("train-toy", pairs);
        write_loss_history_csv(o, trained.loss_history);
        emit("loss_history.csv", o.str());
    }
    lap("train-toy");

    // evaluate (with the checkpoint as written, so the saved model is what gets scored)
    const grading::ToyModel model = grading::load_checkpoint(out / "model.spnm");
    const auto val = predict(model, discs, labels, &sum.split, eval::Split::Validation);
    const auto test = predict(model, discs, labels, &sum.split, eval::Split::Test);
    sum.validation = eval::evaluate(val, config.eval);
    sum.test = eval::evaluate(test, config.eval);
    {
        std::ostringstream o;
        o << provenance_line("evaluate", pairs);
        write_predictions_csv(o, test);
        emit("predictions_test.csv", o.str());
        const std::string metrics = "{\n\"validation\": " + eval::to_json(sum.validation) +
                                    ",\n\"test\": " + eval::to_json(sum.test) + "\n}\n";
        emit("metrics.json", metrics);
        emit("metrics.txt", "validation\n" + eval::to_text_table(sum.validation) + "\ntest\n" +
                                eval::to_text_table(sum.test));
    }
    lap("evaluate");
    return sum;
}

}  // namespace spinegrade::pipeline
