#include "spinegrade/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <json.hpp>
#include <numeric>
#include <random>
#include <sstream>

#include "spinegrade/error.hpp"

namespace spinegrade::eval {

std::string_view to_string(Split s) noexcept {
    switch (s) {
        case Split::Train: return "train";
        case Split::Validation: return "validation";
        case Split::Test: return "test";
    }
    return "unknown";
}

std::string_view to_string(SplitMode m) noexcept { return m == SplitMode::Study ? "study" : "disc"; }

std::string_view to_string(SiteGroup g) noexcept { return g == SiteGroup::Central ? "central" : "foraminal"; }

std::vector<std::string> SplitAssignment::ids(Split s) const {
    std::vector<std::string> out;
    for (const auto& [id, split] : assignment)
        if (split == s) out.push_back(id);
    return out;
}

std::size_t SplitAssignment::count(Split s) const {
    return static_cast<std::size_t>(
        std::count_if(assignment.begin(), assignment.end(), [&](const auto& kv) { return kv.second == s; }));
}

SplitAssignment split_dataset(std::vector<std::string> ids, const SplitRatios& ratios, std::uint64_t seed,
                              SplitMode mode) {
    const double r[3] = {ratios.train, ratios.validation, ratios.test};
    for (double v : r)
        if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorCode::BadRatios, "split ratios must be positive");
    if (std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9) throw Error(ErrorCode::BadRatios, "split ratios must sum to 1");

    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    std::mt19937_64 rng(seed);
    std::shuffle(ids.begin(), ids.end(), rng);

    const std::size_t n = ids.size();
    const auto n_train = std::min(n, static_cast<std::size_t>(std::llround(static_cast<double>(n) * r[0])));
    const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(static_cast<double>(n) * r[1])));

    SplitAssignment out;
    out.ratios = ratios;
    out.seed = seed;
    out.mode = mode;
    for (std::size_t i = 0; i < n; ++i) {
        const Split s = i < n_train ? Split::Train : i < n_train + n_val ? Split::Validation : Split::Test;
        out.assignment.emplace(ids[i], s);
    }
    return out;
}

std::string disc_key(std::string_view study_id, DiscLevel level) {
    return std::string(study_id) + "/" + std::string(to_string(level));
}

ConfusionMatrix::ConfusionMatrix(std::size_t classes) : k_(classes), counts_(classes * classes, 0) {}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::uint64_t count) {
    if (truth >= k_ || predicted >= k_) throw Error(ErrorCode::ValueOutOfRange, "class index out of range");
    counts_[truth * k_ + predicted] += count;
}

std::uint64_t ConfusionMatrix::support(std::size_t truth) const {
    std::uint64_t s = 0;
    for (std::size_t j = 0; j < k_; ++j) s += at(truth, j);
    return s;
}

std::uint64_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0}); }

namespace {

ConfusionMatrix remap(const ConfusionMatrix& four, std::size_t k, const std::array<std::size_t, 4>& map) {
    if (four.classes() != 4) throw Error(ErrorCode::ShapeMismatch, "expected a 4-class confusion matrix");
    ConfusionMatrix out(k);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) out.add(map[i], map[j], four.at(i, j));
    return out;
}

}  // namespace

ConfusionMatrix merge_mild_moderate(const ConfusionMatrix& four) { return remap(four, 3, {0, 1, 1, 2}); }

ConfusionMatrix binary_collapse(const ConfusionMatrix& four) { return remap(four, 2, {0, 0, 0, 1}); }

ClassAccuracy class_accuracy(const ConfusionMatrix& cm) {
    ClassAccuracy out;
    double sum = 0.0;
    std::size_t included = 0;
    for (std::size_t j = 0; j < cm.classes(); ++j) {
        const std::uint64_t s = cm.support(j);
        if (s == 0) {
            out.per_class.emplace_back();
            out.diagnostics.push_back("class " + std::to_string(j) + " has no support; excluded from the average");
            continue;
        }
        const double a = static_cast<double>(cm.at(j, j)) / static_cast<double>(s);
        out.per_class.emplace_back(a);
        sum += a;
        ++included;
    }
    out.class_average = included > 0 ? sum / static_cast<double>(included) : 0.0;
    return out;
}

double auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw Error(ErrorCode::ShapeMismatch, "scores and labels differ in length");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // Sum of positive midranks.
    double rank_sum = 0.0;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t t = i; t < j; ++t) {
            if (labels[order[t]] != 0) {
                rank_sum += midrank;
                ++pos;
            }
        }
        i = j;
    }
    const std::size_t neg = n - pos;
    if (pos == 0 || neg == 0) throw Error(ErrorCode::SingleClass, "AUC needs both positive and negative samples");
    const double np = static_cast<double>(pos);
    return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(neg));
}

namespace {

double percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double h = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

AucResult auc_with_ci(std::span<const double> scores, std::span<const int> labels, std::uint64_t seed,
                      std::size_t resamples) {
    AucResult r;
    r.auc = auc(scores, labels);
    r.resamples = resamples;
    if (resamples == 0) {
        r.ci_low = r.ci_high = r.auc;
        return r;
    }
    const std::size_t n = scores.size();
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<double> s(n);
    std::vector<int> l(n);
    std::vector<double> stats;
    stats.reserve(resamples);
    while (stats.size() < resamples) {
        bool has_pos = false, has_neg = false;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t k = pick(rng);
            s[i] = scores[k];
            l[i] = labels[k];
            (l[i] != 0 ? has_pos : has_neg) = true;
        }
        if (has_pos && has_neg) stats.push_back(auc(s, l));
    }
    r.ci_low = percentile(stats, 0.025);
    r.ci_high = percentile(stats, 0.975);
    return r;
}

namespace {

std::span<const StenosisSite> group_sites(SiteGroup g) {
    static constexpr StenosisSite central[] = {StenosisSite::SCS};
    static constexpr StenosisSite foraminal[] = {StenosisSite::RFS, StenosisSite::LFS};
    if (g == SiteGroup::Central) return central;
    return foraminal;
}

}  // namespace

double per_level_binary_accuracy(std::span<const DiscPrediction> predictions, DiscLevel level, SiteGroup group,
                                 double threshold) {
    std::size_t total = 0, correct = 0;
    for (const DiscPrediction& d : predictions) {
        if (d.level != level) continue;
        for (StenosisSite s : group_sites(group)) {
            const auto& g = d.truth.grade[index(s)];
            if (!g) continue;
            const bool truth_pos = *g == 3;
            const bool pred_pos = grading::binary_collapse(d.probs.p[index(s)])[1] >= threshold;
            ++total;
            if (truth_pos == pred_pos) ++correct;
        }
    }
    if (total == 0)
        throw Error(ErrorCode::EmptyLevel, "no labeled " + std::string(to_string(group)) + " sites at " +
                                               std::string(to_string(level)));
    return static_cast<double>(correct) / static_cast<double>(total);
}

MetricReport evaluate(std::span<const DiscPrediction> predictions, const EvalOptions& options) {
    if (!(options.threshold >= 0.0 && options.threshold <= 1.0))
        throw Error(ErrorCode::InvalidConfig, "threshold must lie in [0,1]");
    std::vector<DiscPrediction> preds;
    for (const auto& p : predictions)
        if (!options.level || p.level == *options.level) preds.push_back(p);

    MetricReport rep;
    rep.options = options;
    rep.discs = preds.size();
    if (options.binary)
        rep.class_names = {"negative", "positive"};
    else if (options.merge_mild_moderate)
        rep.class_names = {"normal", "mild/moderate", "severe"};
    else
        rep.class_names = {"normal", "mild", "moderate", "severe"};
    const std::size_t k = rep.class_names.size();

    double avg_sum = 0.0;
    std::size_t avg_n = 0;
    for (StenosisSite site : kAllSites) {
        const std::size_t t = index(site);
        TaskMetrics tm{site, ConfusionMatrix(k), {}, std::nullopt};
        std::vector<double> scores;
        std::vector<int> labels;
        for (const auto& d : preds) {
            if (!d.truth.grade[t]) continue;
            const int g = *d.truth.grade[t];
            const grading::Vec4& p = d.probs.p[t];
            std::size_t truth = 0, pred = 0;
            if (options.binary) {
                truth = g == 3 ? 1 : 0;
                pred = grading::binary_collapse(p)[1] >= options.threshold ? 1 : 0;
            } else if (options.merge_mild_moderate) {
                static constexpr std::size_t map[] = {0, 1, 1, 2};
                truth = map[g];
                pred = grading::argmax(grading::merge_mild_moderate(p));
            } else {
                truth = static_cast<std::size_t>(g);
                pred = grading::argmax(p);
            }
            tm.confusion.add(truth, pred);
            scores.push_back(grading::binary_collapse(p)[1]);
            labels.push_back(g == 3 ? 1 : 0);
        }
        tm.accuracy = class_accuracy(tm.confusion);
        for (const auto& msg : tm.accuracy.diagnostics)
            rep.diagnostics.push_back(std::string(to_string(site)) + ": " + msg);
        if (tm.confusion.total() > 0) {
            avg_sum += tm.accuracy.class_average;
            ++avg_n;
        }
        const bool both = std::any_of(labels.begin(), labels.end(), [](int v) { return v == 1; }) &&
                          std::any_of(labels.begin(), labels.end(), [](int v) { return v == 0; });
        if (both) {
            tm.auc = auc_with_ci(scores, labels, options.bootstrap_seed + t, options.bootstrap_resamples);
        } else if (!labels.empty()) {
            rep.diagnostics.push_back(std::string(to_string(site)) + ": AUC undefined with a single class");
        }
        rep.tasks.push_back(std::move(tm));
    }
    rep.class_average = avg_n > 0 ? avg_sum / static_cast<double>(avg_n) : 0.0;

    for (DiscLevel level : kAllDiscLevels) {
        if (options.level && level != *options.level) continue;
        LevelBinary lb{level, std::nullopt, std::nullopt};
        for (SiteGroup g : {SiteGroup::Central, SiteGroup::Foraminal}) {
            try {
                const double a = per_level_binary_accuracy(preds, level, g, options.threshold);
                (g == SiteGroup::Central ? lb.central : lb.foraminal) = a;
            } catch (const Error& e) {
                if (e.code() != ErrorCode::EmptyLevel) throw;
            }
        }
        rep.per_level.push_back(lb);
    }
    return rep;
}

namespace {

nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

std::string fmt(const std::optional<double>& v) {
    if (!v) return "-";
    std::ostringstream o;
    o << std::fixed << std::setprecision(3) << *v;
    return o.str();
}

}  // namespace

std::string to_json(const MetricReport& r, int indent) {
    nlohmann::ordered_json j;
    j["options"] = {{"merge_mild_moderate", r.options.merge_mild_moderate},
                    {"binary", r.options.binary},
                    {"level", r.options.level ? nlohmann::json(std::string(to_string(*r.options.level)))
                                              : nlohmann::json()},
                    {"threshold", r.options.threshold},
                    {"bootstrap_seed", r.options.bootstrap_seed},
                    {"bootstrap_resamples", r.options.bootstrap_resamples}};
    j["discs"] = r.discs;
    j["class_names"] = r.class_names;
    j["class_average"] = r.class_average;
    nlohmann::ordered_json tasks = nlohmann::ordered_json::array();
    for (const auto& t : r.tasks) {
        nlohmann::ordered_json tj;
        tj["task"] = std::string(to_string(t.site));
        nlohmann::json per_class = nlohmann::json::array();
        for (const auto& a : t.accuracy.per_class) per_class.push_back(opt_json(a));
        tj["per_class_accuracy"] = per_class;
        tj["class_average"] = t.accuracy.class_average;
        nlohmann::json cm = nlohmann::json::array();
        for (std::size_t i = 0; i < t.confusion.classes(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (std::size_t c = 0; c < t.confusion.classes(); ++c) row.push_back(t.confusion.at(i, c));
            cm.push_back(row);
        }
        tj["confusion"] = cm;
        if (t.auc)
            tj["auc"] = {{"value", t.auc->auc}, {"ci_low", t.auc->ci_low}, {"ci_high", t.auc->ci_high}};
        else
            tj["auc"] = nullptr;
        tasks.push_back(tj);
    }
    j["tasks"] = tasks;
    nlohmann::ordered_json levels = nlohmann::ordered_json::array();
    for (const auto& l : r.per_level)
        levels.push_back({{"level", std::string(to_string(l.level))},
                          {"central", opt_json(l.central)},
                          {"foraminal", opt_json(l.foraminal)}});
    j["binary_accuracy_per_level"] = levels;
    j["diagnostics"] = r.diagnostics;
    return j.dump(indent);
}

std::string to_text_table(const MetricReport& r) {
    std::ostringstream o;
    constexpr int w0 = 8;
    constexpr int w = 15;
    o << std::left << std::setw(w0) << "task";
    for (const auto& name : r.class_names) o << std::right << std::setw(w) << name;
    o << std::setw(w) << "class avg" << std::setw(w) << "AUC" << '\n';
    for (const auto& t : r.tasks) {
        o << std::left << std::setw(w0) << to_string(t.site) << std::right;
        for (const auto& a : t.accuracy.per_class) o << std::setw(w) << fmt(a);
        o << std::setw(w) << fmt(t.accuracy.class_average);
        o << std::setw(w) << (t.auc ? fmt(t.auc->auc) : std::string("-")) << '\n';
    }
    o << std::left << std::setw(w0) << "all" << std::right << std::setw(w * static_cast<int>(r.class_names.size() + 1))
      << fmt(r.class_average) << "\n\n";
    o << std::left << std::setw(w0) << "level" << std::right << std::setw(w) << "central" << std::setw(w)
      << "foraminal" << '\n';
    for (const auto& l : r.per_level)
        o << std::left << std::setw(w0) << to_string(l.level) << std::right << std::setw(w) << fmt(l.central)
          << std::setw(w) << fmt(l.foraminal) << '\n';
    return o.str();
}

}  // namespace spinegrade::eval
