#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spinegrade/grading.hpp"
#include "spinegrade/levels.hpp"

namespace spinegrade::eval {

enum class Split { Train, Validation, Test };
std::string_view to_string(Split s) noexcept;

/// Whether ids name whole studies (default, no patient leakage) or individual discs.
enum class SplitMode { Study, Disc };
std::string_view to_string(SplitMode m) noexcept;

struct SplitRatios {
    double train = 0.70;
    double validation = 0.15;
    double test = 0.15;
};

struct SplitAssignment {
    std::map<std::string, Split> assignment;
    SplitRatios ratios;
    std::uint64_t seed = 0;
    SplitMode mode = SplitMode::Study;

    std::vector<std::string> ids(Split s) const;  // sorted
    std::size_t count(Split s) const;
};

/// Sorts and de-duplicates the ids, shuffles them with a seeded generator, then cuts
/// round(n*train) and round(n*validation) ids off the front; the rest is test.
/// Throws BadRatios unless every ratio is > 0 and they sum to 1 within 1e-9.
SplitAssignment split_dataset(std::vector<std::string> ids, const SplitRatios& ratios, std::uint64_t seed,
                              SplitMode mode = SplitMode::Study);

/// "study_id/level" key used for disc-level splits.
std::string disc_key(std::string_view study_id, DiscLevel level);

/// Rows are truth classes, columns predictions.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t classes = grading::kClasses);

    std::size_t classes() const noexcept { return k_; }
    void add(std::size_t truth, std::size_t predicted, std::uint64_t count = 1);
    std::uint64_t at(std::size_t truth, std::size_t predicted) const { return counts_.at(truth * k_ + predicted); }
    std::uint64_t support(std::size_t truth) const;
    std::uint64_t total() const;

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::size_t k_;
    std::vector<std::uint64_t> counts_;
};

/// 4-class matrix with mild and moderate rows/columns summed: classes (normal, mild/moderate, severe).
ConfusionMatrix merge_mild_moderate(const ConfusionMatrix& four);
/// 4-class matrix collapsed to (negative = normal..moderate, positive = severe).
ConfusionMatrix binary_collapse(const ConfusionMatrix& four);

struct ClassAccuracy {
    std::vector<std::optional<double>> per_class;  // nullopt for zero-support classes
    double class_average = 0.0;                    // unweighted mean over supported classes
    std::vector<std::string> diagnostics;
};

ClassAccuracy class_accuracy(const ConfusionMatrix& cm);

/// Mann-Whitney statistic: fraction of (positive, negative) pairs ranked correctly, ties 0.5.
/// Throws SingleClass unless both classes occur, ShapeMismatch on unequal lengths.
double auc(std::span<const double> scores, std::span<const int> labels);

struct AucResult {
    double auc = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::size_t resamples = 0;
};

/// AUC plus a percentile bootstrap interval (2.5 / 97.5) from a seeded generator;
/// resamples that draw a single class are redrawn.
AucResult auc_with_ci(std::span<const double> scores, std::span<const int> labels, std::uint64_t seed,
                      std::size_t resamples = 2000);

/// One disc's predicted probabilities and reference grades.
struct DiscPrediction {
    std::string study_id;
    DiscLevel level{};
    grading::TaskProbabilities probs;
    grading::Targets truth;
};

enum class SiteGroup { Central, Foraminal };  // Foraminal pools RFS and LFS
std::string_view to_string(SiteGroup g) noexcept;

/// Accuracy of the binary-collapsed decision P_pos >= threshold over labeled tasks of the
/// group at one level. Throws EmptyLevel when nothing is labeled there.
double per_level_binary_accuracy(std::span<const DiscPrediction> predictions, DiscLevel level, SiteGroup group,
                                 double threshold = 0.5);

struct EvalOptions {
    bool merge_mild_moderate = false;
    bool binary = false;
    std::optional<DiscLevel> level;  // restrict every metric to one level
    double threshold = 0.5;
    std::uint64_t bootstrap_seed = 1;
    std::size_t bootstrap_resamples = 2000;
};

struct TaskMetrics {
    StenosisSite site{};
    ConfusionMatrix confusion;
    ClassAccuracy accuracy;
    std::optional<AucResult> auc;  // binary P_pos vs severe; absent with a single class
};

struct LevelBinary {
    DiscLevel level{};
    std::optional<double> central;
    std::optional<double> foraminal;
};

struct MetricReport {
    EvalOptions options;
    std::size_t discs = 0;
    std::vector<std::string> class_names;
    std::vector<TaskMetrics> tasks;
    std::vector<LevelBinary> per_level;
    double class_average = 0.0;  // mean of the task class averages
    std::vector<std::string> diagnostics;
};

MetricReport evaluate(std::span<const DiscPrediction> predictions, const EvalOptions& options = {});

std::string to_json(const MetricReport& report, int indent = 2);
/// Aligned text tables: per-class accuracy per task, then binary accuracy per level.
std::string to_text_table(const MetricReport& report);

}  // namespace spinegrade::eval
