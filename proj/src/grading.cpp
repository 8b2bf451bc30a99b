#include "spinegrade/grading.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "spinegrade/error.hpp"
#include "spinegrade/kernels.hpp"

namespace spinegrade::grading {

Targets Targets::from_labels(const StenosisLabelSet& labels) {
    Targets t;
    for (StenosisSite s : kAllSites)
        if (auto g = labels.grade(s)) t.grade[index(s)] = g->value();
    return t;
}

bool Targets::any() const noexcept {
    return std::any_of(grade.begin(), grade.end(), [](const auto& g) { return g.has_value(); });
}

ClassWeights ClassWeights::uniform() noexcept {
    ClassWeights w;
    for (auto& row : w.alpha) row.fill(1.0);
    return w;
}

Vec4 softmax(const Vec4& logits) {
    for (double z : logits)
        if (!std::isfinite(z)) throw Error(ErrorCode::NonFiniteInput, "non-finite logit");
    const double m = *std::max_element(logits.begin(), logits.end());
    Vec4 p;
    double s = 0.0;
    for (std::size_t j = 0; j < kClasses; ++j) {
        p[j] = std::exp(logits[j] - m);
        s += p[j];
    }
    for (double& v : p) v /= s;
    return p;
}

Vec4 class_weights(const std::array<std::uint64_t, kClasses>& counts) {
    std::uint64_t total = 0;
    for (std::size_t j = 0; j < kClasses; ++j) {
        if (counts[j] == 0)
            throw Error(ErrorCode::DegenerateClass, "grade " + std::to_string(j) + " has no training samples");
        total += counts[j];
    }
    const double n_total = static_cast<double>(total);
    Vec4 alpha;
    for (std::size_t j = 0; j < kClasses; ++j)
        alpha[j] = n_total / (static_cast<double>(kClasses) * static_cast<double>(counts[j]));
    auto weighted_total = [&](const Vec4& a) {
        double s = 0.0;
        for (std::size_t j = 0; j < kClasses; ++j) s += a[j] * static_cast<double>(counts[j]);
        return s;
    };
    if (weighted_total(alpha) == n_total) return alpha;
    // Rounding each weight to nearest can leave the identity off by an ulp; move one weight
    // to its neighbouring double so the index-order sum reproduces N exactly.
    for (std::size_t j = kClasses; j-- > 0;) {
        for (const double toward : {0.0, std::numeric_limits<double>::infinity()}) {
            Vec4 nudged = alpha;
            nudged[j] = std::nextafter(alpha[j], toward);
            if (weighted_total(nudged) == n_total) return nudged;
        }
    }
    return alpha;
}

ClassWeights class_weights(const ClassCounts& counts) {
    ClassWeights w;
    for (std::size_t t = 0; t < kTasks; ++t) w.alpha[t] = class_weights(counts[t]);
    return w;
}

ClassCounts count_classes(std::span<const Targets> targets) {
    ClassCounts c{};
    for (const Targets& tg : targets)
        for (std::size_t t = 0; t < kTasks; ++t)
            if (tg.grade[t]) ++c[t][static_cast<std::size_t>(*tg.grade[t])];
    return c;
}

namespace {

std::size_t true_class(const Targets& targets, std::size_t t) {
    const int g = *targets.grade[t];
    if (g < 0 || g >= static_cast<int>(kClasses))
        throw Error(ErrorCode::GradeOutOfRange, "target grade " + std::to_string(g));
    return static_cast<std::size_t>(g);
}

}  // namespace

double weighted_ce_loss(const TaskProbabilities& probs, const Targets& targets, const ClassWeights& weights) {
    double loss = 0.0;
    for (std::size_t t = 0; t < kTasks; ++t) {
        if (!targets.grade[t]) continue;
        const std::size_t j = true_class(targets, t);
        loss -= weights.alpha[t][j] * std::log(std::max(probs.p[t][j], kLogClamp));
    }
    return loss;
}

double weighted_ce_loss_from_logits(const TaskLogits& logits, const Targets& targets, const ClassWeights& weights) {
    TaskProbabilities probs;
    for (std::size_t t = 0; t < kTasks; ++t) probs.p[t] = softmax(logits[t]);
    return weighted_ce_loss(probs, targets, weights);
}

TaskLogits loss_gradient(const TaskLogits& logits, const Targets& targets, const ClassWeights& weights) {
    TaskLogits grad{};
    for (std::size_t t = 0; t < kTasks; ++t) {
        if (!targets.grade[t]) continue;
        const std::size_t jt = true_class(targets, t);
        const Vec4 p = softmax(logits[t]);
        const double a = weights.alpha[t][jt];
        for (std::size_t j = 0; j < kClasses; ++j) grad[t][j] = a * (p[j] - (j == jt ? 1.0 : 0.0));
    }
    return grad;
}

void adadelta_step(std::span<double> params, std::span<const double> gradient, AdadeltaState& state,
                   const AdadeltaParams& hp) {
    if (!(hp.rho > 0.0 && hp.rho < 1.0)) throw Error(ErrorCode::InvalidConfig, "adadelta rho must lie in (0,1)");
    if (!(hp.epsilon > 0.0)) throw Error(ErrorCode::InvalidConfig, "adadelta epsilon must be > 0");
    const std::size_t n = params.size();
    if (gradient.size() != n || state.acc_grad.size() != n || state.acc_update.size() != n)
        throw Error(ErrorCode::ShapeMismatch, "adadelta parameter, gradient and state sizes differ");
    kernels::active().adadelta(params.data(), gradient.data(), state.acc_grad.data(), state.acc_update.data(), n,
                               hp.rho, hp.epsilon, hp.lr);
}

std::array<double, 3> merge_mild_moderate(const Vec4& p) noexcept { return {p[0], p[1] + p[2], p[3]}; }

std::array<double, 2> binary_collapse(const Vec4& p) noexcept { return {p[0] + p[1] + p[2], p[3]}; }

std::size_t argmax(std::span<const double> v) noexcept {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace spinegrade::grading
