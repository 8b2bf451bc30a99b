#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "spinegrade/levels.hpp"

namespace spinegrade::grading {

inline constexpr std::size_t kClasses = 4;           // normal, mild, moderate, severe
inline constexpr std::size_t kTasks = kSiteCount;    // SCS, RFS, LFS
inline constexpr double kLogClamp = 1e-12;

using Vec4 = std::array<double, kClasses>;

/// Per-task probability 4-vectors, indexed by StenosisSite.
struct TaskProbabilities {
    std::array<Vec4, kTasks> p{};
};

/// Per-task logits, indexed by StenosisSite.
using TaskLogits = std::array<Vec4, kTasks>;

/// Ground-truth grade per task; nullopt masks the task out of the loss.
struct Targets {
    std::array<std::optional<int>, kTasks> grade{};

    static Targets from_labels(const StenosisLabelSet& labels);
    bool any() const noexcept;
};

/// Task x grade weights.
struct ClassWeights {
    std::array<Vec4, kTasks> alpha{};
    static ClassWeights uniform() noexcept;
};

using ClassCounts = std::array<std::array<std::uint64_t, kClasses>, kTasks>;

/// Max-shifted softmax. Throws NonFiniteInput.
Vec4 softmax(const Vec4& logits);

/// alpha_j = N / (4 n_j) for one task, rounded so that sum_j alpha_j n_j (accumulated in index
/// order) equals N exactly; each weight is within one ulp of the quotient. Throws DegenerateClass
/// for a zero count.
Vec4 class_weights(const std::array<std::uint64_t, kClasses>& counts);
ClassWeights class_weights(const ClassCounts& counts);

/// Training-set class counts per task over the unmasked targets.
ClassCounts count_classes(std::span<const Targets> targets);

/// -sum_t sum_j alpha_{j,t} y_{j,t} log max(P_{j,t}, 1e-12) over unmasked tasks.
double weighted_ce_loss(const TaskProbabilities& probs, const Targets& targets, const ClassWeights& weights);

/// Loss as a function of logits (softmax applied per task).
double weighted_ce_loss_from_logits(const TaskLogits& logits, const Targets& targets, const ClassWeights& weights);

/// d loss / d logits: alpha_true * (P - y) per unmasked task, zero for masked tasks.
TaskLogits loss_gradient(const TaskLogits& logits, const Targets& targets, const ClassWeights& weights);

struct AdadeltaParams {
    double lr = 1.0;
    double rho = 0.95;
    double epsilon = 1e-6;
};

/// Running averages of squared gradients and squared updates.
struct AdadeltaState {
    std::vector<double> acc_grad;
    std::vector<double> acc_update;

    AdadeltaState() = default;
    explicit AdadeltaState(std::size_t n) : acc_grad(n, 0.0), acc_update(n, 0.0) {}
};

/// One step of
///   E[g^2] = rho E[g^2] + (1-rho) g^2
///   d      = -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
///   E[dx^2] = rho E[dx^2] + (1-rho) d^2
///   w     += lr * d
/// Throws InvalidConfig for rho outside (0,1), epsilon <= 0 or mismatched sizes.
void adadelta_step(std::span<double> params, std::span<const double> gradient, AdadeltaState& state,
                   const AdadeltaParams& hp = {});

/// (p0, p1 + p2, p3)
std::array<double, 3> merge_mild_moderate(const Vec4& p) noexcept;
/// (p0 + p1 + p2, p3)
std::array<double, 2> binary_collapse(const Vec4& p) noexcept;

std::size_t argmax(std::span<const double> v) noexcept;

}  // namespace spinegrade::grading
