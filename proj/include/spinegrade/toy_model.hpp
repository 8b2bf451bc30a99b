#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spinegrade/grading.hpp"

namespace spinegrade::grading {

struct ToyConfig {
    int epochs = 300;
    std::uint64_t seed = 1;
    double lr = 1.0;
    double rho = 0.95;
    double epsilon = 1e-6;
    std::vector<int> hidden_sizes{64, 32};
    int batch_size = 16;
    double leaky_slope = 0.01;
    bool mean_reduction = false;  // loss summed over the batch unless set
    double weight_decay = 10.0;   // L2 on weights (not biases): adds (weight_decay / 2) |W|^2 per epoch

    AdadeltaParams adadelta() const noexcept { return {lr, rho, epsilon}; }
};

/// key = value lines; '#' comments; keys: epochs, seed, lr, rho, epsilon, hidden_sizes
/// (e.g. "64,32" or "[64, 32]"), batch_size, leaky_slope, weight_decay, reduction ("sum" | "mean").
/// Throws InvalidConfig on unknown keys or out-of-range values.
ToyConfig parse_toy_config(std::string_view text);
ToyConfig load_toy_config(const std::filesystem::path& path);
std::string format_toy_config(const ToyConfig& config);

struct Sample {
    std::vector<double> features;
    Targets targets;
};

/// Shared fully connected trunk with leaky-ReLU activations and three 4-way softmax heads.
/// Inputs are standardized with per-feature statistics taken from the training set.
class ToyModel {
public:
    struct Layer {
        std::size_t in = 0;
        std::size_t out = 0;
        std::size_t weight_offset = 0;  // row-major out x in
        std::size_t bias_offset = 0;
        friend bool operator==(const Layer&, const Layer&) = default;
    };

    ToyModel() = default;
    /// He-uniform weights drawn from a seeded generator; zero biases.
    ToyModel(std::size_t input_dim, std::vector<int> hidden_sizes, std::uint64_t seed, double leaky_slope = 0.01);

    std::size_t input_dim() const noexcept { return input_dim_; }
    const std::vector<int>& hidden_sizes() const noexcept { return hidden_; }
    double leaky_slope() const noexcept { return slope_; }
    const std::vector<Layer>& layers() const noexcept { return layers_; }  // trunk layers then the head
    std::span<double> parameters() noexcept { return params_; }
    std::span<const double> parameters() const noexcept { return params_; }

    std::vector<double>& feature_mean() noexcept { return mean_; }
    std::vector<double>& feature_scale() noexcept { return scale_; }
    const std::vector<double>& feature_mean() const noexcept { return mean_; }
    const std::vector<double>& feature_scale() const noexcept { return scale_; }
    /// Per-feature mean and one inverse RMS deviation shared by all features (1 when constant).
    void fit_normalizer(std::span<const Sample> samples);

    TaskLogits logits(std::span<const double> features) const;
    TaskProbabilities forward(std::span<const double> features) const;

    /// Adds d(loss)/d(params) for one sample into grad (same layout as parameters());
    /// returns the sample's loss.
    double accumulate_gradient(const Sample& sample, const ClassWeights& weights, std::span<double> grad,
                               double scale = 1.0) const;

    friend bool operator==(const ToyModel&, const ToyModel&) = default;

private:
    void build_layers();
    std::vector<double> standardize(std::span<const double> features) const;

    std::size_t input_dim_ = 0;
    std::vector<int> hidden_;
    double slope_ = 0.01;
    std::vector<Layer> layers_;
    std::vector<double> params_;
    std::vector<double> mean_;
    std::vector<double> scale_;
};

struct TrainResult {
    ToyModel model;
    std::vector<double> loss_history;  // mean per-sample loss over each epoch
};

/// Mini-batch Adadelta on the weighted loss; samples without any labeled task are skipped.
/// Throws EmptyDataset when no sample carries a label, ShapeMismatch on ragged features and
/// NonFiniteInput on non-finite features.
TrainResult toy_train(std::span<const Sample> samples, const ClassWeights& weights, const ToyConfig& config);

/// Checkpoint container "SPNM": named little-endian f32 tensors.
void save_checkpoint(const ToyModel& model, const std::filesystem::path& path);
ToyModel load_checkpoint(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_checkpoint(const ToyModel& model);
ToyModel decode_checkpoint(std::span<const std::uint8_t> bytes);

}  // namespace spinegrade::grading
