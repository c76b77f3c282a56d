#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "radar2/dataset.hpp"
#include "radar2/spectrum.hpp"

namespace radar2 {

struct TrainConfig {
    int epochs = 20;
    int batch_size = 32;
    double learning_rate = 1e-3;
    std::uint64_t seed = 1;  // initialisation and shuffling

    void validate() const;
};

struct ModelMetadata {
    std::uint64_t seed = 0;
    int epochs = 0;
    std::uint64_t dataset_hash = 0;
    double learning_rate = 0.0;
    double train_accuracy = 0.0;
    double validation_accuracy = 0.0;
};

struct EpochStats {
    double loss = 0.0;  // mean training cross-entropy
    double train_accuracy = 0.0;
    double validation_accuracy = 0.0;
};

struct Classification {
    SignalClass label = SignalClass::Radar;
    double probability = 0.0;  // of `label`
    std::array<double, 2> probabilities{};
    bool low_confidence = false;
};

/// Four conv stages (kernel 7, same padding, ReLU, 2:1 max-pool) with
/// 8/16/32/64 channels, then one fully connected layer to 2 scores.
/// All weights live in one flat vector; see layout() for the offsets.
class SpectrumCnn {
public:
    static constexpr int kKernel = 7;
    static constexpr std::array<int, 5> kChannels = {1, 8, 16, 32, 64};
    static constexpr int kStages = 4;
    static constexpr int kClasses = 2;

    struct Block {
        std::size_t weight_offset;
        std::size_t weight_count;
        std::size_t bias_offset;
        std::size_t bias_count;
    };

    /// Untrained model with zero weights; classify() rejects it.
    SpectrumCnn();

    /// Fan-in scaled uniform initialisation.
    static SpectrumCnn initialized(std::uint64_t seed);

    static std::size_t parameter_count();
    /// Weight/bias ranges for the 4 conv stages followed by the FC layer.
    static std::array<Block, kStages + 1> layout();

    std::span<double> parameters() { return params_; }
    std::span<const double> parameters() const { return params_; }

    bool trained() const { return trained_; }
    const ModelMetadata& metadata() const { return meta_; }

    /// Raw class scores for one 1024-sample input.
    std::array<double, 2> logits(std::span<const float> input) const;
    std::array<double, 2> probabilities(std::span<const float> input) const;

    /// Mean cross-entropy over `batch`; when `grad` is non-null it receives
    /// the gradient of that mean with respect to every parameter.
    double loss(std::span<const SpectrumFeature* const> batch, std::vector<double>* grad) const;

    /// Adam on shuffled mini-batches over rows [0, train_count), reporting
    /// accuracy on both splits after each epoch. Single-threaded and
    /// deterministic for a given config and dataset.
    static SpectrumCnn train(const Dataset& ds, const TrainConfig& cfg,
                             std::vector<EpochStats>* curve = nullptr);

    /// Binary layout: "R2CNN" magic, u32 version, architecture block, metadata
    /// block, u64 parameter count, then little-endian float64 parameters.
    void save(const std::string& path) const;
    static SpectrumCnn load(const std::string& path);

private:
    std::vector<double> params_;
    bool trained_ = false;
    ModelMetadata meta_;
};

/// Argmax label, ties going to Radar. Low confidence when the winning
/// probability is below 0.6.
Classification classify(const SpectrumCnn& model, const SpectrumFeature& feature);

/// Fraction of rows in [begin, end) whose predicted label matches.
double accuracy(const SpectrumCnn& model, const Dataset& ds, std::size_t begin, std::size_t end);

}  // namespace radar2
