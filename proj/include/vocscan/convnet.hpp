#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "vocscan/classifier.hpp"

namespace vocscan {

/// Convolution along the retention-time axis over all m/z channels, ReLU,
/// then non-overlapping max pooling.
struct ConvBlock {
    std::size_t filters = 32;
    std::size_t kernel = 5;  ///< rows
    std::size_t pool = 2;    ///< rows
};

struct ConvNetConfig {
    std::vector<ConvBlock> blocks{{32, 5, 2}, {64, 5, 2}, {64, 5, 2}};
    std::vector<std::size_t> dense{128};
    double learning_rate = 0.003;
    double momentum = 0.9;
    std::size_t batch_size = 32;
    std::size_t epochs = 5;
    std::uint64_t seed = 1;
    std::size_t num_classes = 0;  ///< 0: infer K + 1 from the training labels
    std::size_t workers = 1;
    bool report_final_accuracy = true;

    /// Throws ConfigError when the blocks do not fit a rows-tall input.
    void validate(std::size_t rows) const;
};

/// 1D convolutional classifier. The m/z channels are the input feature
/// channels and the filters slide along retention time only.
struct TrainingReport;

class ConvNet : public Classifier {
public:
    ConvNet(const ConvNetConfig& config, std::size_t window_rows, std::size_t channels,
            std::size_t num_classes);

    const ModelInfo& info() const noexcept override { return info_; }
    ProbVector predict(MatrixView normalized) const override;
    void save(std::ostream& out) const override;

    [[nodiscard]] std::vector<double> logits(MatrixView input) const;

    /// ReLU on/off states and max-pool winners of one forward pass. The loss
    /// is smooth in the parameters wherever this pattern is constant.
    [[nodiscard]] std::vector<std::uint32_t> activation_pattern(MatrixView input) const;

    /// Mean cross-entropy over the inputs; adds d(loss)/d(params) into grad
    /// (which must have parameter_count() entries).
    double loss_and_gradient(std::span<const MatrixView> inputs, std::span<const VocLabel> labels,
                             std::span<double> grad) const;

    [[nodiscard]] std::size_t parameter_count() const noexcept { return params_.size(); }
    [[nodiscard]] std::span<double> parameters() noexcept { return params_; }
    [[nodiscard]] std::span<const double> parameters() const noexcept { return params_; }
    [[nodiscard]] const ConvNetConfig& config() const noexcept { return config_; }

    /// Offset and shape of the first convolution's weights, laid out
    /// [kernel row][input channel][filter].
    [[nodiscard]] std::size_t first_conv_offset() const noexcept;

    [[nodiscard]] static std::unique_ptr<ConvNet> from_json_text(const std::string& text);

    /// Parameter layout of one layer inside the flat parameter vector.
    struct Layer {
        bool conv = true;
        std::size_t in_rows = 1;   ///< conv only
        std::size_t in_width = 0;  ///< input channels (conv) or input features (dense)
        std::size_t out_width = 0;
        std::size_t kernel = 1;
        std::size_t conv_rows = 1;  ///< rows after the valid convolution
        std::size_t pool = 1;
        std::size_t out_rows = 1;  ///< rows after pooling
        bool relu = true;
        std::size_t weight_offset = 0;
        std::size_t bias_offset = 0;
    };
    [[nodiscard]] const std::vector<Layer>& layers() const noexcept { return layers_; }

private:
    friend std::unique_ptr<ConvNet> train_convnet(const TrainingSource&, const ConvNetConfig&, TrainingReport*);
    struct Workspace;
    double forward_backward(MatrixView input, VocLabel label, Workspace& ws, double* grad) const;
    void forward(MatrixView input, Workspace& ws) const;

    ConvNetConfig config_;
    ModelInfo info_;
    std::vector<Layer> layers_;
    std::vector<double> params_;
};

struct TrainingReport {
    std::vector<double> epoch_loss;
    double final_accuracy = 0.0;
    std::size_t points = 0;
    double seconds = 0.0;
};

/// Mini-batch gradient descent with momentum on mean cross-entropy.
/// Deterministic for a given config (independent of config.workers).
/// Throws TrainingError on a non-finite loss.
[[nodiscard]] std::unique_ptr<ConvNet> train_convnet(const TrainingSource& data,
                                                     const ConvNetConfig& config,
                                                     TrainingReport* report = nullptr);

/// Fraction of points whose predicted label matches.
[[nodiscard]] double accuracy(const Classifier& model, const TrainingSource& data,
                              std::size_t workers = 1);

}  // namespace vocscan
