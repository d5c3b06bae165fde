#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "vocscan/core.hpp"
#include "vocscan/dataset.hpp"

namespace vocscan {

/// Probability distribution over the K + 1 classes.
class ProbVector {
public:
    ProbVector() = default;
    /// Throws ContractError unless every entry is in [0, 1] and the sum is 1 within 1e-9.
    explicit ProbVector(std::vector<double> p);

    [[nodiscard]] std::size_t size() const noexcept { return p_.size(); }
    [[nodiscard]] double operator[](std::size_t i) const noexcept { return p_[i]; }
    [[nodiscard]] std::span<const double> values() const noexcept { return p_; }

private:
    std::vector<double> p_;
};

/// Max-shifted softmax. Throws ContractError on non-finite input.
[[nodiscard]] ProbVector softmax(std::span<const double> logits);

struct Classification {
    VocLabel label = kNegativeLabel;
    double confidence = 0.0;
};

/// argmax / max of p; ties go to the smaller label.
[[nodiscard]] Classification classify(const ProbVector& p);

struct ModelInfo {
    std::size_t num_classes = 0;  ///< K + 1
    std::size_t window_rows = 0;
    std::size_t channels = 0;
    std::string kind;
};

/// Window classifier. predict() takes a normalized window and must be
/// deterministic and safe to call concurrently.
class Classifier {
public:
    virtual ~Classifier() = default;
    [[nodiscard]] virtual const ModelInfo& info() const noexcept = 0;
    [[nodiscard]] virtual ProbVector predict(MatrixView normalized) const = 0;
    virtual void save(std::ostream& out) const = 0;
};

struct ClassifiedWindow {
    Classification result;
    ProbVector probabilities;
};

/// Throws ContractError when the point's shape differs from the model's.
[[nodiscard]] ClassifiedWindow classify(const Classifier& model, const DataPoint& normalized);
[[nodiscard]] ClassifiedWindow classify(const Classifier& model, MatrixView normalized);

/// Nearest-centroid baseline: softmax over negative Euclidean distances.
class CentroidClassifier : public Classifier {
public:
    CentroidClassifier(ModelInfo info, std::vector<std::vector<double>> centroids);

    const ModelInfo& info() const noexcept override { return info_; }
    ProbVector predict(MatrixView normalized) const override;
    void save(std::ostream& out) const override;

    [[nodiscard]] const std::vector<std::vector<double>>& centroids() const noexcept {
        return centroids_;
    }

private:
    ModelInfo info_;
    std::vector<std::vector<double>> centroids_;
};

/// Per-class means. num_classes = 0 infers K + 1 from the largest label.
/// Throws TrainingError when any class has no points.
[[nodiscard]] std::unique_ptr<CentroidClassifier> train_centroid(const TrainingSource& data,
                                                                 std::size_t num_classes = 0);

/// Reads any model written by Classifier::save.
[[nodiscard]] std::unique_ptr<Classifier> load_model(std::istream& in);
[[nodiscard]] std::unique_ptr<Classifier> load_model(const std::filesystem::path& path);
void save_model(const Classifier& model, const std::filesystem::path& path);

inline constexpr int kModelFormatVersion = 1;

}  // namespace vocscan
