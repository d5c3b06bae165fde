#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "vocscan/classifier.hpp"
#include "vocscan/dataset.hpp"
#include "vocscan/detector.hpp"
#include "vocscan/eval.hpp"
#include "vocscan/manifest.hpp"
#include "vocscan/synthgen.hpp"

namespace vocscan {

struct StudyConfig {
    SynthConfig synth;
    std::size_t num_vocs = 10;
    std::size_t train_samples = 30;
    std::size_t test_samples = 10;
    /// Chance that a given compound appears in a given sample.
    double presence_probability = 0.8;
    /// Unannotated non-target compounds per sample (overrides synth.background_compounds).
    std::size_t background_compounds = 20;
    std::uint64_t seed = 1;
};

/// Synthetic study held in memory. Sample i is its own participant; the
/// first train_samples go to the training split.
struct Study {
    std::vector<VocTemplate> templates;
    std::vector<AnnotatedSample> train;
    std::vector<AnnotatedSample> test;
    Manifest manifest;
};

[[nodiscard]] Study make_study(const StudyConfig& cfg);

/// Writes samples/<id>.csv, annotations/<id>.csv, templates.json and
/// manifest.json under dir.
void write_study(const Study& study, const std::filesystem::path& dir);

/// Loads the matrices and annotations of one split.
[[nodiscard]] std::vector<AnnotatedSample> load_split(const Manifest& manifest, Split split);

[[nodiscard]] SampleTruth truth_of(const AnnotatedSample& s);
[[nodiscard]] std::vector<SampleTruth> truths_of(std::span<const AnnotatedSample> samples);

/// Centred originals plus negatives, optionally expanded by augmentation.
[[nodiscard]] IndexedDataset build_training_set(std::span<const AnnotatedSample> samples,
                                                const RunParams& params, bool augment);

[[nodiscard]] AugmentationParams augmentation_of(const RunParams& params);

struct DetectedSample {
    DetectResult result;
    SampleOutcome outcome;
};

/// Scans and filters every sample; results keep the input order.
[[nodiscard]] std::vector<DetectedSample> detect_samples(const Classifier& model,
                                                         std::span<const AnnotatedSample> samples,
                                                         std::size_t delta, std::size_t gamma,
                                                         std::size_t workers);

/// Evaluates detections against their samples' truth with RT ranges from `training`.
[[nodiscard]] EvaluationReport evaluate_detections(std::span<const DetectedSample> detected,
                                                   std::span<const SampleTruth> training,
                                                   std::size_t num_vocs);

}  // namespace vocscan
