#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "vocscan/core.hpp"
#include "vocscan/scanner.hpp"

namespace vocscan {

/// A maximal run of one positive label in the scan.
struct Detection {
    VocLabel label = 1;
    std::size_t start_index = 0;  ///< first window of the run (0-based)
    std::size_t run_length = 0;
    double start_rt = 0.0;
    double end_rt = 0.0;
    double confidence = 0.0;
    std::string sample_id;

    [[nodiscard]] Interval interval() const noexcept { return {start_rt, end_rt}; }
    friend bool operator==(const Detection&, const Detection&) = default;
};

/// One detection per maximal constant-label run of length >= gamma with label > 0.
[[nodiscard]] std::vector<Detection> duration_rule(const ScanResult& scan, std::size_t gamma);

/// Largest mean over all gamma-long consecutive slices. Throws ContractError
/// when the slice is shorter than gamma.
[[nodiscard]] double detection_confidence(std::span<const double> confidences, std::size_t gamma);

/// Removes, in one pass against the input set, every detection preceded (by
/// start_rt, non-strict) by three distinct higher labels or followed by three
/// distinct lower labels.
[[nodiscard]] std::vector<Detection> order_rule(std::span<const Detection> detections);

/// Keeps the most confident detection of each label; ties go to the smaller
/// start_rt. Output ordered by start_rt.
[[nodiscard]] std::vector<Detection> uniqueness_rule(std::span<const Detection> detections);

struct DetectionStages {
    std::vector<Detection> all;      ///< after the duration rule
    std::vector<Detection> ordered;  ///< after the order rule
    std::vector<Detection> final;    ///< after the uniqueness rule, sorted by start_rt
};

[[nodiscard]] DetectionStages apply_rules(const ScanResult& scan, std::size_t gamma);

struct DetectResult {
    ScanResult scan;
    DetectionStages stages;
    double scan_seconds = 0.0;
};

/// scan, then duration, order and uniqueness rules.
[[nodiscard]] DetectResult detect(const AbundanceMatrix& a, const Classifier& model,
                                  std::size_t delta, std::size_t gamma, std::size_t workers = 1);

/// CSV for plotting: rt,tic,label (label of the detection covering rt, else 0).
void emit_chromatogram(std::ostream& out, const AbundanceMatrix& a,
                       std::span<const Detection> detections);

}  // namespace vocscan
