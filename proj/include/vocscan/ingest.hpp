#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "vocscan/core.hpp"
#include "vocscan/detector.hpp"
#include "vocscan/manifest.hpp"

namespace vocscan {

// Matrix CSV:      rt,mz_40,mz_41,...,mz_450   (one row per retention time)
// Annotation CSV:  sample_id,label,start_rt,peak_rt,end_rt
// Detection CSV:   label,start_rt,end_rt,confidence,sample_id,start_index,run_length

/// Parses a matrix CSV. Rejects malformed numbers, ragged rows, negative or
/// non-finite intensities and non-increasing retention times with a
/// ParseError carrying the offending line.
[[nodiscard]] AbundanceMatrix parse_sample(std::istream& in, std::string sample_id,
                                           int column_epoch = 1);
[[nodiscard]] AbundanceMatrix load_sample(const std::filesystem::path& path, std::string sample_id,
                                          int column_epoch = 1);
void emit_sample(std::ostream& out, const AbundanceMatrix& a, int first_mz = kFirstMz);

[[nodiscard]] std::vector<GroundTruthAnnotation> parse_annotations(std::istream& in);
[[nodiscard]] std::vector<GroundTruthAnnotation> load_annotations(const std::filesystem::path& path);
void emit_annotations(std::ostream& out, std::span<const GroundTruthAnnotation> anns);

enum class DetectionFormat { csv, json };

/// Writes one record per detection, ordered by start_rt.
void emit_detections(std::ostream& out, std::span<const Detection> detections,
                     DetectionFormat format);
[[nodiscard]] std::vector<Detection> parse_detections(std::istream& in, DetectionFormat format);
[[nodiscard]] std::vector<Detection> load_detections(const std::filesystem::path& path);

/// Shortest round-trip decimal form of v, padded to at least min_decimals
/// fractional digits.
[[nodiscard]] std::string format_real(double v, int min_decimals = 0);

/// Strict full-field double parse.
[[nodiscard]] bool parse_real(std::string_view text, double& out);

}  // namespace vocscan
