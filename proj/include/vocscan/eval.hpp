#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vocscan/core.hpp"
#include "vocscan/detector.hpp"

namespace vocscan {

/// Expert annotations of one sample, with the GC column generation it was run on.
struct SampleTruth {
    std::string sample_id;
    int column_epoch = 1;
    std::vector<GroundTruthAnnotation> annotations;
};

/// [min peak_rt, max peak_rt] per (label, column epoch) over training annotations.
class RtRangeTable {
public:
    void add(VocLabel label, int epoch, double peak_rt);
    [[nodiscard]] std::optional<Interval> range(VocLabel label, int epoch) const;
    [[nodiscard]] double max_length() const noexcept;
    [[nodiscard]] const std::map<std::pair<VocLabel, int>, Interval>& entries() const noexcept {
        return entries_;
    }

private:
    std::map<std::pair<VocLabel, int>, Interval> entries_;
};

[[nodiscard]] RtRangeTable build_rt_ranges(std::span<const SampleTruth> training);

/// How a detection's position is compared with an annotation.
enum class RtMatch {
    overlap,      ///< detection interval intersects [start_rt, end_rt]
    peak_inside,  ///< peak_rt lies inside the detection interval
};

[[nodiscard]] bool matches(const Detection& d, const GroundTruthAnnotation& ann, RtMatch rule);

/// Localisation + classification matching of one sample.
struct Protocol1Result {
    std::vector<Detection> tp;
    std::vector<Detection> fp;
    std::vector<GroundTruthAnnotation> fn;
};

/// Requires at most one detection and one annotation per label (ContractError otherwise).
[[nodiscard]] Protocol1Result match_protocol1(std::span<const Detection> detections,
                                              std::span<const GroundTruthAnnotation> truth,
                                              RtMatch rule = RtMatch::overlap);

struct TentativeResult {
    std::vector<Detection> ttp;
    std::vector<Detection> certain_fp;
    std::vector<Detection> unverifiable;  ///< certain FPs whose label has no RT range
    std::vector<GroundTruthAnnotation> ttn;
    std::vector<GroundTruthAnnotation> semi_fn;
};

/// Classifies each pre-filter detection that matches no annotation as a
/// tentative true positive (interval meets its label's RT range for the
/// sample's column epoch) or a certain false positive, and each protocol-1
/// false negative as a tentative true negative (its label has a tentative
/// true positive in the sample) or a semi-certain false negative.
[[nodiscard]] TentativeResult tentative_analysis(std::span<const Detection> pre_filter,
                                                 std::span<const GroundTruthAnnotation> truth,
                                                 std::span<const GroundTruthAnnotation> false_negatives,
                                                 const RtRangeTable& ranges, int column_epoch,
                                                 RtMatch rule = RtMatch::overlap);

/// (max range + max detection length) / (span - max detection length).
/// Throws ContractError when span <= max detection length.
[[nodiscard]] double p_max(double max_range_length, double max_detection_length, double total_span);
[[nodiscard]] double p_max(const RtRangeTable& ranges, std::span<const Detection> pre_filter,
                           double total_span);

struct RankedOutcome {
    double confidence = 0.0;
    std::string sample_id;
    double start_rt = 0.0;
    bool true_positive = false;
};

struct PrPoint {
    double recall = 0.0;
    double precision = 0.0;
};

/// Step-integrated area under precision vs recall of confidence-ranked
/// outcomes. nullopt (with a warning) when gt_count is 0.
[[nodiscard]] std::optional<double> average_precision(std::span<const RankedOutcome> outcomes,
                                                      std::size_t gt_count,
                                                      std::vector<PrPoint>* curve = nullptr);

struct Protocol1Tallies {
    std::size_t tp = 0, ttp = 0, fp = 0, ttn = 0, fn = 0;
    Protocol1Tallies& operator+=(const Protocol1Tallies& o);
};

/// Presence-only tallies; tp and fn are kept for completeness.
struct Protocol2Tallies {
    std::size_t tn = 0, fp_star = 0, ttp_star = 0, tp = 0, fn = 0;
    Protocol2Tallies& operator+=(const Protocol2Tallies& o);
};

/// Presence of each label 1..num_vocs in one sample, ignoring position.
[[nodiscard]] Protocol2Tallies presence_protocol2(std::span<const Detection> detections,
                                                  std::span<const GroundTruthAnnotation> truth,
                                                  const RtRangeTable& ranges, int column_epoch,
                                                  std::size_t num_vocs);

/// Detections whose label appears in every list with pairwise intersecting
/// intervals. The consensus interval is the common intersection and the
/// confidence the mean of the members.
[[nodiscard]] std::vector<Detection> intersect_models(std::span<const std::vector<Detection>> lists);

struct EvaluationReport {
    struct SampleRow {
        std::string sample_id;
        Protocol1Tallies protocol1;
        Protocol2Tallies protocol2;
    };

    std::string model;
    std::vector<SampleRow> samples;
    Protocol1Tallies protocol1;
    Protocol2Tallies protocol2;
    std::map<VocLabel, std::optional<double>> ap;
    std::map<VocLabel, std::vector<PrPoint>> pr_curves;
    std::optional<double> mean_ap;
    std::optional<double> expert_sensitivity;
    std::optional<double> corrected_sensitivity;
    std::optional<double> expert_specificity;
    std::optional<double> corrected_specificity;
    std::optional<double> p_max;
};

/// Derives sensitivities, specificities and mAP; zero denominators give nullopt.
[[nodiscard]] EvaluationReport summarize(const Protocol1Tallies& p1, const Protocol2Tallies& p2,
                                         const std::map<VocLabel, std::optional<double>>& ap);

struct SampleOutcome {
    SampleTruth truth;
    std::vector<Detection> pre_filter;  ///< after the duration rule only
    std::vector<Detection> final;       ///< after all rules
    double rt_span = 0.0;
};

/// Runs both protocols, tentative analysis, AP per label and P_max over a test set.
[[nodiscard]] EvaluationReport evaluate(std::span<const SampleOutcome> samples,
                                        const RtRangeTable& ranges, std::size_t num_vocs,
                                        RtMatch rule = RtMatch::overlap);

void write_report_json(std::ostream& out, const EvaluationReport& report);
[[nodiscard]] EvaluationReport read_report_json(std::istream& in);
void write_report_table(std::ostream& out, const EvaluationReport& report);

}  // namespace vocscan
