#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "vocscan/core.hpp"
#include "vocscan/manifest.hpp"
#include "vocscan/random.hpp"

namespace vocscan {

struct Provenance {
    std::string sample_id;
    std::size_t anchor_row = 0;  ///< first row of the centred (shift 0) window
    int shift = 0;
    int variant = 0;  ///< 0 = no intensity variation
};

/// A delta x C block cut from an abundance matrix, with its class label.
struct DataPoint {
    std::vector<double> values;  ///< row-major, rows x cols
    std::vector<double> row_rts;
    std::size_t rows = 0;
    std::size_t cols = 0;
    VocLabel label = kNegativeLabel;
    Provenance provenance;

    [[nodiscard]] MatrixView view() const noexcept { return {values, rows, cols}; }
    [[nodiscard]] std::size_t first_row() const noexcept {
        return static_cast<std::size_t>(static_cast<long long>(provenance.anchor_row) +
                                        provenance.shift);
    }
};

struct AugmentationParams {
    int shift_min = -9;
    int shift_max = 10;
    int variants_per_shift = 4;
    double r_max = 0.1;
    /// Width of the intensity Gaussian as a fraction of (end_rt - start_rt).
    double sigma_fraction = 0.25;

    [[nodiscard]] std::size_t shift_count() const noexcept {
        return shift_max >= shift_min ? static_cast<std::size_t>(shift_max - shift_min + 1) : 0;
    }
    [[nodiscard]] std::size_t points_per_original() const noexcept {
        return shift_count() * (1 + static_cast<std::size_t>(variants_per_shift));
    }
};

/// First row of the window that centres the annotation's midpoint at offset delta/2.
/// Throws ExtractionError when that window does not fit.
[[nodiscard]] std::size_t centered_start(const AbundanceMatrix& a, const GroundTruthAnnotation& ann,
                                         std::size_t delta);

/// Centred VOC data point. Warns when the elution spans more than delta - 19 rows.
[[nodiscard]] DataPoint extract_datapoint(const AbundanceMatrix& a, const GroundTruthAnnotation& ann,
                                          std::size_t delta);

/// Copies the window starting at `start` into a data point.
[[nodiscard]] DataPoint cut_datapoint(const AbundanceMatrix& a, std::size_t start, std::size_t delta,
                                      VocLabel label);

/// Every window start whose retention-time span misses all annotated intervals.
[[nodiscard]] std::vector<std::size_t> voc_free_starts(const AbundanceMatrix& a,
                                                       std::span<const GroundTruthAnnotation> anns,
                                                       std::size_t delta);

/// `count` distinct VOC-free windows labelled 0. Throws SamplingError when
/// fewer than `count` such windows exist.
[[nodiscard]] std::vector<DataPoint> sample_negatives(const AbundanceMatrix& a,
                                                      std::span<const GroundTruthAnnotation> anns,
                                                      std::size_t count, std::size_t delta, Rng& rng);

/// One point per shift in [shift_min, shift_max] around the centred window.
[[nodiscard]] std::vector<DataPoint> augment_translation(const AbundanceMatrix& a,
                                                         const GroundTruthAnnotation& ann,
                                                         std::size_t delta,
                                                         const AugmentationParams& params = {});

/// Row multiplier exp(-((rt - mu) / sigma)^2 / 2) * r + 1 inside the open
/// interval (start_rt, end_rt), 1 outside.
[[nodiscard]] double intensity_multiplier(double rt, const GroundTruthAnnotation& ann, double r,
                                          double sigma_fraction);

/// Scales every row of values by its intensity multiplier.
void apply_intensity_variation(std::span<double> values, std::size_t cols,
                               std::span<const double> row_rts, const GroundTruthAnnotation& ann,
                               double r, double sigma_fraction);

/// Draws r uniformly from (0, r_max).
[[nodiscard]] double draw_intensity_factor(Rng& rng, double r_max);

/// Intensity-varied copy of dp with a fresh r drawn from rng.
[[nodiscard]] DataPoint augment_intensity(const DataPoint& dp, const GroundTruthAnnotation& ann,
                                          Rng& rng, const AugmentationParams& params = {});

/// Translations, each followed by variants_per_shift intensity variants.
[[nodiscard]] std::vector<DataPoint> augment_full(const AbundanceMatrix& a,
                                                  const GroundTruthAnnotation& ann, std::size_t delta,
                                                  const AugmentationParams& params, Rng& rng);

/// Global min-max scaling to [0, 1]; constant blocks become all zeros.
void normalize_in_place(std::span<double> values);
[[nodiscard]] DataPoint normalize(DataPoint dp);

/// Labelled, shape-consistent points handed to a trainer. materialize()
/// writes the normalized rows x cols values of point i.
class TrainingSource {
public:
    virtual ~TrainingSource() = default;
    [[nodiscard]] virtual std::size_t size() const = 0;
    [[nodiscard]] virtual std::size_t rows() const = 0;
    [[nodiscard]] virtual std::size_t cols() const = 0;
    [[nodiscard]] virtual VocLabel label(std::size_t i) const = 0;
    virtual void materialize(std::size_t i, std::span<double> out) const = 0;

    [[nodiscard]] std::map<VocLabel, std::size_t> class_counts() const;
    [[nodiscard]] VocLabel max_label() const;
};

/// In-memory list of (already normalized) points.
class LabeledDataset : public TrainingSource {
public:
    LabeledDataset() = default;
    explicit LabeledDataset(std::vector<DataPoint> points);

    void add(DataPoint p);
    [[nodiscard]] const std::vector<DataPoint>& points() const noexcept { return points_; }

    std::size_t size() const override { return points_.size(); }
    std::size_t rows() const override;
    std::size_t cols() const override;
    VocLabel label(std::size_t i) const override { return points_[i].label; }
    void materialize(std::size_t i, std::span<double> out) const override;

private:
    std::vector<DataPoint> points_;
};

/// How to rebuild one data point from its source matrix.
struct PointRecipe {
    std::uint32_t sample = 0;  ///< index into the dataset's sample list
    VocLabel label = kNegativeLabel;
    std::size_t anchor_row = 0;
    int shift = 0;
    int variant = 0;
    double r = 0.0;
    double start_rt = 0.0;  ///< annotated interval (positives only)
    double end_rt = 0.0;

    [[nodiscard]] std::size_t first_row() const noexcept {
        return static_cast<std::size_t>(static_cast<long long>(anchor_row) + shift);
    }
};

/// Training sample: matrix plus its expert annotations.
struct AnnotatedSample {
    std::shared_ptr<const AbundanceMatrix> matrix;
    std::vector<GroundTruthAnnotation> annotations;
};

/// Dataset stored as recipes over shared matrices; points are rebuilt on
/// demand so a fully augmented set never has to fit in memory.
class IndexedDataset : public TrainingSource {
public:
    IndexedDataset() = default;
    IndexedDataset(std::vector<std::shared_ptr<const AbundanceMatrix>> samples, std::size_t delta,
                   double sigma_fraction);

    void add(const PointRecipe& recipe);
    [[nodiscard]] const std::vector<PointRecipe>& recipes() const noexcept { return recipes_; }
    [[nodiscard]] const std::vector<std::shared_ptr<const AbundanceMatrix>>& samples() const noexcept {
        return samples_;
    }
    [[nodiscard]] double sigma_fraction() const noexcept { return sigma_fraction_; }

    /// Unnormalized point with full provenance.
    [[nodiscard]] DataPoint build(std::size_t i) const;

    std::size_t size() const override { return recipes_.size(); }
    std::size_t rows() const override { return delta_; }
    std::size_t cols() const override;
    VocLabel label(std::size_t i) const override { return recipes_[i].label; }
    void materialize(std::size_t i, std::span<double> out) const override;

    /// JSON container: sample ids, delta, channels and one recipe per point.
    void save(std::ostream& out) const;
    using SampleResolver = std::function<std::shared_ptr<const AbundanceMatrix>(const std::string&)>;
    [[nodiscard]] static IndexedDataset load(std::istream& in, const SampleResolver& resolve);

private:
    std::vector<std::shared_ptr<const AbundanceMatrix>> samples_;
    std::vector<PointRecipe> recipes_;
    std::size_t delta_ = 0;
    double sigma_fraction_ = 0.25;
};

/// Augmentation recipes for one annotation (same draw order as augment_full).
[[nodiscard]] std::vector<PointRecipe> plan_augmentation(const AbundanceMatrix& a,
                                                         std::uint32_t sample_index,
                                                         const GroundTruthAnnotation& ann,
                                                         std::size_t delta,
                                                         const AugmentationParams& params, Rng& rng);

/// Centred originals of every annotation plus negative_ratio x as many negatives.
/// Annotations whose window does not fit are skipped with a warning.
[[nodiscard]] IndexedDataset extract_dataset(std::span<const AnnotatedSample> samples,
                                             std::size_t delta, double negative_ratio,
                                             double sigma_fraction, std::uint64_t seed);

/// Expands every positive original of `originals` by augmentation and redraws
/// negatives to negative_ratio x the augmented positive count. Each original
/// uses its own derived seed, so the result does not depend on processing order.
[[nodiscard]] IndexedDataset augment_dataset(const IndexedDataset& originals,
                                             std::span<const AnnotatedSample> samples,
                                             const AugmentationParams& params,
                                             double negative_ratio, std::uint64_t seed);

struct Fold {
    std::vector<std::string> train_participants;
    std::vector<std::string> validation_participants;
    std::vector<std::string> train_samples;
    std::vector<std::string> validation_samples;
};

/// Participant-level k-fold partition. Participants are shuffled with `seed`
/// and dealt round-robin, so fold sizes differ by at most one.
[[nodiscard]] std::vector<Fold> split_by_participant(std::span<const SampleEntry> samples,
                                                     std::size_t folds, std::uint64_t seed = 0);

}  // namespace vocscan
