#include "vocscan/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <unordered_map>

#include "json.hpp"
#include "vocscan/errors.hpp"

namespace vocscan {

std::size_t centered_start(const AbundanceMatrix& a, const GroundTruthAnnotation& ann, std::size_t delta) {
    if (delta == 0 || a.rows() < delta)
        throw ExtractionError("sample " + a.sample_id() + " is shorter than the window height");
    const std::size_t mid = a.axis().nearest_row(ann.midpoint());
    const std::size_t half = delta / 2;
    if (mid < half || mid - half + delta > a.rows())
        throw ExtractionError("window centred on row " + std::to_string(mid) + " of sample " +
                              a.sample_id() + " (label " + std::to_string(ann.label) +
                              ") does not fit in " + std::to_string(a.rows()) + " rows");
    return mid - half;
}

DataPoint cut_datapoint(const AbundanceMatrix& a, std::size_t start, std::size_t delta, VocLabel label) {
    const MatrixView w = window(a, start, delta);
    DataPoint p;
    p.values.assign(w.data.begin(), w.data.end());
    const auto rts = a.axis().values().subspan(start, delta);
    p.row_rts.assign(rts.begin(), rts.end());
    p.rows = delta;
    p.cols = a.channels();
    p.label = label;
    p.provenance = {a.sample_id(), start, 0, 0};
    return p;
}

DataPoint extract_datapoint(const AbundanceMatrix& a, const GroundTruthAnnotation& ann, std::size_t delta) {
    const std::size_t start = centered_start(a, ann, delta);
    const auto& axis = a.axis();
    const std::size_t elution_rows = axis.nearest_row(ann.end_rt) - axis.nearest_row(ann.start_rt);
    if (delta > 19 && elution_rows > delta - 19)
        warn("label " + std::to_string(ann.label) + " in sample " + a.sample_id() + " elutes over " +
             std::to_string(elution_rows) + " rows; translated copies will clip the peak");
    return cut_datapoint(a, start, delta, ann.label);
}

std::vector<std::size_t> voc_free_starts(const AbundanceMatrix& a,
                                         std::span<const GroundTruthAnnotation> anns, std::size_t delta) {
    std::vector<std::size_t> out;
    const std::size_t n = window_count(a.rows(), delta);
    const auto& axis = a.axis();
    for (std::size_t s = 0; s < n; ++s) {
        const Interval span{axis[s], axis[s + delta - 1]};
        const bool clear = std::none_of(anns.begin(), anns.end(), [&](const GroundTruthAnnotation& ann) {
            return span.intersects(ann.interval());
        });
        if (clear) out.push_back(s);
    }
    return out;
}

namespace {

std::vector<std::size_t> draw_distinct(std::vector<std::size_t> pool, std::size_t count, Rng& rng) {
    for (std::size_t i = 0; i < count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(count);
    return pool;
}

std::vector<std::size_t> negative_starts(const AbundanceMatrix& a,
                                         std::span<const GroundTruthAnnotation> anns, std::size_t count,
                                         std::size_t delta, Rng& rng) {
    auto pool = voc_free_starts(a, anns, delta);
    if (pool.size() < count)
        throw SamplingError("sample " + a.sample_id() + " has " + std::to_string(pool.size()) +
                            " VOC-free windows, " + std::to_string(count) + " requested");
    return draw_distinct(std::move(pool), count, rng);
}

}  // namespace

std::vector<DataPoint> sample_negatives(const AbundanceMatrix& a, std::span<const GroundTruthAnnotation> anns,
                                        std::size_t count, std::size_t delta, Rng& rng) {
    std::vector<DataPoint> out;
    out.reserve(count);
    for (std::size_t s : negative_starts(a, anns, count, delta, rng))
        out.push_back(cut_datapoint(a, s, delta, kNegativeLabel));
    return out;
}

namespace {

void check_shifts_fit(const AbundanceMatrix& a, std::size_t centre, std::size_t delta,
                      const AugmentationParams& params, VocLabel label) {
    const long long lo = static_cast<long long>(centre) + params.shift_min;
    const long long hi = static_cast<long long>(centre) + params.shift_max;
    if (lo < 0 || hi + static_cast<long long>(delta) > static_cast<long long>(a.rows()))
        throw ExtractionError("shifted windows for label " + std::to_string(label) + " in sample " +
                              a.sample_id() + " leave the matrix");
}

}  // namespace

std::vector<DataPoint> augment_translation(const AbundanceMatrix& a, const GroundTruthAnnotation& ann,
                                           std::size_t delta, const AugmentationParams& params) {
    const std::size_t centre = centered_start(a, ann, delta);
    check_shifts_fit(a, centre, delta, params, ann.label);
    std::vector<DataPoint> out;
    out.reserve(params.shift_count());
    for (int n = params.shift_min; n <= params.shift_max; ++n) {
        auto p = cut_datapoint(a, static_cast<std::size_t>(static_cast<long long>(centre) + n), delta, ann.label);
        p.provenance.anchor_row = centre;
        p.provenance.shift = n;
        out.push_back(std::move(p));
    }
    return out;
}

double intensity_multiplier(double rt, const GroundTruthAnnotation& ann, double r, double sigma_fraction) {
    if (!(ann.start_rt < rt && rt < ann.end_rt)) return 1.0;
    const double sigma = sigma_fraction * (ann.end_rt - ann.start_rt);
    const double z = (rt - ann.midpoint()) / sigma;
    return std::exp(-0.5 * z * z) * r + 1.0;
}

void apply_intensity_variation(std::span<double> values, std::size_t cols, std::span<const double> row_rts,
                               const GroundTruthAnnotation& ann, double r, double sigma_fraction) {
    for (std::size_t row = 0; row < row_rts.size(); ++row) {
        if (!(ann.start_rt < row_rts[row] && row_rts[row] < ann.end_rt)) continue;
        const double m = intensity_multiplier(row_rts[row], ann, r, sigma_fraction);
        for (double& v : values.subspan(row * cols, cols)) v *= m;
    }
}

double draw_intensity_factor(Rng& rng, double r_max) {
    std::uniform_real_distribution<double> dist(0.0, r_max);
    double r = 0.0;
    do {
        r = dist(rng);
    } while (r == 0.0);
    return r;
}

DataPoint augment_intensity(const DataPoint& dp, const GroundTruthAnnotation& ann, Rng& rng,
                            const AugmentationParams& params) {
    DataPoint out = dp;
    const double r = draw_intensity_factor(rng, params.r_max);
    apply_intensity_variation(out.values, out.cols, out.row_rts, ann, r, params.sigma_fraction);
    if (out.provenance.variant == 0) out.provenance.variant = 1;
    return out;
}

namespace {

GroundTruthAnnotation recipe_annotation(const PointRecipe& r) {
    GroundTruthAnnotation ann;
    ann.label = r.label;
    ann.start_rt = r.start_rt;
    ann.end_rt = r.end_rt;
    ann.peak_rt = 0.5 * (r.start_rt + r.end_rt);
    return ann;
}

DataPoint build_point(const AbundanceMatrix& a, const PointRecipe& r, std::size_t delta,
                      double sigma_fraction) {
    DataPoint p = cut_datapoint(a, r.first_row(), delta, r.label);
    p.provenance.anchor_row = r.anchor_row;
    p.provenance.shift = r.shift;
    p.provenance.variant = r.variant;
    if (r.variant > 0)
        apply_intensity_variation(p.values, p.cols, p.row_rts, recipe_annotation(r), r.r, sigma_fraction);
    return p;
}

}  // namespace

std::vector<PointRecipe> plan_augmentation(const AbundanceMatrix& a, std::uint32_t sample_index,
                                           const GroundTruthAnnotation& ann, std::size_t delta,
                                           const AugmentationParams& params, Rng& rng) {
    const std::size_t centre = centered_start(a, ann, delta);
    check_shifts_fit(a, centre, delta, params, ann.label);
    std::vector<PointRecipe> out;
    out.reserve(params.points_per_original());
    for (int n = params.shift_min; n <= params.shift_max; ++n) {
        PointRecipe base{sample_index, ann.label, centre, n, 0, 0.0, ann.start_rt, ann.end_rt};
        out.push_back(base);
        for (int v = 1; v <= params.variants_per_shift; ++v) {
            PointRecipe var = base;
            var.variant = v;
            var.r = draw_intensity_factor(rng, params.r_max);
            out.push_back(var);
        }
    }
    return out;
}

std::vector<DataPoint> augment_full(const AbundanceMatrix& a, const GroundTruthAnnotation& ann,
                                    std::size_t delta, const AugmentationParams& params, Rng& rng) {
    const auto recipes = plan_augmentation(a, 0, ann, delta, params, rng);
    std::vector<DataPoint> out;
    out.reserve(recipes.size());
    for (const auto& r : recipes) out.push_back(build_point(a, r, delta, params.sigma_fraction));
    return out;
}

void normalize_in_place(std::span<double> values) {
    if (values.empty()) return;
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it;
    const double range = *hi_it - lo;
    if (!(range > 0.0)) {
        std::fill(values.begin(), values.end(), 0.0);
        return;
    }
    for (double& v : values) v = (v - lo) / range;
}

DataPoint normalize(DataPoint dp) {
    normalize_in_place(dp.values);
    return dp;
}

std::map<VocLabel, std::size_t> TrainingSource::class_counts() const {
    std::map<VocLabel, std::size_t> counts;
    for (std::size_t i = 0; i < size(); ++i) ++counts[label(i)];
    return counts;
}

VocLabel TrainingSource::max_label() const {
    VocLabel m = kNegativeLabel;
    for (std::size_t i = 0; i < size(); ++i) m = std::max(m, label(i));
    return m;
}

LabeledDataset::LabeledDataset(std::vector<DataPoint> points) {
    for (auto& p : points) add(std::move(p));
}

void LabeledDataset::add(DataPoint p) {
    if (p.values.size() != p.rows * p.cols) throw ContractError("data point values do not match its shape");
    if (!points_.empty() && (p.rows != points_.front().rows || p.cols != points_.front().cols))
        throw ContractError("data point shape differs from the rest of the dataset");
    points_.push_back(std::move(p));
}

std::size_t LabeledDataset::rows() const { return points_.empty() ? 0 : points_.front().rows; }
std::size_t LabeledDataset::cols() const { return points_.empty() ? 0 : points_.front().cols; }

void LabeledDataset::materialize(std::size_t i, std::span<double> out) const {
    const auto& v = points_.at(i).values;
    std::copy(v.begin(), v.end(), out.begin());
}

IndexedDataset::IndexedDataset(std::vector<std::shared_ptr<const AbundanceMatrix>> samples,
                               std::size_t delta, double sigma_fraction)
    : samples_(std::move(samples)), delta_(delta), sigma_fraction_(sigma_fraction) {
    for (const auto& s : samples_) {
        if (!s) throw ContractError("null sample in dataset");
        if (s->channels() != samples_.front()->channels())
            throw ContractError("dataset samples differ in channel count");
    }
}

std::size_t IndexedDataset::cols() const { return samples_.empty() ? 0 : samples_.front()->channels(); }

void IndexedDataset::add(const PointRecipe& recipe) {
    if (recipe.sample >= samples_.size()) throw ContractError("recipe refers to an unknown sample");
    const auto& a = *samples_[recipe.sample];
    if (recipe.first_row() + delta_ > a.rows()) throw ExtractionError("recipe window leaves the matrix");
    recipes_.push_back(recipe);
}

DataPoint IndexedDataset::build(std::size_t i) const {
    const auto& r = recipes_.at(i);
    return build_point(*samples_[r.sample], r, delta_, sigma_fraction_);
}

void IndexedDataset::materialize(std::size_t i, std::span<double> out) const {
    const auto& r = recipes_[i];
    const auto& a = *samples_[r.sample];
    const std::size_t first = r.first_row();
    const MatrixView w = window(a, first, delta_);
    std::copy(w.data.begin(), w.data.end(), out.begin());
    if (r.variant > 0)
        apply_intensity_variation(out.first(w.data.size()), a.channels(),
                                  a.axis().values().subspan(first, delta_), recipe_annotation(r), r.r,
                                  sigma_fraction_);
    normalize_in_place(out.first(w.data.size()));
}

void IndexedDataset::save(std::ostream& out) const {
    nlohmann::json doc;
    doc["format"] = "vocscan-dataset";
    doc["version"] = 1;
    doc["delta"] = delta_;
    doc["channels"] = cols();
    doc["sigma_fraction"] = sigma_fraction_;
    doc["samples"] = nlohmann::json::array();
    for (const auto& s : samples_) doc["samples"].push_back(s->sample_id());
    auto& pts = doc["points"] = nlohmann::json::array();
    for (const auto& r : recipes_)
        pts.push_back({r.sample, r.label, r.anchor_row, r.shift, r.variant, r.r, r.start_rt, r.end_rt});
    out << doc.dump() << '\n';
}

IndexedDataset IndexedDataset::load(std::istream& in, const SampleResolver& resolve) {
    try {
        const auto doc = nlohmann::json::parse(in);
        if (doc.at("format").get<std::string>() != "vocscan-dataset") throw ParseError("not a dataset file");
        if (doc.at("version").get<int>() != 1) throw ParseError("unsupported dataset version");
        std::vector<std::shared_ptr<const AbundanceMatrix>> samples;
        for (const auto& id : doc.at("samples")) samples.push_back(resolve(id.get<std::string>()));
        IndexedDataset ds(std::move(samples), doc.at("delta").get<std::size_t>(),
                          doc.at("sigma_fraction").get<double>());
        if (ds.cols() != 0 && ds.cols() != doc.at("channels").get<std::size_t>())
            throw ValidationError("dataset channel count does not match its samples");
        for (const auto& p : doc.at("points")) {
            PointRecipe r;
            r.sample = p.at(0).get<std::uint32_t>();
            r.label = p.at(1).get<VocLabel>();
            r.anchor_row = p.at(2).get<std::size_t>();
            r.shift = p.at(3).get<int>();
            r.variant = p.at(4).get<int>();
            r.r = p.at(5).get<double>();
            r.start_rt = p.at(6).get<double>();
            r.end_rt = p.at(7).get<double>();
            ds.add(r);
        }
        return ds;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("dataset: ") + e.what());
    }
}

namespace {

std::vector<std::shared_ptr<const AbundanceMatrix>> matrices_of(std::span<const AnnotatedSample> samples) {
    std::vector<std::shared_ptr<const AbundanceMatrix>> out;
    for (const auto& s : samples) out.push_back(s.matrix);
    return out;
}

void add_negatives(IndexedDataset& ds, std::span<const AnnotatedSample> samples, std::size_t total,
                   std::size_t delta, std::uint64_t seed, std::string_view tag) {
    if (samples.empty() || total == 0) return;
    const std::size_t n = samples.size();
    for (std::size_t s = 0; s < n; ++s) {
        const std::size_t quota = total / n + (s < total % n ? 1 : 0);
        if (quota == 0) continue;
        Rng rng(derive_seed(seed, tag, s));
        for (std::size_t start : negative_starts(*samples[s].matrix, samples[s].annotations, quota, delta, rng))
            ds.add({static_cast<std::uint32_t>(s), kNegativeLabel, start, 0, 0, 0.0, 0.0, 0.0});
    }
}

}  // namespace

IndexedDataset extract_dataset(std::span<const AnnotatedSample> samples, std::size_t delta,
                               double negative_ratio, double sigma_fraction, std::uint64_t seed) {
    IndexedDataset ds(matrices_of(samples), delta, sigma_fraction);
    std::size_t positives = 0;
    for (std::size_t s = 0; s < samples.size(); ++s) {
        const auto& a = *samples[s].matrix;
        for (const auto& ann : samples[s].annotations) {
            try {
                const DataPoint probe = extract_datapoint(a, ann, delta);
                ds.add({static_cast<std::uint32_t>(s), ann.label, probe.provenance.anchor_row, 0, 0, 0.0,
                        ann.start_rt, ann.end_rt});
                ++positives;
            } catch (const ExtractionError& e) {
                warn(std::string("skipping annotation: ") + e.what());
            }
        }
    }
    const auto total = static_cast<std::size_t>(std::llround(negative_ratio * static_cast<double>(positives)));
    add_negatives(ds, samples, total, delta, seed, "negatives");
    return ds;
}

IndexedDataset augment_dataset(const IndexedDataset& originals, std::span<const AnnotatedSample> samples,
                               const AugmentationParams& params, double negative_ratio, std::uint64_t seed) {
    if (originals.samples().size() != samples.size())
        throw ContractError("augment_dataset: sample list does not match the dataset");
    IndexedDataset ds(originals.samples(), originals.rows(), params.sigma_fraction);
    std::size_t positives = 0;
    std::uint64_t ordinal = 0;
    for (const auto& r : originals.recipes()) {
        if (r.label == kNegativeLabel) continue;
        Rng rng(derive_seed(seed, "augment", ordinal++));
        const auto& a = *samples[r.sample].matrix;
        try {
            for (const auto& p : plan_augmentation(a, r.sample, recipe_annotation(r), originals.rows(), params, rng)) {
                ds.add(p);
                ++positives;
            }
        } catch (const ExtractionError& e) {
            warn(std::string("skipping augmentation: ") + e.what());
        }
    }
    const auto total = static_cast<std::size_t>(std::llround(negative_ratio * static_cast<double>(positives)));
    add_negatives(ds, samples, total, originals.rows(), seed, "augment-negatives");
    return ds;
}

std::vector<Fold> split_by_participant(std::span<const SampleEntry> samples, std::size_t folds,
                                       std::uint64_t seed) {
    if (folds < 2) throw SplitError("need at least 2 folds");
    std::vector<std::string> participants;
    for (const auto& s : samples)
        if (std::find(participants.begin(), participants.end(), s.participant_id) == participants.end())
            participants.push_back(s.participant_id);
    if (participants.size() < folds)
        throw SplitError(std::to_string(participants.size()) + " participants cannot fill " +
                         std::to_string(folds) + " folds");
    Rng rng(derive_seed(seed, "folds"));
    std::shuffle(participants.begin(), participants.end(), rng);
    std::unordered_map<std::string, std::size_t> fold_of;
    for (std::size_t i = 0; i < participants.size(); ++i) fold_of[participants[i]] = i % folds;

    std::vector<Fold> out(folds);
    for (std::size_t f = 0; f < folds; ++f) {
        for (const auto& p : participants)
            (fold_of[p] == f ? out[f].validation_participants : out[f].train_participants).push_back(p);
        for (const auto& s : samples)
            (fold_of[s.participant_id] == f ? out[f].validation_samples : out[f].train_samples)
                .push_back(s.sample_id);
    }
    return out;
}

}  // namespace vocscan
