#include "vocscan/pipeline.hpp"

#include <cstdio>
#include <fstream>

#include "vocscan/errors.hpp"
#include "vocscan/ingest.hpp"
#include "vocscan/random.hpp"

namespace vocscan {

namespace fs = std::filesystem;

namespace {

std::string numbered(const char* prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%03zu", prefix, i + 1);
    return buf;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p);
    if (!out) throw Error("cannot write " + p.string());
    return out;
}

}  // namespace

Study make_study(const StudyConfig& cfg) {
    if (cfg.presence_probability < 0.0 || cfg.presence_probability > 1.0)
        throw ConfigError("presence probability must be in [0, 1]");
    Study study;
    study.templates = default_template_set(cfg.num_vocs, cfg.synth);
    auto& m = study.manifest;
    m.params.seed = cfg.seed;
    m.params.channels = cfg.synth.channels;
    m.params.delta = cfg.synth.window_rows;
    for (const auto& t : study.templates) m.voc_table.push_back({t.label, "voc" + std::to_string(t.label)});

    const std::size_t total = cfg.train_samples + cfg.test_samples;
    for (std::size_t i = 0; i < total; ++i) {
        Rng rng(derive_seed(cfg.seed, "presence", i));
        std::bernoulli_distribution present(cfg.presence_probability);
        std::vector<bool> presence(study.templates.size());
        for (std::size_t k = 0; k < presence.size(); ++k) presence[k] = present(rng);

        SynthConfig sc = cfg.synth;
        sc.background_compounds = cfg.background_compounds;
        sc.seed = derive_seed(cfg.seed, "sample", i);
        const auto id = numbered("S", i);
        auto s = synth_sample(study.templates, presence, sc, id);
        AnnotatedSample a{std::make_shared<const AbundanceMatrix>(std::move(s.matrix)), std::move(s.annotations)};
        const Split split = i < cfg.train_samples ? Split::train : Split::test;
        (split == Split::train ? study.train : study.test).push_back(std::move(a));
        m.samples.push_back({id, fs::path("samples") / (id + ".csv"), fs::path("annotations") / (id + ".csv"),
                             numbered("P", i), 1, split});
    }
    return study;
}

void write_study(const Study& study, const fs::path& dir) {
    fs::create_directories(dir / "samples");
    fs::create_directories(dir / "annotations");
    auto write_one = [&](const AnnotatedSample& s) {
        const auto& id = s.matrix->sample_id();
        {
            auto out = open_out(dir / "samples" / (id + ".csv"));
            emit_sample(out, *s.matrix);
        }
        auto out = open_out(dir / "annotations" / (id + ".csv"));
        emit_annotations(out, s.annotations);
    };
    for (const auto& s : study.train) write_one(s);
    for (const auto& s : study.test) write_one(s);
    {
        auto out = open_out(dir / "templates.json");
        save_templates(out, study.templates);
    }
    auto out = open_out(dir / "manifest.json");
    emit_manifest(out, study.manifest);
}

std::vector<AnnotatedSample> load_split(const Manifest& manifest, Split split) {
    std::vector<AnnotatedSample> out;
    for (const auto* e : manifest.samples_in(split)) {
        auto matrix = std::make_shared<const AbundanceMatrix>(
            load_sample(manifest.resolve(e->matrix_path), e->sample_id, e->column_epoch));
        if (matrix->channels() != manifest.params.channels)
            throw ValidationError("sample " + e->sample_id + " has " + std::to_string(matrix->channels()) +
                                  " channels, manifest expects " + std::to_string(manifest.params.channels));
        std::vector<GroundTruthAnnotation> anns;
        if (e->annotation_path) {
            for (auto& a : load_annotations(manifest.resolve(*e->annotation_path)))
                if (a.sample_id == e->sample_id) anns.push_back(std::move(a));
        }
        out.push_back({std::move(matrix), std::move(anns)});
    }
    return out;
}

SampleTruth truth_of(const AnnotatedSample& s) {
    return {s.matrix->sample_id(), s.matrix->column_epoch(), s.annotations};
}

std::vector<SampleTruth> truths_of(std::span<const AnnotatedSample> samples) {
    std::vector<SampleTruth> out;
    for (const auto& s : samples) out.push_back(truth_of(s));
    return out;
}

AugmentationParams augmentation_of(const RunParams& p) {
    AugmentationParams a;
    a.shift_min = p.shift_min;
    a.shift_max = p.shift_max;
    a.variants_per_shift = p.intensity_variants;
    a.r_max = p.r_max;
    a.sigma_fraction = p.intensity_sigma_fraction;
    return a;
}

IndexedDataset build_training_set(std::span<const AnnotatedSample> samples, const RunParams& params, bool augment) {
    auto originals = extract_dataset(samples, params.delta, params.negative_ratio, params.intensity_sigma_fraction,
                                     derive_seed(params.seed, "extract"));
    if (!augment) return originals;
    return augment_dataset(originals, samples, augmentation_of(params), params.negative_ratio,
                           derive_seed(params.seed, "augment"));
}

std::vector<DetectedSample> detect_samples(const Classifier& model, std::span<const AnnotatedSample> samples,
                                           std::size_t delta, std::size_t gamma, std::size_t workers) {
    std::vector<DetectedSample> out;
    for (const auto& s : samples) {
        DetectedSample d;
        d.result = detect(*s.matrix, model, delta, gamma, workers);
        d.outcome.truth = truth_of(s);
        d.outcome.pre_filter = d.result.stages.all;
        d.outcome.final = d.result.stages.final;
        d.outcome.rt_span = s.matrix->rt_span();
        out.push_back(std::move(d));
    }
    return out;
}

EvaluationReport evaluate_detections(std::span<const DetectedSample> detected, std::span<const SampleTruth> training,
                                     std::size_t num_vocs) {
    std::vector<SampleOutcome> outcomes;
    for (const auto& d : detected) outcomes.push_back(d.outcome);
    return evaluate(outcomes, build_rt_ranges(training), num_vocs);
}

}  // namespace vocscan
