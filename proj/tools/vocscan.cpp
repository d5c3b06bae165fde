// vocscan: synthetic study generation, dataset building, training, scanning,
// detection and evaluation from the command line.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vocscan/convnet.hpp"
#include "vocscan/errors.hpp"
#include "vocscan/ingest.hpp"
#include "vocscan/pipeline.hpp"

namespace fs = std::filesystem;
using namespace vocscan;

namespace {

struct Globals {
    std::string out_dir;
    std::size_t workers = 1;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
};

Globals g;

fs::path output_dir() {
    fs::path dir = g.out_dir;
    if (dir.empty()) {
        const char* env = std::getenv("VOCSCAN_OUTPUT_DIR");
        dir = env && *env ? fs::path(env) : fs::path(".");
    }
    fs::create_directories(dir);
    return dir;
}

std::string fixed(double v, int decimals) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(decimals);
    os << v;
    return os.str();
}

void note(const std::string& msg) {
    if (!g.quiet) std::cerr << msg << '\n';
}

std::ofstream open_out(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write " + p.string());
    return out;
}

Manifest read_manifest(const std::string& path) {
    auto m = load_manifest(path);
    if (g.seed) m.params.seed = *g.seed;
    return m;
}

/// Sample selection shared by scan, detect and eval.
struct Selection {
    std::string split = "test";
    std::vector<std::string> ids;

    void bind(CLI::App* cmd) {
        cmd->add_option("--split", split, "train, test or all")
            ->check(CLI::IsMember({"train", "test", "all"}))
            ->capture_default_str();
        cmd->add_option("--sample", ids, "restrict to these sample ids");
    }

    [[nodiscard]] std::vector<AnnotatedSample> load(const Manifest& m) const {
        std::vector<AnnotatedSample> out;
        auto take = [&](Split s) {
            for (auto& a : load_split(m, s)) {
                if (ids.empty() || std::find(ids.begin(), ids.end(), a.matrix->sample_id()) != ids.end())
                    out.push_back(std::move(a));
            }
        };
        if (split != "test") take(Split::train);
        if (split != "train") take(Split::test);
        for (const auto& id : ids) {
            if (std::none_of(out.begin(), out.end(), [&](const auto& a) { return a.matrix->sample_id() == id; }))
                throw ValidationError("sample " + id + " is not in split " + split);
        }
        if (out.empty()) throw ValidationError("no samples selected");
        return out;
    }
};

std::shared_ptr<const AbundanceMatrix> resolver_sample(const Manifest& m, const std::string& id) {
    const auto& e = m.sample(id);
    return std::make_shared<const AbundanceMatrix>(load_sample(m.resolve(e.matrix_path), e.sample_id, e.column_epoch));
}

// ---- gen -------------------------------------------------------------------

struct GenOptions {
    StudyConfig study;
};

void run_gen(const GenOptions& o) {
    StudyConfig cfg = o.study;
    if (g.seed) cfg.seed = *g.seed;
    const auto dir = output_dir();
    const auto study = make_study(cfg);
    write_study(study, dir);
    note("wrote " + std::to_string(study.train.size() + study.test.size()) + " samples and " +
         (dir / "manifest.json").string());
}

// ---- extract / augment -----------------------------------------------------

struct DatasetOptions {
    std::string manifest;
    std::string output = "dataset.json";
};

void run_dataset(const DatasetOptions& o, bool augment) {
    const auto m = read_manifest(o.manifest);
    const auto train = load_split(m, Split::train);
    const auto ds = build_training_set(train, m.params, augment);
    auto out = open_out(output_dir() / o.output);
    ds.save(out);
    std::ostringstream msg;
    msg << ds.size() << " points";
    for (const auto& [label, n] : ds.class_counts()) msg << "  [" << label << "] " << n;
    note(msg.str());
}

// ---- train -----------------------------------------------------------------

struct TrainOptions {
    std::string manifest;
    std::string dataset;
    std::string kind = "convnet";
    std::string output = "model.json";
    bool no_augment = false;
    ConvNetConfig net;
};

void run_train(TrainOptions o) {
    const auto m = read_manifest(o.manifest);
    IndexedDataset ds;
    if (!o.dataset.empty()) {
        std::ifstream in(o.dataset);
        if (!in) throw Error("cannot read " + o.dataset);
        ds = IndexedDataset::load(in, [&](const std::string& id) { return resolver_sample(m, id); });
    } else {
        ds = build_training_set(load_split(m, Split::train), m.params, !o.no_augment);
    }
    note("training on " + std::to_string(ds.size()) + " points");
    const std::size_t classes = m.num_vocs() + 1;
    std::unique_ptr<Classifier> model;
    if (o.kind == "centroid") {
        model = train_centroid(ds, classes);
    } else {
        o.net.seed = derive_seed(m.params.seed, "train");
        o.net.workers = g.workers;
        o.net.num_classes = classes;
        TrainingReport rep;
        model = train_convnet(ds, o.net, &rep);
        for (std::size_t e = 0; e < rep.epoch_loss.size(); ++e)
            note("epoch " + std::to_string(e + 1) + " loss " + fixed(rep.epoch_loss[e], 4));
        note("training accuracy " + fixed(rep.final_accuracy, 4) + " in " + fixed(rep.seconds, 1) + " s");
    }
    save_model(*model, output_dir() / o.output);
}

// ---- scan / detect ---------------------------------------------------------

struct DetectOptions {
    std::string manifest;
    std::string model;
    Selection selection;
    bool chromatogram = false;
    bool scan_dump = false;
};

void write_timing(const fs::path& path, const std::vector<std::pair<std::string, std::pair<std::size_t, double>>>& rows) {
    auto out = open_out(path);
    out << "sample_id,windows,seconds\n";
    for (const auto& [id, t] : rows) out << id << ',' << t.first << ',' << fixed(t.second, 3) << '\n';
}

void run_scan(const DetectOptions& o) {
    const auto m = read_manifest(o.manifest);
    const auto model = load_model(fs::path(o.model));
    const auto dir = output_dir();
    std::vector<std::pair<std::string, std::pair<std::size_t, double>>> timing;
    for (const auto& s : o.selection.load(m)) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto result = scan(*s.matrix, *model, m.params.delta, g.workers);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        auto out = open_out(dir / "scans" / (result.sample_id + ".csv"));
        emit_scan(out, result);
        timing.push_back({result.sample_id, {result.size(), secs}});
        note(result.sample_id + ": " + std::to_string(result.size()) + " windows in " + fixed(secs, 2) + " s");
    }
    write_timing(dir / "scans" / "timing.csv", timing);
}

void run_detect(const DetectOptions& o) {
    const auto m = read_manifest(o.manifest);
    const auto model = load_model(fs::path(o.model));
    const auto dir = output_dir();
    std::vector<std::pair<std::string, std::pair<std::size_t, double>>> timing;
    for (const auto& s : o.selection.load(m)) {
        const auto r = detect(*s.matrix, *model, m.params.delta, m.params.gamma, g.workers);
        const auto& id = s.matrix->sample_id();
        {
            auto out = open_out(dir / "detections" / (id + ".csv"));
            emit_detections(out, r.stages.final, DetectionFormat::csv);
        }
        {
            auto out = open_out(dir / "detections" / (id + ".all.csv"));
            emit_detections(out, r.stages.all, DetectionFormat::csv);
        }
        if (o.scan_dump) {
            auto out = open_out(dir / "scans" / (id + ".csv"));
            emit_scan(out, r.scan);
        }
        if (o.chromatogram) {
            auto out = open_out(dir / "chromatograms" / (id + ".csv"));
            emit_chromatogram(out, *s.matrix, r.stages.final);
        }
        timing.push_back({id, {r.scan.size(), r.scan_seconds}});
        note(id + ": " + std::to_string(r.stages.final.size()) + " detections (" +
             std::to_string(r.stages.all.size()) + " before order/uniqueness), scan " + fixed(r.scan_seconds, 2) +
             " s");
    }
    write_timing(dir / "detections" / "timing.csv", timing);
}

// ---- eval / report ---------------------------------------------------------

struct EvalOptions {
    std::string manifest;
    std::string detections;
    Selection selection;
    std::string model_name;
    bool pr_dump = false;
};

void write_pr_curves(const fs::path& path, const EvaluationReport& r) {
    auto out = open_out(path);
    out << "label,recall,precision\n";
    for (const auto& [label, curve] : r.pr_curves)
        for (const auto& p : curve) out << label << ',' << format_real(p.recall) << ',' << format_real(p.precision) << '\n';
}

void run_eval(const EvalOptions& o) {
    const auto m = read_manifest(o.manifest);
    const fs::path det_dir = o.detections.empty() ? output_dir() / "detections" : fs::path(o.detections);
    std::vector<SampleTruth> training;
    for (const auto* e : m.samples_in(Split::train)) {
        SampleTruth t{e->sample_id, e->column_epoch, {}};
        if (e->annotation_path)
            for (auto& a : load_annotations(m.resolve(*e->annotation_path)))
                if (a.sample_id == e->sample_id) t.annotations.push_back(std::move(a));
        training.push_back(std::move(t));
    }
    std::vector<SampleOutcome> outcomes;
    for (const auto& s : o.selection.load(m)) {
        const auto& id = s.matrix->sample_id();
        SampleOutcome so;
        so.truth = truth_of(s);
        so.final = load_detections(det_dir / (id + ".csv"));
        so.pre_filter = load_detections(det_dir / (id + ".all.csv"));
        so.rt_span = s.matrix->rt_span();
        outcomes.push_back(std::move(so));
    }
    auto report = evaluate(outcomes, build_rt_ranges(training), m.num_vocs());
    report.model = o.model_name;
    const auto dir = output_dir();
    {
        auto out = open_out(dir / "report.json");
        write_report_json(out, report);
    }
    {
        auto out = open_out(dir / "report.txt");
        write_report_table(out, report);
    }
    if (o.pr_dump) write_pr_curves(dir / "pr_curves.csv", report);
    if (!g.quiet) write_report_table(std::cout, report);
}

struct ReportOptions {
    std::vector<std::string> reports;
};

void run_report(const ReportOptions& o) {
    std::ostringstream all;
    for (const auto& path : o.reports) {
        std::ifstream in(path);
        if (!in) throw Error("cannot read " + path);
        const auto r = read_report_json(in);
        write_report_table(all, r);
        all << '\n';
    }
    auto out = open_out(output_dir() / "summary.txt");
    out << all.str();
    std::cout << all.str();
}

const char* kind_of(const std::exception& e) {
    if (dynamic_cast<const ParseError*>(&e)) return "parse";
    if (dynamic_cast<const ValidationError*>(&e)) return "validation";
    if (dynamic_cast<const ConfigError*>(&e)) return "config";
    if (dynamic_cast<const ContractError*>(&e)) return "contract";
    if (dynamic_cast<const BoundsError*>(&e)) return "bounds";
    if (dynamic_cast<const SamplingError*>(&e)) return "sampling";
    if (dynamic_cast<const TrainingError*>(&e)) return "training";
    if (dynamic_cast<const SplitError*>(&e)) return "split";
    if (dynamic_cast<const Error*>(&e)) return "io";
    return "internal";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Target VOC detection in raw GC-MS abundance matrices"};
    app.require_subcommand(1);
    app.add_option("-o,--out", g.out_dir, "output directory (default $VOCSCAN_OUTPUT_DIR or .)");
    app.add_option("-j,--workers", g.workers, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--seed", g.seed, "override the run seed");
    app.add_flag("-q,--quiet", g.quiet, "no progress output");

    GenOptions gen;
    auto* c_gen = app.add_subcommand("gen", "generate a synthetic study (samples, annotations, manifest)");
    c_gen->add_option("--vocs", gen.study.num_vocs, "target compounds")->capture_default_str();
    c_gen->add_option("--train", gen.study.train_samples, "training samples")->capture_default_str();
    c_gen->add_option("--test", gen.study.test_samples, "test samples")->capture_default_str();
    c_gen->add_option("--rows", gen.study.synth.rows, "scans per sample")->capture_default_str();
    c_gen->add_option("--channels", gen.study.synth.channels, "m/z channels")->capture_default_str();
    c_gen->add_option("--presence", gen.study.presence_probability, "per-compound presence probability")
        ->capture_default_str();
    c_gen->add_option("--background", gen.study.background_compounds, "unannotated compounds per sample")
        ->capture_default_str();
    c_gen->add_option("--noise", gen.study.synth.noise_sigma, "noise standard deviation")->capture_default_str();

    DatasetOptions extract_opts, augment_opts;
    augment_opts.output = "augmented.json";
    auto* c_extract = app.add_subcommand("extract", "centred originals plus negatives of the training split");
    auto* c_augment = app.add_subcommand("augment", "extract, then shift and intensity augmentation");
    for (auto [cmd, opts] : {std::pair{c_extract, &extract_opts}, std::pair{c_augment, &augment_opts}}) {
        cmd->add_option("-m,--manifest", opts->manifest, "manifest file")->required()->check(CLI::ExistingFile);
        cmd->add_option("--output", opts->output, "dataset cache file name")->capture_default_str();
    }

    TrainOptions train;
    auto* c_train = app.add_subcommand("train", "train a window classifier");
    c_train->add_option("-m,--manifest", train.manifest, "manifest file")->required()->check(CLI::ExistingFile);
    c_train->add_option("--dataset", train.dataset, "dataset cache from extract/augment")->check(CLI::ExistingFile);
    c_train->add_option("--kind", train.kind, "convnet or centroid")
        ->check(CLI::IsMember({"convnet", "centroid"}))
        ->capture_default_str();
    c_train->add_flag("--no-augment", train.no_augment, "train on originals only (without --dataset)");
    c_train->add_option("--epochs", train.net.epochs)->capture_default_str();
    c_train->add_option("--lr", train.net.learning_rate)->capture_default_str();
    c_train->add_option("--momentum", train.net.momentum)->capture_default_str();
    c_train->add_option("--batch", train.net.batch_size)->capture_default_str();
    c_train->add_option("--output", train.output, "model file name")->capture_default_str();

    DetectOptions scan_opts, detect_opts;
    auto* c_scan = app.add_subcommand("scan", "classify every window; writes scans/<id>.csv");
    auto* c_detect = app.add_subcommand("detect", "scan and apply the rules; writes detections/<id>.csv");
    for (auto [cmd, opts] : {std::pair{c_scan, &scan_opts}, std::pair{c_detect, &detect_opts}}) {
        cmd->add_option("-m,--manifest", opts->manifest, "manifest file")->required()->check(CLI::ExistingFile);
        cmd->add_option("--model", opts->model, "model file")->required()->check(CLI::ExistingFile);
        opts->selection.bind(cmd);
    }
    c_detect->add_flag("--chromatogram", detect_opts.chromatogram, "also write chromatograms/<id>.csv");
    c_detect->add_flag("--scan-dump", detect_opts.scan_dump, "also write scans/<id>.csv");

    EvalOptions eval;
    auto* c_eval = app.add_subcommand("eval", "evaluate detections against the annotations");
    c_eval->add_option("-m,--manifest", eval.manifest, "manifest file")->required()->check(CLI::ExistingFile);
    c_eval->add_option("--detections", eval.detections, "detection directory (default <out>/detections)");
    c_eval->add_option("--name", eval.model_name, "model name in the report");
    c_eval->add_flag("--pr-curves", eval.pr_dump, "also write pr_curves.csv");
    eval.selection.bind(c_eval);

    ReportOptions report;
    auto* c_report = app.add_subcommand("report", "summary tables of one or more report.json files");
    c_report->add_option("reports", report.reports, "report files")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*c_gen) run_gen(gen);
        else if (*c_extract) run_dataset(extract_opts, false);
        else if (*c_augment) run_dataset(augment_opts, true);
        else if (*c_train) run_train(train);
        else if (*c_scan) run_scan(scan_opts);
        else if (*c_detect) run_detect(detect_opts);
        else if (*c_eval) run_eval(eval);
        else if (*c_report) run_report(report);
    } catch (const std::exception& e) {
        std::cerr << "vocscan: error [" << kind_of(e) << "]";
        if (const auto* p = dynamic_cast<const ParseError*>(&e); p && p->line())
            std::cerr << " line " << p->line();
        if (const auto* v = dynamic_cast<const ValidationError*>(&e); v && v->line())
            std::cerr << " line " << v->line();
        std::cerr << ": " << e.what() << '\n';
        return dynamic_cast<const Error*>(&e) ? 3 : 4;
    }
    return 0;
}
