#include "vocscan/detector.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <ostream>
#include <set>

#include "vocscan/errors.hpp"
#include "vocscan/ingest.hpp"

namespace vocscan {

double detection_confidence(std::span<const double> confidences, std::size_t gamma) {
    if (gamma == 0) throw ContractError("gamma must be >= 1");
    if (confidences.size() < gamma)
        throw ContractError("run of " + std::to_string(confidences.size()) + " windows is shorter than gamma " +
                            std::to_string(gamma));
    // Each slice is summed from scratch so the result does not drift with run length.
    double best = 0.0;
    for (std::size_t s = 0; s + gamma <= confidences.size(); ++s) {
        double sum = 0.0;
        for (std::size_t k = s; k < s + gamma; ++k) sum += confidences[k];
        best = std::max(best, sum / static_cast<double>(gamma));
    }
    return best;
}

std::vector<Detection> duration_rule(const ScanResult& scan, std::size_t gamma) {
    if (gamma == 0) throw ContractError("gamma must be >= 1");
    if (scan.confidences.size() != scan.size() || scan.window_rts.size() != scan.size())
        throw ContractError("scan sequences have different lengths");
    std::vector<Detection> out;
    std::size_t i = 0;
    while (i < scan.size()) {
        std::size_t j = i;
        while (j < scan.size() && scan.labels[j] == scan.labels[i]) ++j;
        const std::size_t len = j - i;
        if (scan.labels[i] > kNegativeLabel && len >= gamma) {
            Detection d;
            d.label = scan.labels[i];
            d.start_index = i;
            d.run_length = len;
            d.start_rt = scan.window_rts[i];
            d.end_rt = scan.window_rts[j - 1];
            d.confidence = detection_confidence(std::span(scan.confidences).subspan(i, len), gamma);
            d.sample_id = scan.sample_id;
            out.push_back(std::move(d));
        }
        i = j;
    }
    return out;
}

std::vector<Detection> order_rule(std::span<const Detection> detections) {
    std::vector<Detection> out;
    for (const auto& f : detections) {
        std::set<VocLabel> lower_after;
        std::set<VocLabel> higher_before;
        for (const auto& d : detections) {
            if (d.label < f.label && d.start_rt >= f.start_rt) lower_after.insert(d.label);
            if (d.label > f.label && d.start_rt <= f.start_rt) higher_before.insert(d.label);
        }
        if (lower_after.size() < 3 && higher_before.size() < 3) out.push_back(f);
    }
    return out;
}

std::vector<Detection> uniqueness_rule(std::span<const Detection> detections) {
    std::map<VocLabel, const Detection*> best;
    for (const auto& d : detections) {
        auto [it, inserted] = best.try_emplace(d.label, &d);
        if (inserted) continue;
        const Detection& b = *it->second;
        const bool better =
            d.confidence > b.confidence ||
            (d.confidence == b.confidence &&
             (d.start_rt < b.start_rt || (d.start_rt == b.start_rt && d.start_index < b.start_index)));
        if (better) it->second = &d;
    }
    std::vector<Detection> out;
    for (const auto& [label, d] : best) out.push_back(*d);
    std::stable_sort(out.begin(), out.end(), [](const Detection& x, const Detection& y) {
        return x.start_rt < y.start_rt || (x.start_rt == y.start_rt && x.label < y.label);
    });
    return out;
}

DetectionStages apply_rules(const ScanResult& scan, std::size_t gamma) {
    DetectionStages s;
    s.all = duration_rule(scan, gamma);
    s.ordered = order_rule(s.all);
    s.final = uniqueness_rule(s.ordered);
    return s;
}

DetectResult detect(const AbundanceMatrix& a, const Classifier& model, std::size_t delta, std::size_t gamma,
                    std::size_t workers) {
    DetectResult r;
    const auto t0 = std::chrono::steady_clock::now();
    r.scan = scan(a, model, delta, workers);
    r.scan_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.stages = apply_rules(r.scan, gamma);
    return r;
}

void emit_chromatogram(std::ostream& out, const AbundanceMatrix& a, std::span<const Detection> detections) {
    const auto tic = a.tic();
    out << "rt,tic,label\n";
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const double rt = a.axis()[r];
        VocLabel label = kNegativeLabel;
        for (const auto& d : detections)
            if (d.interval().contains(rt)) {
                label = d.label;
                break;
            }
        out << format_real(rt, 3) << ',' << format_real(tic[r], 1) << ',' << label << '\n';
    }
}

}  // namespace vocscan
