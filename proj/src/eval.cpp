#include "vocscan/eval.hpp"

#include <algorithm>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "vocscan/errors.hpp"

namespace vocscan {

void RtRangeTable::add(VocLabel label, int epoch, double peak_rt) {
    auto [it, inserted] = entries_.try_emplace({label, epoch}, Interval{peak_rt, peak_rt});
    if (!inserted) {
        it->second.lo = std::min(it->second.lo, peak_rt);
        it->second.hi = std::max(it->second.hi, peak_rt);
    }
}

std::optional<Interval> RtRangeTable::range(VocLabel label, int epoch) const {
    auto it = entries_.find({label, epoch});
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

double RtRangeTable::max_length() const noexcept {
    double m = 0.0;
    for (const auto& [key, iv] : entries_) m = std::max(m, iv.length());
    return m;
}

RtRangeTable build_rt_ranges(std::span<const SampleTruth> training) {
    RtRangeTable t;
    for (const auto& s : training)
        for (const auto& a : s.annotations) t.add(a.label, s.column_epoch, a.peak_rt);
    return t;
}

bool matches(const Detection& d, const GroundTruthAnnotation& ann, RtMatch rule) {
    if (d.label != ann.label) return false;
    return rule == RtMatch::overlap ? d.interval().intersects(ann.interval()) : d.interval().contains(ann.peak_rt);
}

Protocol1Result match_protocol1(std::span<const Detection> detections, std::span<const GroundTruthAnnotation> truth,
                                RtMatch rule) {
    std::set<VocLabel> seen;
    for (const auto& d : detections)
        if (!seen.insert(d.label).second)
            throw ContractError("more than one detection of label " + std::to_string(d.label) + " in a sample");
    seen.clear();
    for (const auto& a : truth)
        if (!seen.insert(a.label).second)
            throw ContractError("more than one annotation of label " + std::to_string(a.label) + " in sample " +
                                a.sample_id);

    Protocol1Result r;
    std::set<VocLabel> matched;
    for (const auto& d : detections) {
        auto it = std::find_if(truth.begin(), truth.end(), [&](const auto& a) { return matches(d, a, rule); });
        if (it != truth.end()) {
            r.tp.push_back(d);
            matched.insert(d.label);
        } else {
            r.fp.push_back(d);
        }
    }
    for (const auto& a : truth)
        if (!matched.count(a.label)) r.fn.push_back(a);
    return r;
}

TentativeResult tentative_analysis(std::span<const Detection> pre_filter, std::span<const GroundTruthAnnotation> truth,
                                   std::span<const GroundTruthAnnotation> false_negatives, const RtRangeTable& ranges,
                                   int column_epoch, RtMatch rule) {
    TentativeResult r;
    for (const auto& d : pre_filter) {
        const bool hit = std::any_of(truth.begin(), truth.end(), [&](const auto& a) { return matches(d, a, rule); });
        if (hit) continue;
        const auto range = ranges.range(d.label, column_epoch);
        if (!range) {
            warn("no RT range for label " + std::to_string(d.label) + " (column epoch " +
                 std::to_string(column_epoch) + "); detection in " + d.sample_id + " counted as certain FP");
            r.certain_fp.push_back(d);
            r.unverifiable.push_back(d);
        } else if (d.interval().intersects(*range)) {
            r.ttp.push_back(d);
        } else {
            r.certain_fp.push_back(d);
        }
    }
    for (const auto& a : false_negatives) {
        const bool tentative =
            std::any_of(r.ttp.begin(), r.ttp.end(), [&](const Detection& d) { return d.label == a.label; });
        (tentative ? r.ttn : r.semi_fn).push_back(a);
    }
    return r;
}

double p_max(double max_range_length, double max_detection_length, double total_span) {
    if (!(total_span > max_detection_length))
        throw ContractError("P_max needs the RT span (" + std::to_string(total_span) +
                            ") to exceed the longest detection interval (" + std::to_string(max_detection_length) + ")");
    return (max_range_length + max_detection_length) / (total_span - max_detection_length);
}

double p_max(const RtRangeTable& ranges, std::span<const Detection> pre_filter, double total_span) {
    double longest = 0.0;
    for (const auto& d : pre_filter) longest = std::max(longest, d.interval().length());
    return p_max(ranges.max_length(), longest, total_span);
}

std::optional<double> average_precision(std::span<const RankedOutcome> outcomes, std::size_t gt_count,
                                        std::vector<PrPoint>* curve) {
    if (curve) curve->clear();
    if (gt_count == 0) {
        warn("average precision undefined without ground truth");
        return std::nullopt;
    }
    std::vector<RankedOutcome> sorted(outcomes.begin(), outcomes.end());
    std::stable_sort(sorted.begin(), sorted.end(), [](const RankedOutcome& a, const RankedOutcome& b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        if (a.sample_id != b.sample_id) return a.sample_id < b.sample_id;
        return a.start_rt < b.start_rt;
    });
    const double gt = static_cast<double>(gt_count);
    double ap = 0.0;
    std::size_t tp = 0;
    for (std::size_t n = 0; n < sorted.size(); ++n) {
        const double prev_recall = static_cast<double>(tp) / gt;
        if (sorted[n].true_positive) ++tp;
        const double recall = static_cast<double>(tp) / gt;
        const double precision = static_cast<double>(tp) / static_cast<double>(n + 1);
        ap += (recall - prev_recall) * precision;
        if (curve) curve->push_back({recall, precision});
    }
    return ap;
}

Protocol1Tallies& Protocol1Tallies::operator+=(const Protocol1Tallies& o) {
    tp += o.tp;
    ttp += o.ttp;
    fp += o.fp;
    ttn += o.ttn;
    fn += o.fn;
    return *this;
}

Protocol2Tallies& Protocol2Tallies::operator+=(const Protocol2Tallies& o) {
    tn += o.tn;
    fp_star += o.fp_star;
    ttp_star += o.ttp_star;
    tp += o.tp;
    fn += o.fn;
    return *this;
}

Protocol2Tallies presence_protocol2(std::span<const Detection> detections,
                                    std::span<const GroundTruthAnnotation> truth, const RtRangeTable& ranges,
                                    int column_epoch, std::size_t num_vocs) {
    Protocol2Tallies t;
    for (VocLabel j = 1; j <= static_cast<VocLabel>(num_vocs); ++j) {
        const bool expert = std::any_of(truth.begin(), truth.end(), [&](const auto& a) { return a.label == j; });
        bool system = false;
        bool in_range = false;
        const auto range = ranges.range(j, column_epoch);
        for (const auto& d : detections) {
            if (d.label != j) continue;
            system = true;
            if (range && d.interval().intersects(*range)) in_range = true;
        }
        if (expert && system)
            ++t.tp;
        else if (expert)
            ++t.fn;
        else if (system)
            ++(in_range ? t.ttp_star : t.fp_star);
        else
            ++t.tn;
    }
    return t;
}

std::vector<Detection> intersect_models(std::span<const std::vector<Detection>> lists) {
    if (lists.size() < 2) throw ContractError("intersect_models needs at least two detection lists");
    std::vector<Detection> out;
    for (const auto& base : lists[0]) {
        Interval common = base.interval();
        double confidence = base.confidence;
        bool everywhere = true;
        for (std::size_t m = 1; m < lists.size() && everywhere; ++m) {
            auto it = std::find_if(lists[m].begin(), lists[m].end(), [&](const Detection& d) {
                return d.label == base.label && d.sample_id == base.sample_id && d.interval().intersects(common);
            });
            if (it == lists[m].end()) {
                everywhere = false;
                break;
            }
            common = {std::max(common.lo, it->start_rt), std::min(common.hi, it->end_rt)};
            confidence += it->confidence;
        }
        if (!everywhere) continue;
        Detection d = base;
        d.start_rt = common.lo;
        d.end_rt = common.hi;
        d.confidence = confidence / static_cast<double>(lists.size());
        out.push_back(std::move(d));
    }
    return out;
}

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

EvaluationReport summarize(const Protocol1Tallies& p1, const Protocol2Tallies& p2,
                           const std::map<VocLabel, std::optional<double>>& ap) {
    EvaluationReport r;
    r.protocol1 = p1;
    r.protocol2 = p2;
    r.ap = ap;
    r.expert_sensitivity = ratio(p1.tp, p1.tp + p1.fn + p1.ttn);
    r.corrected_sensitivity = ratio(p1.tp + p1.ttp, p1.tp + p1.ttp + p1.fn);
    r.expert_specificity = ratio(p2.tn, p2.tn + p2.fp_star + p2.ttp_star);
    r.corrected_specificity = ratio(p2.tn, p2.tn + p2.fp_star);
    double sum = 0.0;
    std::size_t defined = 0;
    for (const auto& [label, v] : ap)
        if (v) {
            sum += *v;
            ++defined;
        }
    if (defined) r.mean_ap = sum / static_cast<double>(defined);
    return r;
}

EvaluationReport evaluate(std::span<const SampleOutcome> samples, const RtRangeTable& ranges, std::size_t num_vocs,
                          RtMatch rule) {
    Protocol1Tallies p1;
    Protocol2Tallies p2;
    std::vector<EvaluationReport::SampleRow> rows;
    std::map<VocLabel, std::vector<RankedOutcome>> ranked;
    std::map<VocLabel, std::size_t> gt_count;
    std::vector<Detection> all_pre;
    double shortest_span = std::numeric_limits<double>::infinity();

    for (const auto& s : samples) {
        const auto& truth = s.truth.annotations;
        const auto m = match_protocol1(s.final, truth, rule);
        const auto t = tentative_analysis(s.pre_filter, truth, m.fn, ranges, s.truth.column_epoch, rule);
        EvaluationReport::SampleRow row;
        row.sample_id = s.truth.sample_id;
        row.protocol1 = {m.tp.size(), t.ttp.size(), t.certain_fp.size(), t.ttn.size(), t.semi_fn.size()};
        row.protocol2 = presence_protocol2(s.final, truth, ranges, s.truth.column_epoch, num_vocs);
        p1 += row.protocol1;
        p2 += row.protocol2;
        rows.push_back(std::move(row));

        for (const auto& d : m.tp) ranked[d.label].push_back({d.confidence, d.sample_id, d.start_rt, true});
        for (const auto& d : m.fp) ranked[d.label].push_back({d.confidence, d.sample_id, d.start_rt, false});
        for (const auto& a : truth) ++gt_count[a.label];
        all_pre.insert(all_pre.end(), s.pre_filter.begin(), s.pre_filter.end());
        shortest_span = std::min(shortest_span, s.rt_span);
    }

    std::map<VocLabel, std::optional<double>> ap;
    std::map<VocLabel, std::vector<PrPoint>> curves;
    for (VocLabel j = 1; j <= static_cast<VocLabel>(num_vocs); ++j) {
        if (!gt_count.count(j) && !ranked.count(j)) continue;
        std::vector<PrPoint> curve;
        ap[j] = average_precision(ranked[j], gt_count[j], &curve);
        curves[j] = std::move(curve);
    }

    auto report = summarize(p1, p2, ap);
    report.samples = std::move(rows);
    report.pr_curves = std::move(curves);
    if (!samples.empty()) {
        try {
            report.p_max = p_max(ranges, all_pre, shortest_span);
        } catch (const ContractError& e) {
            warn(std::string("P_max undefined: ") + e.what());
        }
    }
    return report;
}

namespace {

using nlohmann::json;

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_from(const json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

json to_json(const Protocol1Tallies& t) {
    return {{"tp", t.tp}, {"ttp", t.ttp}, {"fp", t.fp}, {"ttn", t.ttn}, {"fn", t.fn}};
}

json to_json(const Protocol2Tallies& t) {
    return {{"tn", t.tn}, {"fp_star", t.fp_star}, {"ttp_star", t.ttp_star}, {"tp", t.tp}, {"fn", t.fn}};
}

Protocol1Tallies p1_from(const json& j) {
    return {j.at("tp").get<std::size_t>(), j.at("ttp").get<std::size_t>(), j.at("fp").get<std::size_t>(),
            j.at("ttn").get<std::size_t>(), j.at("fn").get<std::size_t>()};
}

Protocol2Tallies p2_from(const json& j) {
    return {j.at("tn").get<std::size_t>(), j.at("fp_star").get<std::size_t>(), j.at("ttp_star").get<std::size_t>(),
            j.at("tp").get<std::size_t>(), j.at("fn").get<std::size_t>()};
}

}  // namespace

void write_report_json(std::ostream& out, const EvaluationReport& r) {
    json doc;
    doc["format"] = "vocscan-report";
    doc["version"] = 1;
    doc["model"] = r.model;
    doc["protocol1"] = to_json(r.protocol1);
    doc["protocol2"] = to_json(r.protocol2);
    json samples = json::array();
    for (const auto& s : r.samples)
        samples.push_back({{"sample_id", s.sample_id},
                           {"protocol1", to_json(s.protocol1)},
                           {"protocol2", to_json(s.protocol2)}});
    doc["samples"] = samples;
    json ap = json::array();
    for (const auto& [label, v] : r.ap) {
        json curve = json::array();
        if (auto it = r.pr_curves.find(label); it != r.pr_curves.end())
            for (const auto& p : it->second) curve.push_back({p.recall, p.precision});
        ap.push_back({{"label", label}, {"ap", opt(v)}, {"pr_curve", curve}});
    }
    doc["average_precision"] = ap;
    doc["mean_ap"] = opt(r.mean_ap);
    doc["expert_sensitivity"] = opt(r.expert_sensitivity);
    doc["corrected_sensitivity"] = opt(r.corrected_sensitivity);
    doc["expert_specificity"] = opt(r.expert_specificity);
    doc["corrected_specificity"] = opt(r.corrected_specificity);
    doc["p_max"] = opt(r.p_max);
    out << doc.dump(2) << '\n';
}

EvaluationReport read_report_json(std::istream& in) {
    try {
        const json doc = json::parse(in);
        if (doc.value("format", "") != "vocscan-report") throw ParseError("not a vocscan report");
        EvaluationReport r;
        r.model = doc.value("model", "");
        r.protocol1 = p1_from(doc.at("protocol1"));
        r.protocol2 = p2_from(doc.at("protocol2"));
        for (const auto& s : doc.at("samples"))
            r.samples.push_back({s.at("sample_id").get<std::string>(), p1_from(s.at("protocol1")),
                                 p2_from(s.at("protocol2"))});
        for (const auto& a : doc.at("average_precision")) {
            const auto label = a.at("label").get<VocLabel>();
            r.ap[label] = opt_from(a.at("ap"));
            auto& curve = r.pr_curves[label];
            for (const auto& p : a.at("pr_curve")) curve.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        }
        r.mean_ap = opt_from(doc.at("mean_ap"));
        r.expert_sensitivity = opt_from(doc.at("expert_sensitivity"));
        r.corrected_sensitivity = opt_from(doc.at("corrected_sensitivity"));
        r.expert_specificity = opt_from(doc.at("expert_specificity"));
        r.corrected_specificity = opt_from(doc.at("corrected_specificity"));
        r.p_max = opt_from(doc.at("p_max"));
        return r;
    } catch (const json::exception& e) {
        throw ParseError(std::string("report: ") + e.what());
    }
}

void write_report_table(std::ostream& out, const EvaluationReport& r) {
    auto show = [](const std::optional<double>& v) {
        if (!v) return std::string("undefined");
        std::ostringstream s;
        s << std::fixed << std::setprecision(4) << *v;
        return s.str();
    };
    if (!r.model.empty()) out << "model: " << r.model << '\n';
    out << "sample                 TP  TTP   FP  TTN   FN |   TN  FP*  TTP*\n";
    auto line = [&](const std::string& name, const Protocol1Tallies& a, const Protocol2Tallies& b) {
        out << std::left << std::setw(20) << name << std::right << std::setw(5) << a.tp << std::setw(5) << a.ttp
            << std::setw(5) << a.fp << std::setw(5) << a.ttn << std::setw(5) << a.fn << " |" << std::setw(5) << b.tn
            << std::setw(5) << b.fp_star << std::setw(6) << b.ttp_star << '\n';
    };
    for (const auto& s : r.samples) line(s.sample_id, s.protocol1, s.protocol2);
    line("total", r.protocol1, r.protocol2);
    out << "\nlabel  AP\n";
    for (const auto& [label, v] : r.ap) out << std::setw(5) << label << "  " << show(v) << '\n';
    out << "\nmAP                    " << show(r.mean_ap) << '\n'
        << "sensitivity expert     " << show(r.expert_sensitivity) << '\n'
        << "sensitivity corrected  " << show(r.corrected_sensitivity) << '\n'
        << "specificity expert     " << show(r.expert_specificity) << '\n'
        << "specificity corrected  " << show(r.corrected_specificity) << '\n'
        << "P_max                  " << show(r.p_max) << '\n';
}

}  // namespace vocscan
