#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "support.hpp"
#include "vocscan/eval.hpp"

using namespace vocscan;

namespace {

Detection det(VocLabel label, double s, double e, double t = 1.0, const std::string& id = "s") {
    return Detection{label, 0, 20, s, e, t, id};
}

GroundTruthAnnotation gt(VocLabel label, double s, double e, const std::string& id = "s") {
    return {id, label, s, 0.5 * (s + e), e};
}

double round4(double v) { return std::round(v * 1e4) / 1e4; }

}  // namespace

TEST_CASE("protocol 1 matching") {
    const std::vector<GroundTruthAnnotation> truth{gt(17, 9.58, 9.72)};
    auto r = match_protocol1(std::vector<Detection>{det(17, 9.588, 9.712)}, truth);
    CHECK(r.tp.size() == 1);
    CHECK(r.fp.empty());
    CHECK(r.fn.empty());

    r = match_protocol1(std::vector<Detection>{det(18, 9.588, 9.712)}, truth);
    CHECK(r.fp.size() == 1);
    CHECK(r.fn.size() == 1);

    r = match_protocol1(std::vector<Detection>{det(17, 9.0, 9.1)}, truth);
    CHECK(r.fp.size() == 1);
    CHECK(r.fn.size() == 1);

    // peak-inside rule is stricter than overlap
    const std::vector<Detection> edge{det(17, 9.70, 9.80)};
    CHECK(match_protocol1(edge, truth, RtMatch::overlap).tp.size() == 1);
    CHECK(match_protocol1(edge, truth, RtMatch::peak_inside).tp.empty());

    CHECK_THROWS_AS((void)match_protocol1(std::vector<Detection>{det(1, 1, 2), det(1, 3, 4)}, truth), ContractError);
    const std::vector<GroundTruthAnnotation> dup{gt(2, 1, 2), gt(2, 3, 4)};
    CHECK_THROWS_AS((void)match_protocol1(std::vector<Detection>{}, dup), ContractError);
}

TEST_CASE("tentative analysis") {
    RtRangeTable ranges;
    ranges.add(15, 1, 7.0);
    ranges.add(15, 1, 7.4);
    ranges.add(16, 1, 8.0);
    ranges.add(16, 1, 8.3);
    ranges.add(12, 1, 5.0);

    const std::vector<GroundTruthAnnotation> truth{gt(16, 9.0, 9.2), gt(12, 5.0, 5.1)};
    const std::vector<Detection> pre{
        det(15, 7.1, 7.2),   // not reported, inside its range -> TTP
        det(16, 8.1, 8.2),   // reported elsewhere, inside range -> TTP (and the FN becomes TTN)
        det(12, 5.02, 5.08), // matches ground truth -> ignored here
        det(12, 6.0, 6.1),   // outside range -> certain FP
        det(30, 3.0, 3.1),   // label without range -> certain FP, unverifiable
    };
    const auto p1 = match_protocol1(std::vector<Detection>{det(12, 5.02, 5.08)}, truth);
    REQUIRE(p1.fn.size() == 1);

    vocscan::testing::WarningCapture w;
    const auto t = tentative_analysis(pre, truth, p1.fn, ranges, 1);
    CHECK(t.ttp.size() == 2);
    CHECK(t.certain_fp.size() == 2);
    CHECK(t.unverifiable.size() == 1);
    CHECK(t.ttn.size() == 1);
    CHECK(t.ttn[0].label == 16);
    CHECK(t.semi_fn.empty());
    CHECK(w.messages.size() == 1);

    // wrong epoch: no range, so every unmatched detection is a certain FP
    const auto other = tentative_analysis(pre, truth, p1.fn, ranges, 2);
    CHECK(other.ttp.empty());
    CHECK(other.semi_fn.size() == 1);
}

TEST_CASE("P_max") {
    CHECK(p_max(0.5, 0.2, 60.0) == doctest::Approx(0.7 / 59.8).epsilon(1e-12));
    CHECK(p_max(0.5, 0.0, 60.0) == doctest::Approx(0.5 / 60.0).epsilon(1e-12));
    CHECK_THROWS_AS((void)p_max(0.5, 60.0, 60.0), ContractError);
    CHECK_THROWS_AS((void)p_max(0.5, 70.0, 60.0), ContractError);

    RtRangeTable ranges;
    ranges.add(1, 1, 2.0);
    ranges.add(1, 1, 2.5);
    ranges.add(2, 1, 4.0);
    const std::vector<Detection> pre{det(1, 2.0, 2.1), det(2, 4.0, 4.2)};
    CHECK(p_max(ranges, pre, 30.0) == doctest::Approx((0.5 + 0.2) / (30.0 - 0.2)).epsilon(1e-12));
}

TEST_CASE("average precision") {
    std::vector<RankedOutcome> o{{0.9, "a", 1.0, true}, {0.8, "a", 2.0, false}, {0.7, "b", 1.0, true}};
    std::vector<PrPoint> curve;
    const auto ap = average_precision(o, 2, &curve);
    REQUIRE(ap.has_value());
    CHECK(*ap == doctest::Approx(1.0 * 0.5 + (2.0 / 3.0) * 0.5));
    REQUIRE(curve.size() == 3);
    CHECK(curve[1].recall == 0.5);
    CHECK(curve[1].precision == 0.5);
    // input order does not matter
    std::reverse(o.begin(), o.end());
    CHECK(*average_precision(o, 2) == *ap);

    const std::vector<RankedOutcome> perfect{{0.9, "a", 1.0, true}, {0.5, "b", 1.0, true}};
    CHECK(*average_precision(perfect, 2) == 1.0);
    CHECK(*average_precision(std::vector<RankedOutcome>{}, 3) == 0.0);

    vocscan::testing::WarningCapture w;
    CHECK_FALSE(average_precision(perfect, 0).has_value());
    CHECK(w.messages.size() == 1);

    // ties: sample id then start_rt decide the order
    const std::vector<RankedOutcome> tied{{0.9, "b", 1.0, true}, {0.9, "a", 1.0, false}};
    CHECK(*average_precision(tied, 1) == doctest::Approx(0.5));
}

TEST_CASE("summary metrics on reference tallies") {
    Protocol1Tallies p1{816, 226, 2, 18, 11};
    auto r = summarize(p1, {}, {});
    CHECK(round4(*r.expert_sensitivity) == 0.9657);
    CHECK(round4(*r.corrected_sensitivity) == 0.9896);

    Protocol2Tallies p2{86, 1, 208, 0, 0};
    r = summarize({}, p2, {});
    CHECK(round4(*r.expert_specificity) == 0.2915);
    CHECK(round4(*r.corrected_specificity) == 0.9885);
    CHECK_FALSE(r.expert_sensitivity.has_value());

    r = summarize({}, {165, 0, 130, 0, 0}, {});
    CHECK(round4(*r.corrected_specificity) == 1.0);

    r = summarize({}, {}, {{1, 0.5}, {2, std::nullopt}, {3, 1.0}});
    CHECK(*r.mean_ap == doctest::Approx(0.75));
    CHECK_FALSE(summarize({}, {}, {{1, std::nullopt}}).mean_ap.has_value());
}

TEST_CASE("corrected sensitivity never falls below expert sensitivity") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::size_t> n(0, 50);
    for (int i = 0; i < 1000; ++i) {
        const Protocol1Tallies p{n(rng) + 1, n(rng), n(rng), n(rng), n(rng)};
        const auto r = summarize(p, {}, {});
        CHECK(*r.corrected_sensitivity >= *r.expert_sensitivity - 1e-15);
    }
}

TEST_CASE("presence-only protocol") {
    RtRangeTable ranges;
    ranges.add(6, 1, 3.0);
    ranges.add(6, 1, 3.2);
    ranges.add(2, 1, 1.0);
    const std::vector<GroundTruthAnnotation> truth{gt(1, 0.5, 0.6)};
    const std::vector<Detection> d{det(6, 3.1, 3.15), det(2, 7.0, 7.1), det(1, 4.0, 4.1)};
    const auto t = presence_protocol2(d, truth, ranges, 1, 8);
    CHECK(t.tp == 1);        // label 1, position ignored
    CHECK(t.ttp_star == 1);  // label 6 in range
    CHECK(t.fp_star == 1);   // label 2 out of range
    CHECK(t.tn == 5);
    CHECK(t.fn == 0);
}

TEST_CASE("model intersection") {
    const std::vector<Detection> a{det(1, 1.0, 1.2, 0.9), det(2, 2.0, 2.2, 0.8)};
    const std::vector<std::vector<Detection>> same{a, a};
    CHECK(intersect_models(same) == a);

    const std::vector<Detection> b{det(1, 1.1, 1.3, 0.7)};
    const std::vector<std::vector<Detection>> two{a, b};
    const auto c = intersect_models(two);
    REQUIRE(c.size() == 1);
    CHECK(c[0].label == 1);
    CHECK(c[0].start_rt == 1.1);
    CHECK(c[0].end_rt == 1.2);
    CHECK(c[0].confidence == doctest::Approx(0.8));

    const std::vector<std::vector<Detection>> apart{a, {det(1, 5.0, 5.1)}};
    CHECK(intersect_models(apart).empty());
    CHECK_THROWS_AS((void)intersect_models(std::vector<std::vector<Detection>>{a}), ContractError);
}

TEST_CASE("retention-time ranges are per label and column epoch") {
    std::vector<SampleTruth> train{{"a", 1, {gt(1, 1.0, 1.2, "a"), gt(2, 2.0, 2.2, "a")}},
                                   {"b", 1, {gt(1, 1.2, 1.6, "b")}},
                                   {"c", 2, {gt(1, 3.0, 3.2, "c")}}};
    const auto t = build_rt_ranges(train);
    CHECK(t.range(1, 1)->lo == doctest::Approx(1.1));
    CHECK(t.range(1, 1)->hi == doctest::Approx(1.4));
    CHECK(t.range(1, 2)->lo == doctest::Approx(3.1));
    CHECK_FALSE(t.range(3, 1).has_value());
    CHECK(t.max_length() == doctest::Approx(0.3));
}

TEST_CASE("evaluation accounting and report round-trip") {
    std::vector<SampleTruth> train{{"t1", 1, {gt(1, 1.0, 1.2, "t1"), gt(2, 2.0, 2.2, "t1"), gt(3, 4.0, 4.2, "t1")}},
                                   {"t2", 1, {gt(1, 1.4, 1.6, "t2"), gt(2, 2.2, 2.4, "t2")}}};
    const auto ranges = build_rt_ranges(train);

    SampleOutcome s;
    s.truth = {"x", 1, {gt(1, 1.2, 1.4, "x"), gt(2, 3.0, 3.2, "x"), gt(3, 4.0, 4.2, "x")}};
    s.pre_filter = {det(1, 1.25, 1.35, 0.9, "x"), det(2, 2.2, 2.3, 0.8, "x"), det(2, 6.0, 6.1, 0.4, "x"),
                    det(4, 5.0, 5.1, 0.3, "x")};
    s.final = {det(1, 1.25, 1.35, 0.9, "x"), det(2, 2.2, 2.3, 0.8, "x"), det(4, 5.0, 5.1, 0.3, "x")};
    s.rt_span = 20.0;

    vocscan::testing::WarningCapture w;
    const std::vector<SampleOutcome> outcomes{s};
    auto report = evaluate(outcomes, ranges, 4);
    const auto& p1 = report.protocol1;
    CHECK(p1.tp == 1);
    CHECK(p1.ttp == 1);  // label 2 at 2.2 inside [2.1, 2.3]
    CHECK(p1.fp == 2);   // label 2 at 6.0 and unranged label 4
    CHECK(p1.ttn == 1);  // label 2's expert position
    CHECK(p1.fn == 1);   // label 3 missed
    // every annotation is exactly one of TP / TTN / FN
    CHECK(p1.tp + p1.ttn + p1.fn == s.truth.annotations.size());
    CHECK(*report.expert_sensitivity == doctest::Approx(1.0 / 3.0));
    CHECK(*report.corrected_sensitivity == doctest::Approx(2.0 / 3.0));
    CHECK(report.ap.at(1).value() == 1.0);
    CHECK(report.ap.at(3).value() == 0.0);
    CHECK(report.p_max.has_value());

    report.model = "test";
    std::stringstream buf;
    write_report_json(buf, report);
    const auto back = read_report_json(buf);
    CHECK(back.model == "test");
    CHECK(back.protocol1.ttn == 1);
    CHECK(back.samples.size() == 1);
    CHECK(back.expert_sensitivity == report.expert_sensitivity);
    CHECK(back.ap.size() == report.ap.size());
    CHECK(back.pr_curves.at(2).size() == report.pr_curves.at(2).size());
    std::ostringstream table;
    write_report_table(table, back);
    CHECK(table.str().find("sensitivity expert") != std::string::npos);
}
