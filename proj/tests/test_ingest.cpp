#include <cmath>
#include <sstream>

#include "doctest.h"
#include "support.hpp"
#include "vocscan/ingest.hpp"

using namespace vocscan;

namespace {

std::size_t parse_error_line(const std::string& text) {
    std::istringstream in(text);
    try {
        (void)parse_sample(in, "s");
    } catch (const ParseError& e) {
        return e.line();
    }
    return 0;
}

}  // namespace

TEST_CASE("matrix CSV parses") {
    std::istringstream in("rt,mz_40,mz_41\n1.0,5,6\n1.5,7,8.25\n");
    const auto m = parse_sample(in, "s1", 2);
    CHECK(m.rows() == 2);
    CHECK(m.channels() == 2);
    CHECK(m.column_epoch() == 2);
    CHECK(m.at(1, 1) == 8.25);
    CHECK(m.axis()[1] == 1.5);
}

TEST_CASE("matrix CSV errors carry the offending line") {
    CHECK(parse_error_line("rt,mz_40,mz_41\n1.0,5,6\n1.5,7\n") == 3);           // ragged
    CHECK(parse_error_line("rt,mz_40,mz_41\n1.0,5,6\n1.5,7,x\n") == 3);         // malformed
    CHECK(parse_error_line("rt,mz_40,mz_41\n1.0,5,-6\n") == 2);                  // negative
    CHECK(parse_error_line("rt,mz_40,mz_41\n1.0,5,nan\n") == 2);                 // non-finite
    CHECK(parse_error_line("rt,mz_40,mz_41\n1.0,5,6\n1.0,5,6\n") == 3);         // non-increasing rt
    CHECK(parse_error_line("mz_40,mz_41\n1.0,5\n") == 1);                        // header
}

TEST_CASE("matrix emit then parse round-trips") {
    const auto m = vocscan::testing::random_matrix(50, 7, 11, 1.0, 0.16 / 60.0);
    std::stringstream buf;
    emit_sample(buf, m);
    const auto back = parse_sample(buf, "m");
    REQUIRE(back.rows() == m.rows());
    for (std::size_t i = 0; i < m.data().size(); ++i)
        CHECK(std::abs(back.data()[i] - m.data()[i]) <= 1e-9 * std::abs(m.data()[i]));
    for (std::size_t r = 0; r < m.rows(); ++r) CHECK(std::abs(back.axis()[r] - m.axis()[r]) <= 1e-9 * m.axis()[r]);
}

TEST_CASE("annotations parse, validate and round-trip") {
    std::istringstream good("sample_id,label,start_rt,peak_rt,end_rt\nS1,17,9.58,9.65,9.72\nS1,3,1.0,1.1,1.2\n");
    const auto anns = parse_annotations(good);
    REQUIRE(anns.size() == 2);
    CHECK(anns[0].label == 17);
    CHECK(anns[0].end_rt == 9.72);

    std::stringstream buf;
    emit_annotations(buf, anns);
    const auto back = parse_annotations(buf);
    REQUIRE(back.size() == 2);
    CHECK(back[1].peak_rt == anns[1].peak_rt);

    std::istringstream bad("sample_id,label,start_rt,peak_rt,end_rt\nS1,17,9.58,9.65,9.72\nS1,4,2.0,1.5,2.5\n");
    try {
        (void)parse_annotations(bad);
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(e.line() == 3);
    }
}

TEST_CASE("detection CSV record shape") {
    Detection d{17, 10, 25, 9.588, 9.712, 1.0, "Test-01"};
    std::ostringstream out;
    emit_detections(out, std::vector<Detection>{d}, DetectionFormat::csv);
    const auto text = out.str();
    CHECK(text.rfind("label,start_rt,end_rt,confidence,sample_id,start_index,run_length\n", 0) == 0);
    CHECK(text.find("\n17,9.588,9.712,1.0000,Test-01,10,25\n") != std::string::npos);
}

TEST_CASE("detections are emitted in start_rt order and round-trip") {
    std::vector<Detection> ds{{5, 300, 30, 11.364, 11.447, 0.99745, "s"}, {2, 10, 21, 9.588, 9.712, 1.0, "s"}};
    for (auto fmt : {DetectionFormat::csv, DetectionFormat::json}) {
        std::stringstream buf;
        emit_detections(buf, ds, fmt);
        const auto back = parse_detections(buf, fmt);
        REQUIRE(back.size() == 2);
        CHECK(back[0].label == 2);
        CHECK(back[1].label == 5);
        CHECK(back[1].confidence == 0.99745);
        CHECK(back[1].start_index == 300);
        CHECK(back[0] == ds[1]);
    }
}

TEST_CASE("format_real pads and keeps round-trip digits") {
    CHECK(format_real(1.0, 4) == "1.0000");
    CHECK(format_real(9.588, 3) == "9.588");
    CHECK(format_real(0.99745, 4) == "0.99745");
    CHECK(format_real(2.5) == "2.5");
    double v = 0.0;
    for (double x : {0.1, 1.0 / 3.0, 123456.789, 1e-12}) {
        REQUIRE(parse_real(format_real(x, 3), v));
        CHECK(v == x);
    }
    CHECK(parse_real("+1.5", v));
    CHECK(v == 1.5);
    CHECK_FALSE(parse_real("1.5x", v));
    CHECK_FALSE(parse_real("", v));
}
