#include "vocscan/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>

#include "json.hpp"
#include "vocscan/errors.hpp"

namespace vocscan {

namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    for (;;) {
        const auto comma = line.find(',', pos);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(pos));
            return fields;
        }
        fields.push_back(line.substr(pos, comma - pos));
        pos = comma + 1;
    }
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

bool blank(std::string_view s) { return trim(s).empty(); }

double field_real(std::string_view text, std::size_t line, const char* what) {
    double v = 0.0;
    if (!parse_real(trim(text), v))
        throw ParseError(std::string("malformed ") + what + " '" + std::string(text) + "'", line);
    return v;
}

long long field_int(std::string_view text, std::size_t line, const char* what) {
    text = trim(text);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
        throw ParseError(std::string("malformed ") + what + " '" + std::string(text) + "'", line);
    return v;
}

void expect_header(std::string_view got, std::string_view want, std::size_t line) {
    if (trim(got) != want)
        throw ParseError("expected header '" + std::string(want) + "'", line);
}

}  // namespace

bool parse_real(std::string_view text, double& out) {
    if (text.empty()) return false;
    if (text.front() == '+') text.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc{} && ptr == text.data() + text.size();
}

std::string format_real(double v, int min_decimals) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    std::string s(buf, res.ptr);
    if (s.find_first_of("eEn") != std::string::npos || min_decimals <= 0) return s;
    const auto dot = s.find('.');
    const int decimals = dot == std::string::npos ? 0 : static_cast<int>(s.size() - dot - 1);
    if (decimals >= min_decimals) return s;
    res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, min_decimals);
    return {buf, res.ptr};
}

AbundanceMatrix parse_sample(std::istream& in, std::string sample_id, int column_epoch) {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw ParseError("empty matrix file", 1);
    ++line_no;
    const auto header = split_csv(line);
    if (header.size() < 2 || trim(header[0]) != "rt")
        throw ParseError("matrix header must start with 'rt' followed by channel columns", line_no);
    const std::size_t channels = header.size() - 1;

    std::vector<double> rts;
    std::vector<double> values;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        const auto fields = split_csv(line);
        if (fields.size() != header.size())
            throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                                 std::to_string(fields.size()),
                             line_no);
        const double rt = field_real(fields[0], line_no, "retention time");
        if (!std::isfinite(rt)) throw ParseError("retention time is not finite", line_no);
        if (!rts.empty() && !(rt > rts.back()))
            throw ParseError("retention time does not increase", line_no);
        rts.push_back(rt);
        for (std::size_t c = 1; c < fields.size(); ++c) {
            const double v = field_real(fields[c], line_no, "intensity");
            if (!std::isfinite(v) || v < 0.0)
                throw ParseError("intensity must be finite and non-negative", line_no);
            values.push_back(v);
        }
    }
    return AbundanceMatrix(std::move(sample_id), RtAxis(std::move(rts)), channels,
                           std::move(values), column_epoch);
}

AbundanceMatrix load_sample(const std::filesystem::path& path, std::string sample_id,
                            int column_epoch) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open matrix file " + path.string());
    try {
        return parse_sample(in, std::move(sample_id), column_epoch);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), e.line());
    }
}

void emit_sample(std::ostream& out, const AbundanceMatrix& a, int first_mz) {
    out << "rt";
    for (std::size_t c = 0; c < a.channels(); ++c) out << ",mz_" << first_mz + static_cast<int>(c);
    out << '\n';
    std::string row;
    char buf[64];
    for (std::size_t r = 0; r < a.rows(); ++r) {
        row = format_real(a.axis()[r], 6);
        for (double v : a.row(r)) {
            row.push_back(',');
            const auto res = std::to_chars(buf, buf + sizeof buf, v);
            row.append(buf, res.ptr);
        }
        row.push_back('\n');
        out << row;
    }
}

std::vector<GroundTruthAnnotation> parse_annotations(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<GroundTruthAnnotation> anns;
    if (!std::getline(in, line)) return anns;
    ++line_no;
    expect_header(line, "sample_id,label,start_rt,peak_rt,end_rt", line_no);
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        const auto f = split_csv(line);
        if (f.size() != 5)
            throw ParseError("expected 5 fields, found " + std::to_string(f.size()), line_no);
        GroundTruthAnnotation a;
        a.sample_id = std::string(trim(f[0]));
        a.label = static_cast<VocLabel>(field_int(f[1], line_no, "label"));
        a.start_rt = field_real(f[2], line_no, "start_rt");
        a.peak_rt = field_real(f[3], line_no, "peak_rt");
        a.end_rt = field_real(f[4], line_no, "end_rt");
        try {
            validate(a);
        } catch (const ValidationError& e) {
            throw ValidationError(e.what(), line_no);
        }
        anns.push_back(std::move(a));
    }
    return anns;
}

std::vector<GroundTruthAnnotation> load_annotations(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open annotation file " + path.string());
    return parse_annotations(in);
}

void emit_annotations(std::ostream& out, std::span<const GroundTruthAnnotation> anns) {
    out << "sample_id,label,start_rt,peak_rt,end_rt\n";
    for (const auto& a : anns) {
        out << a.sample_id << ',' << a.label << ',' << format_real(a.start_rt, 3) << ','
            << format_real(a.peak_rt, 3) << ',' << format_real(a.end_rt, 3) << '\n';
    }
}

namespace {

std::vector<Detection> sorted_by_start(std::span<const Detection> detections) {
    std::vector<Detection> sorted(detections.begin(), detections.end());
    std::stable_sort(sorted.begin(), sorted.end(), [](const Detection& a, const Detection& b) {
        if (a.start_rt != b.start_rt) return a.start_rt < b.start_rt;
        if (a.label != b.label) return a.label < b.label;
        return a.sample_id < b.sample_id;
    });
    return sorted;
}

constexpr std::string_view kDetectionHeader =
    "label,start_rt,end_rt,confidence,sample_id,start_index,run_length";

}  // namespace

void emit_detections(std::ostream& out, std::span<const Detection> detections,
                     DetectionFormat format) {
    const auto sorted = sorted_by_start(detections);
    if (format == DetectionFormat::csv) {
        out << kDetectionHeader << '\n';
        for (const auto& d : sorted) {
            out << d.label << ',' << format_real(d.start_rt, 3) << ',' << format_real(d.end_rt, 3)
                << ',' << format_real(d.confidence, 4) << ',' << d.sample_id << ','
                << d.start_index << ',' << d.run_length << '\n';
        }
        return;
    }
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& d : sorted) {
        arr.push_back({{"label", d.label},
                       {"start_rt", d.start_rt},
                       {"end_rt", d.end_rt},
                       {"confidence", d.confidence},
                       {"sample_id", d.sample_id},
                       {"start_index", d.start_index},
                       {"run_length", d.run_length}});
    }
    out << nlohmann::json{{"detections", arr}}.dump(2) << '\n';
}

std::vector<Detection> parse_detections(std::istream& in, DetectionFormat format) {
    std::vector<Detection> out;
    if (format == DetectionFormat::json) {
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(in);
            for (const auto& j : doc.at("detections")) {
                Detection d;
                d.label = j.at("label").get<VocLabel>();
                d.start_rt = j.at("start_rt").get<double>();
                d.end_rt = j.at("end_rt").get<double>();
                d.confidence = j.at("confidence").get<double>();
                d.sample_id = j.at("sample_id").get<std::string>();
                d.start_index = j.value("start_index", std::size_t{0});
                d.run_length = j.value("run_length", std::size_t{0});
                out.push_back(std::move(d));
            }
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("detection JSON: ") + e.what());
        }
        return out;
    }
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) return out;
    ++line_no;
    expect_header(line, kDetectionHeader, line_no);
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        const auto f = split_csv(line);
        if (f.size() != 7)
            throw ParseError("expected 7 fields, found " + std::to_string(f.size()), line_no);
        Detection d;
        d.label = static_cast<VocLabel>(field_int(f[0], line_no, "label"));
        d.start_rt = field_real(f[1], line_no, "start_rt");
        d.end_rt = field_real(f[2], line_no, "end_rt");
        d.confidence = field_real(f[3], line_no, "confidence");
        d.sample_id = std::string(trim(f[4]));
        d.start_index = static_cast<std::size_t>(field_int(f[5], line_no, "start_index"));
        d.run_length = static_cast<std::size_t>(field_int(f[6], line_no, "run_length"));
        if (d.label <= 0) throw ValidationError("detection label must be positive", line_no);
        if (d.start_rt > d.end_rt) throw ValidationError("detection start_rt exceeds end_rt", line_no);
        out.push_back(std::move(d));
    }
    return out;
}

std::vector<Detection> load_detections(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open detection file " + path.string());
    const auto format = path.extension() == ".json" ? DetectionFormat::json : DetectionFormat::csv;
    return parse_detections(in, format);
}

}  // namespace vocscan
