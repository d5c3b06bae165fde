#include "vocscan/scanner.hpp"

#include <algorithm>
#include <ostream>

#include "vocscan/dataset.hpp"
#include "vocscan/errors.hpp"
#include "vocscan/ingest.hpp"
#include "vocscan/parallel.hpp"

namespace vocscan {

ScanResult scan(const AbundanceMatrix& a, const Classifier& model, std::size_t delta, std::size_t workers) {
    const auto& info = model.info();
    if (delta == 0) throw ContractError("window height must be >= 1");
    if (a.rows() < delta)
        throw ContractError("sample " + a.sample_id() + " has " + std::to_string(a.rows()) +
                            " rows, fewer than the window height " + std::to_string(delta));
    if (info.window_rows != delta || info.channels != a.channels())
        throw ContractError("model expects " + std::to_string(info.window_rows) + "x" + std::to_string(info.channels) +
                            " windows, scan uses " + std::to_string(delta) + "x" + std::to_string(a.channels()));

    const std::size_t n = window_count(a.rows(), delta);
    ScanResult out;
    out.sample_id = a.sample_id();
    out.delta = delta;
    out.labels.resize(n);
    out.confidences.resize(n);
    out.window_rts.resize(n);

    constexpr std::size_t kChunk = 128;
    const std::size_t chunks = (n + kChunk - 1) / kChunk;
    parallel_for(chunks, workers, [&](std::size_t c) {
        std::vector<double> buf(delta * a.channels());
        for (std::size_t i = c * kChunk; i < std::min(n, (c + 1) * kChunk); ++i) {
            const auto w = window(a, i, delta);
            std::copy(w.data.begin(), w.data.end(), buf.begin());
            normalize_in_place(buf);
            const auto r = classify(model, MatrixView{buf, delta, a.channels()});
            out.labels[i] = r.result.label;
            out.confidences[i] = r.result.confidence;
            out.window_rts[i] = rt_of_window(a, i, delta);
        }
    });
    return out;
}

void emit_scan(std::ostream& out, const ScanResult& result) {
    out << "index,rt,label,confidence\n";
    for (std::size_t i = 0; i < result.size(); ++i)
        out << i << ',' << format_real(result.window_rts[i], 3) << ',' << result.labels[i] << ','
            << format_real(result.confidences[i], 4) << '\n';
}

}  // namespace vocscan
