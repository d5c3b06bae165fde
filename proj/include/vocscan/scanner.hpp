#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "vocscan/classifier.hpp"
#include "vocscan/core.hpp"

namespace vocscan {

/// Per-window labels and confidences of one sample, in window order.
struct ScanResult {
    std::string sample_id;
    std::size_t delta = 0;
    std::vector<VocLabel> labels;
    std::vector<double> confidences;
    std::vector<double> window_rts;  ///< rt_of_window for each index

    [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
};

/// Normalizes and classifies every window of height delta. Output order is
/// the window order for any worker count. Throws ContractError when the
/// matrix is shorter than delta or the model shape differs.
[[nodiscard]] ScanResult scan(const AbundanceMatrix& a, const Classifier& model, std::size_t delta,
                              std::size_t workers = 1);

/// CSV dump: index,rt,label,confidence
void emit_scan(std::ostream& out, const ScanResult& result);

}  // namespace vocscan
