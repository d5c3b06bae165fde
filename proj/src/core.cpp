#include "vocscan/core.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "vocscan/errors.hpp"

namespace vocscan {

RtAxis::RtAxis(std::vector<double> values) : values_(std::move(values)) {
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i]))
            throw ValidationError("retention time at row " + std::to_string(i) + " is not finite");
        if (i > 0 && !(values_[i] > values_[i - 1]))
            throw ValidationError("retention time axis is not strictly increasing at row " +
                                  std::to_string(i));
    }
}

RtAxis RtAxis::uniform(std::size_t rows, double start, double step) {
    std::vector<double> v(rows);
    for (std::size_t i = 0; i < rows; ++i) v[i] = start + static_cast<double>(i) * step;
    return RtAxis(std::move(v));
}

std::size_t RtAxis::nearest_row(double rt) const {
    if (values_.empty()) throw BoundsError("nearest_row on an empty axis");
    auto it = std::lower_bound(values_.begin(), values_.end(), rt);
    if (it == values_.begin()) return 0;
    if (it == values_.end()) return values_.size() - 1;
    const auto hi = static_cast<std::size_t>(it - values_.begin());
    const std::size_t lo = hi - 1;
    return (rt - values_[lo] <= values_[hi] - rt) ? lo : hi;
}

AbundanceMatrix::AbundanceMatrix(std::string sample_id, RtAxis axis, std::size_t channels,
                                 std::vector<double> intensities, int column_epoch)
    : sample_id_(std::move(sample_id)),
      axis_(std::move(axis)),
      channels_(channels),
      data_(std::move(intensities)),
      column_epoch_(column_epoch) {
    if (channels_ == 0) throw ValidationError("abundance matrix needs at least one channel");
    if (data_.size() != axis_.size() * channels_)
        throw ValidationError("abundance matrix has " + std::to_string(data_.size()) +
                              " values, expected " + std::to_string(axis_.size()) + " x " +
                              std::to_string(channels_));
    for (std::size_t i = 0; i < data_.size(); ++i) {
        const double v = data_[i];
        if (!std::isfinite(v) || v < 0.0)
            throw ValidationError("invalid intensity at row " + std::to_string(i / channels_) +
                                  ", channel " + std::to_string(i % channels_));
    }
}

std::vector<double> AbundanceMatrix::tic() const {
    std::vector<double> out(rows(), 0.0);
    for (std::size_t r = 0; r < rows(); ++r) {
        double s = 0.0;
        for (double v : row(r)) s += v;
        out[r] = s;
    }
    return out;
}

void validate(const GroundTruthAnnotation& ann) {
    if (ann.label == kNegativeLabel) throw ValidationError("annotation label must not be 0");
    if (ann.label < 0) throw ValidationError("annotation label must be positive");
    if (!std::isfinite(ann.start_rt) || !std::isfinite(ann.peak_rt) || !std::isfinite(ann.end_rt))
        throw ValidationError("annotation retention times must be finite");
    if (ann.start_rt > ann.peak_rt) throw ValidationError("annotation start_rt exceeds peak_rt");
    if (ann.peak_rt > ann.end_rt) throw ValidationError("annotation peak_rt exceeds end_rt");
}

MatrixView window(const AbundanceMatrix& a, std::size_t start, std::size_t delta) {
    if (delta == 0 || delta > a.rows() || start > a.rows() - delta)
        throw BoundsError("window start " + std::to_string(start) + " with height " +
                          std::to_string(delta) + " exceeds " + std::to_string(a.rows()) + " rows");
    return {a.data().subspan(start * a.channels(), delta * a.channels()), delta, a.channels()};
}

double rt_of_window(const AbundanceMatrix& a, std::size_t start, std::size_t delta) {
    (void)window(a, start, delta);
    return a.axis()[start + delta / 2];
}

}  // namespace vocscan
