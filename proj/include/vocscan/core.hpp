#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace vocscan {

/// Class label: 0 is the negative (background) class, 1..K are target VOCs.
using VocLabel = int;

inline constexpr VocLabel kNegativeLabel = 0;
inline constexpr std::size_t kDefaultChannels = 411;
inline constexpr int kFirstMz = 40;
inline constexpr std::size_t kDefaultWindowRows = 80;
inline constexpr std::size_t kDefaultGamma = 20;

/// Closed retention-time interval in minutes.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    [[nodiscard]] double length() const noexcept { return hi - lo; }
    [[nodiscard]] bool intersects(const Interval& other) const noexcept {
        return lo <= other.hi && other.lo <= hi;
    }
    [[nodiscard]] bool contains(double x) const noexcept { return lo <= x && x <= hi; }
};

/// Strictly increasing retention times (minutes), one per matrix row.
class RtAxis {
public:
    RtAxis() = default;
    explicit RtAxis(std::vector<double> values);

    /// Uniform axis: start, start + step, ...
    static RtAxis uniform(std::size_t rows, double start, double step);

    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] double operator[](std::size_t row) const noexcept { return values_[row]; }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] double front() const { return values_.front(); }
    [[nodiscard]] double back() const { return values_.back(); }

    /// Row whose retention time is closest to rt; ties go to the earlier row.
    [[nodiscard]] std::size_t nearest_row(double rt) const;

private:
    std::vector<double> values_;
};

/// Read-only row-major view of a rows x cols block of intensities.
struct MatrixView {
    std::span<const double> data;
    std::size_t rows = 0;
    std::size_t cols = 0;

    [[nodiscard]] double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    [[nodiscard]] std::span<const double> row(std::size_t r) const {
        return data.subspan(r * cols, cols);
    }
};

/// One raw GC-MS sample: R x C ion intensities with their retention-time axis.
/// Immutable after construction.
class AbundanceMatrix {
public:
    AbundanceMatrix() = default;
    AbundanceMatrix(std::string sample_id, RtAxis axis, std::size_t channels,
                    std::vector<double> intensities, int column_epoch = 1);

    [[nodiscard]] const std::string& sample_id() const noexcept { return sample_id_; }
    [[nodiscard]] const RtAxis& axis() const noexcept { return axis_; }
    [[nodiscard]] std::size_t rows() const noexcept { return axis_.size(); }
    [[nodiscard]] std::size_t channels() const noexcept { return channels_; }
    [[nodiscard]] int column_epoch() const noexcept { return column_epoch_; }
    [[nodiscard]] double at(std::size_t r, std::size_t c) const { return data_[r * channels_ + c]; }
    [[nodiscard]] std::span<const double> row(std::size_t r) const {
        return std::span<const double>(data_).subspan(r * channels_, channels_);
    }
    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
    [[nodiscard]] MatrixView view() const noexcept { return {data_, rows(), channels_}; }

    /// Total retention-time span covered by the axis, in minutes.
    [[nodiscard]] double rt_span() const { return rows() == 0 ? 0.0 : axis_.back() - axis_.front(); }

    /// Total ion current (row sums).
    [[nodiscard]] std::vector<double> tic() const;

private:
    std::string sample_id_;
    RtAxis axis_;
    std::size_t channels_ = 0;
    std::vector<double> data_;
    int column_epoch_ = 1;
};

/// One expert-reported VOC instance.
struct GroundTruthAnnotation {
    std::string sample_id;
    VocLabel label = 1;
    double start_rt = 0.0;
    double peak_rt = 0.0;
    double end_rt = 0.0;

    [[nodiscard]] Interval interval() const noexcept { return {start_rt, end_rt}; }
    [[nodiscard]] double midpoint() const noexcept { return 0.5 * (start_rt + end_rt); }
};

/// Throws ValidationError when the annotation violates its invariants.
void validate(const GroundTruthAnnotation& ann);

/// Number of windows of height delta that fit in rows rows (0 when none fit).
[[nodiscard]] constexpr std::size_t window_count(std::size_t rows, std::size_t delta) noexcept {
    return (delta == 0 || rows < delta) ? 0 : rows - delta + 1;
}

// Windows are addressed by their 0-based first row `start`; valid starts are
// 0 .. rows - delta. The window's middle row is start + delta / 2.

/// Rows start .. start + delta - 1 of the matrix, without copying.
[[nodiscard]] MatrixView window(const AbundanceMatrix& a, std::size_t start, std::size_t delta);

/// Retention time of the window's middle row.
[[nodiscard]] double rt_of_window(const AbundanceMatrix& a, std::size_t start, std::size_t delta);

}  // namespace vocscan
