#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vocscan/core.hpp"

namespace vocscan {

enum class Split { train, test };

struct SampleEntry {
    std::string sample_id;
    std::filesystem::path matrix_path;
    std::optional<std::filesystem::path> annotation_path;
    std::string participant_id;
    int column_epoch = 1;
    Split split = Split::train;
};

struct VocEntry {
    VocLabel label = 1;
    std::string name;
};

/// Run-wide parameters. Every random stream of a run is derived from `seed`.
struct RunParams {
    std::size_t delta = kDefaultWindowRows;
    std::size_t gamma = kDefaultGamma;
    int shift_min = -9;
    int shift_max = 10;
    int intensity_variants = 4;
    double r_max = 0.1;
    double intensity_sigma_fraction = 0.25;
    double negative_ratio = 1.0;
    std::size_t channels = kDefaultChannels;
    std::uint64_t seed = 1;
};

/// Run description: samples, target VOC table and parameters.
/// Relative paths are resolved against `base_dir`.
struct Manifest {
    std::vector<SampleEntry> samples;
    std::vector<VocEntry> voc_table;
    RunParams params;
    std::filesystem::path base_dir;

    [[nodiscard]] std::size_t num_vocs() const noexcept { return voc_table.size(); }
    [[nodiscard]] std::filesystem::path resolve(const std::filesystem::path& p) const;
    [[nodiscard]] const SampleEntry& sample(const std::string& id) const;
    [[nodiscard]] std::vector<const SampleEntry*> samples_in(Split split) const;
};

/// Throws ValidationError on duplicate sample ids, non-contiguous labels or
/// participants whose samples straddle the train/test split.
void validate(const Manifest& manifest);

[[nodiscard]] Manifest parse_manifest(std::istream& in, std::filesystem::path base_dir = {});
[[nodiscard]] Manifest load_manifest(const std::filesystem::path& path);
void emit_manifest(std::ostream& out, const Manifest& manifest);

[[nodiscard]] std::string to_string(Split split);

}  // namespace vocscan
