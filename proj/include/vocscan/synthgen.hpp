#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "vocscan/core.hpp"

namespace vocscan {

struct IonPeak {
    std::size_t channel = 0;
    double relative_abundance = 1.0;  ///< in (0, 1], strongest ion = 1
};

/// Synthetic compound: fragmentation fingerprint, elution window and strength.
struct VocTemplate {
    VocLabel label = 1;
    std::vector<IonPeak> ion_pattern;
    double rt_center_min = 0.0;
    double rt_center_max = 0.0;
    double elution_sigma = 0.01;  ///< minutes
    double amplitude_min = 1000.0;
    double amplitude_max = 1000.0;

    /// Channel indices ordered by decreasing abundance.
    [[nodiscard]] std::vector<std::size_t> top_ions(std::size_t n) const;
};

struct SynthConfig {
    std::size_t rows = 6000;
    std::size_t channels = kDefaultChannels;
    double rt_start = 1.0;
    double rt_step = 0.16 / 60.0;  ///< 6.25 Hz scan rate, in minutes
    double baseline_level = 50.0;
    double noise_sigma = 5.0;
    std::uint64_t seed = 1;
    /// Window height the samples are meant for; elutions (6 sigma) must fit
    /// in window_rows - 19 rows. 0 disables the check.
    std::size_t window_rows = kDefaultWindowRows;
    /// Unannotated non-target compounds per sample, each with its own random
    /// ion pattern, position and log-uniform strength.
    std::size_t background_compounds = 0;
    double background_amplitude_min = 100.0;
    double background_amplitude_max = 8000.0;

    [[nodiscard]] double rt_end() const noexcept {
        return rt_start + static_cast<double>(rows - 1) * rt_step;
    }
};

struct SyntheticSample {
    AbundanceMatrix matrix;
    std::vector<GroundTruthAnnotation> annotations;
};

/// Throws ConfigError for malformed templates or configs.
void validate(const VocTemplate& t, const SynthConfig& cfg);

/// Adds a Gaussian elution of each present template on baseline plus
/// zero-mean Gaussian noise clipped at 0. Deterministic in cfg.seed.
[[nodiscard]] SyntheticSample synth_sample(std::span<const VocTemplate> templates,
                                           const std::vector<bool>& presence,
                                           const SynthConfig& cfg, std::string sample_id = "synthetic",
                                           int column_epoch = 1);

/// k templates with labels 1..k in elution order. Labels 1 and 2 share their
/// three strongest ions; for k >= 4 the ranges of labels 3 and 4 overlap; for
/// k >= 3 the last label is a low-amplitude compound.
[[nodiscard]] std::vector<VocTemplate> default_template_set(std::size_t k, const SynthConfig& cfg);

void save_templates(std::ostream& out, std::span<const VocTemplate> templates);
[[nodiscard]] std::vector<VocTemplate> load_templates(std::istream& in);

}  // namespace vocscan
