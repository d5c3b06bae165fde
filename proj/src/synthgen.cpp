#include "vocscan/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>

#include "json.hpp"
#include "vocscan/errors.hpp"
#include "vocscan/random.hpp"

namespace vocscan {

std::vector<std::size_t> VocTemplate::top_ions(std::size_t n) const {
    std::vector<IonPeak> sorted = ion_pattern;
    std::stable_sort(sorted.begin(), sorted.end(), [](const IonPeak& a, const IonPeak& b) {
        return a.relative_abundance > b.relative_abundance;
    });
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < std::min(n, sorted.size()); ++i) out.push_back(sorted[i].channel);
    return out;
}

void validate(const VocTemplate& t, const SynthConfig& cfg) {
    const std::string who = "template " + std::to_string(t.label) + ": ";
    if (t.label <= 0) throw ConfigError(who + "label must be positive");
    if (t.ion_pattern.empty()) throw ConfigError(who + "empty ion pattern");
    double max_rel = 0.0;
    std::set<std::size_t> channels;
    for (const auto& ion : t.ion_pattern) {
        if (ion.channel >= cfg.channels) throw ConfigError(who + "ion channel out of range");
        if (!channels.insert(ion.channel).second) throw ConfigError(who + "repeated ion channel");
        if (!(ion.relative_abundance > 0.0 && ion.relative_abundance <= 1.0))
            throw ConfigError(who + "relative abundance must be in (0, 1]");
        max_rel = std::max(max_rel, ion.relative_abundance);
    }
    if (max_rel != 1.0) throw ConfigError(who + "strongest ion must have relative abundance 1");
    if (!(t.elution_sigma > 0.0)) throw ConfigError(who + "elution_sigma must be positive");
    if (t.rt_center_min > t.rt_center_max) throw ConfigError(who + "empty rt_center_range");
    if (t.amplitude_min < 0.0 || t.amplitude_min > t.amplitude_max)
        throw ConfigError(who + "invalid amplitude range");
    if (t.rt_center_min - 3.0 * t.elution_sigma < cfg.rt_start ||
        t.rt_center_max + 3.0 * t.elution_sigma > cfg.rt_end())
        throw ConfigError(who + "elution window leaves the sample's retention-time span");
    if (cfg.window_rows > 19) {
        const double elution_rows = 6.0 * t.elution_sigma / cfg.rt_step;
        if (elution_rows > static_cast<double>(cfg.window_rows - 19))
            throw ConfigError(who + "elution spans " + std::to_string(elution_rows) +
                              " rows, more than window_rows - 19");
    }
}

namespace {

void validate_config(const SynthConfig& cfg) {
    if (cfg.rows < 2 || cfg.channels == 0) throw ConfigError("synthetic sample needs rows >= 2 and channels >= 1");
    if (cfg.window_rows > 0 && cfg.rows < cfg.window_rows)
        throw ConfigError("synthetic sample has fewer rows than window_rows");
    if (!(cfg.rt_step > 0.0)) throw ConfigError("rt_step must be positive");
    if (!(cfg.noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
    if (!(cfg.baseline_level >= 0.0)) throw ConfigError("baseline_level must be >= 0");
}

double max_sigma_rows(const SynthConfig& cfg) {
    return cfg.window_rows > 19 ? static_cast<double>(cfg.window_rows - 19) / 6.0 : 8.0;
}

void add_background(std::vector<double>& data, const RtAxis& axis, const SynthConfig& cfg) {
    if (cfg.background_compounds == 0) return;
    if (!(cfg.background_amplitude_min > 0.0) || cfg.background_amplitude_min > cfg.background_amplitude_max)
        throw ConfigError("invalid background amplitude range");
    // separate stream: the annotated compounds and the noise do not move when this is switched on
    Rng rng(derive_seed(cfg.seed, "background"));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double sigma_rows_max = max_sigma_rows(cfg);
    for (std::size_t k = 0; k < cfg.background_compounds; ++k) {
        const double sigma = (0.4 + 0.5 * unit(rng)) * sigma_rows_max * cfg.rt_step;
        const double lo = cfg.rt_start + 3.0 * sigma;
        const double hi = cfg.rt_end() - 3.0 * sigma;
        const double c = lo < hi ? lo + (hi - lo) * unit(rng) : 0.5 * (cfg.rt_start + cfg.rt_end());
        // log-uniform: weak compounds are as common per decade as strong ones
        const double a = cfg.background_amplitude_min == cfg.background_amplitude_max
                             ? cfg.background_amplitude_min
                             : cfg.background_amplitude_min *
                                   std::pow(cfg.background_amplitude_max / cfg.background_amplitude_min, unit(rng));
        const std::size_t n_ions = std::min<std::size_t>(cfg.channels, 4 + rng() % 9);
        std::vector<std::size_t> channels(cfg.channels);
        std::iota(channels.begin(), channels.end(), 0);
        std::shuffle(channels.begin(), channels.end(), rng);
        std::vector<double> rel(n_ions);
        for (std::size_t j = 0; j < n_ions; ++j) rel[j] = j == 0 ? 1.0 : 0.05 + 0.9 * unit(rng);
        const double two_var = 2.0 * sigma * sigma;
        const auto first = static_cast<std::size_t>(std::max(0.0, std::floor((c - 4.0 * sigma - cfg.rt_start) / cfg.rt_step)));
        for (std::size_t r = first; r < axis.size() && axis[r] <= c + 4.0 * sigma; ++r) {
            const double d = axis[r] - c;
            const double g = a * std::exp(-(d * d) / two_var);
            double* row = &data[r * cfg.channels];
            for (std::size_t j = 0; j < n_ions; ++j) row[channels[j]] += rel[j] * g;
        }
    }
}

}  // namespace

SyntheticSample synth_sample(std::span<const VocTemplate> templates, const std::vector<bool>& presence,
                             const SynthConfig& cfg, std::string sample_id, int column_epoch) {
    validate_config(cfg);
    if (presence.size() != templates.size())
        throw ConfigError("presence has " + std::to_string(presence.size()) + " entries for " +
                          std::to_string(templates.size()) + " templates");
    std::set<VocLabel> present_labels;
    for (std::size_t i = 0; i < templates.size(); ++i) {
        validate(templates[i], cfg);
        if (presence[i] && !present_labels.insert(templates[i].label).second)
            throw ConfigError("label " + std::to_string(templates[i].label) +
                              " would elute more than once");
    }

    const RtAxis axis = RtAxis::uniform(cfg.rows, cfg.rt_start, cfg.rt_step);
    std::vector<double> data(cfg.rows * cfg.channels, 0.0);
    std::vector<GroundTruthAnnotation> anns;
    Rng rng(cfg.seed);

    // Every template consumes its draws whether present or not, so toggling
    // one compound leaves the others' positions unchanged.
    for (std::size_t i = 0; i < templates.size(); ++i) {
        const auto& t = templates[i];
        std::uniform_real_distribution<double> centre_dist(t.rt_center_min, t.rt_center_max);
        std::uniform_real_distribution<double> amp_dist(t.amplitude_min, t.amplitude_max);
        const double c = t.rt_center_min == t.rt_center_max ? t.rt_center_min : centre_dist(rng);
        const double a = t.amplitude_min == t.amplitude_max ? t.amplitude_min : amp_dist(rng);
        if (!presence[i]) continue;
        const double two_var = 2.0 * t.elution_sigma * t.elution_sigma;
        for (std::size_t r = 0; r < cfg.rows; ++r) {
            const double d = axis[r] - c;
            const double g = std::exp(-(d * d) / two_var);
            double* row = &data[r * cfg.channels];
            for (const auto& ion : t.ion_pattern) row[ion.channel] += a * ion.relative_abundance * g;
        }
        anns.push_back({sample_id, t.label, c - 3.0 * t.elution_sigma, c, c + 3.0 * t.elution_sigma});
    }

    add_background(data, axis, cfg);

    std::normal_distribution<double> noise(0.0, cfg.noise_sigma > 0.0 ? cfg.noise_sigma : 1.0);
    for (double& v : data) {
        v += cfg.baseline_level;
        if (cfg.noise_sigma > 0.0) v += noise(rng);
        if (v < 0.0) v = 0.0;
    }
    std::sort(anns.begin(), anns.end(), [](const auto& x, const auto& y) { return x.peak_rt < y.peak_rt; });
    return {AbundanceMatrix(sample_id, axis, cfg.channels, std::move(data), column_epoch), std::move(anns)};
}

namespace {

std::vector<std::size_t> pick_channels(Rng& rng, std::size_t channels, std::size_t n,
                                       const std::set<std::size_t>& exclude) {
    std::vector<std::size_t> pool;
    for (std::size_t c = 0; c < channels; ++c)
        if (!exclude.contains(c)) pool.push_back(c);
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(std::min(n, pool.size()));
    return pool;
}

}  // namespace

std::vector<VocTemplate> default_template_set(std::size_t k, const SynthConfig& cfg) {
    validate_config(cfg);
    if (k == 0) throw ConfigError("default_template_set needs k >= 1");
    Rng rng(derive_seed(cfg.seed, "templates"));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const double step = cfg.rt_step;
    const double max_sigma_rows = vocscan::max_sigma_rows(cfg);
    const double half_window = static_cast<double>(cfg.window_rows) / 2.0;
    const double margin = (half_window + 12.0 + 3.0 * max_sigma_rows) * step;
    const double lo = cfg.rt_start + margin;
    const double hi = cfg.rt_end() - margin;
    if (!(hi > lo)) throw ConfigError("sample too short for the default template set");
    const double slot = (hi - lo) / static_cast<double>(k);
    const double half_width = std::min(0.2 * slot, 40.0 * step);

    std::vector<VocTemplate> out;
    std::vector<std::size_t> shared_top;
    for (std::size_t i = 0; i < k; ++i) {
        VocTemplate t;
        t.label = static_cast<VocLabel>(i + 1);
        const double centre = lo + (static_cast<double>(i) + 0.5) * slot;
        t.rt_center_min = centre - half_width;
        t.rt_center_max = centre + half_width;
        t.elution_sigma = (0.6 + 0.3 * unit(rng)) * max_sigma_rows * step;
        t.amplitude_min = 3000.0;
        t.amplitude_max = 8000.0;

        const std::size_t n_ions = std::min<std::size_t>(cfg.channels, 6 + rng() % 7);
        std::set<std::size_t> used;
        std::vector<std::size_t> top;
        if (i == 1 && !shared_top.empty()) {
            top = shared_top;  // same three strongest ions as label 1, different ratios
            std::shuffle(top.begin(), top.end(), rng);
        } else {
            top = pick_channels(rng, cfg.channels, std::min<std::size_t>(3, n_ions), used);
        }
        if (i == 0) shared_top = top;
        const double top_rel[3] = {1.0, 0.75 + 0.2 * unit(rng), 0.55 + 0.15 * unit(rng)};
        for (std::size_t j = 0; j < top.size(); ++j) {
            t.ion_pattern.push_back({top[j], top_rel[j]});
            used.insert(top[j]);
        }
        if (i == 1) used.insert(shared_top.begin(), shared_top.end());
        for (std::size_t ch : pick_channels(rng, cfg.channels, n_ions - top.size(), used))
            t.ion_pattern.push_back({ch, 0.08 + 0.4 * unit(rng)});
        out.push_back(std::move(t));
    }
    if (k >= 4) {
        // labels 3 and 4: partially overlapping retention ranges
        auto& a = out[2];
        auto& b = out[3];
        const double c = 0.5 * (a.rt_center_min + a.rt_center_max);
        b.rt_center_min = c + 0.5 * half_width;
        b.rt_center_max = c + 2.5 * half_width;
    }
    if (k >= 3) {
        out.back().amplitude_min = 300.0;
        out.back().amplitude_max = 600.0;
    }
    for (const auto& t : out) validate(t, cfg);
    return out;
}

void save_templates(std::ostream& out, std::span<const VocTemplate> templates) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : templates) {
        nlohmann::json ions = nlohmann::json::array();
        for (const auto& ion : t.ion_pattern) ions.push_back({ion.channel, ion.relative_abundance});
        arr.push_back({{"label", t.label},
                       {"ions", ions},
                       {"rt_center_range", {t.rt_center_min, t.rt_center_max}},
                       {"elution_sigma", t.elution_sigma},
                       {"amplitude_range", {t.amplitude_min, t.amplitude_max}}});
    }
    out << nlohmann::json{{"templates", arr}}.dump(2) << '\n';
}

std::vector<VocTemplate> load_templates(std::istream& in) {
    std::vector<VocTemplate> out;
    try {
        const auto doc = nlohmann::json::parse(in);
        for (const auto& j : doc.at("templates")) {
            VocTemplate t;
            t.label = j.at("label").get<VocLabel>();
            for (const auto& ion : j.at("ions"))
                t.ion_pattern.push_back({ion.at(0).get<std::size_t>(), ion.at(1).get<double>()});
            t.rt_center_min = j.at("rt_center_range").at(0).get<double>();
            t.rt_center_max = j.at("rt_center_range").at(1).get<double>();
            t.elution_sigma = j.at("elution_sigma").get<double>();
            t.amplitude_min = j.at("amplitude_range").at(0).get<double>();
            t.amplitude_max = j.at("amplitude_range").at(1).get<double>();
            out.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("templates: ") + e.what());
    }
    return out;
}

}  // namespace vocscan
