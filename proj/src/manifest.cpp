#include "vocscan/manifest.hpp"

#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>

#include "json.hpp"
#include "vocscan/errors.hpp"

namespace vocscan {

using nlohmann::json;

std::string to_string(Split split) { return split == Split::train ? "train" : "test"; }

std::filesystem::path Manifest::resolve(const std::filesystem::path& p) const {
    return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

const SampleEntry& Manifest::sample(const std::string& id) const {
    for (const auto& s : samples)
        if (s.sample_id == id) return s;
    throw ValidationError("manifest has no sample '" + id + "'");
}

std::vector<const SampleEntry*> Manifest::samples_in(Split split) const {
    std::vector<const SampleEntry*> out;
    for (const auto& s : samples)
        if (s.split == split) out.push_back(&s);
    return out;
}

void validate(const Manifest& m) {
    std::set<std::string> ids;
    std::map<std::string, Split> participant_split;
    for (const auto& s : m.samples) {
        if (s.sample_id.empty()) throw ValidationError("manifest sample with empty sample_id");
        if (!ids.insert(s.sample_id).second)
            throw ValidationError("duplicate sample_id '" + s.sample_id + "'");
        const auto [it, inserted] = participant_split.emplace(s.participant_id, s.split);
        if (!inserted && it->second != s.split)
            throw ValidationError("participant '" + s.participant_id +
                                  "' has samples in both train and test splits");
        if (s.column_epoch < 1) throw ValidationError("column_epoch must be >= 1");
    }
    for (std::size_t i = 0; i < m.voc_table.size(); ++i) {
        if (m.voc_table[i].label != static_cast<VocLabel>(i + 1))
            throw ValidationError("voc_table labels must be unique and contiguous from 1");
    }
    const auto& p = m.params;
    if (p.delta < 2) throw ValidationError("params.delta must be >= 2");
    if (p.gamma < 1) throw ValidationError("params.gamma must be >= 1");
    if (p.shift_min > p.shift_max) throw ValidationError("params.shifts: min exceeds max");
    if (p.intensity_variants < 0) throw ValidationError("params.intensity_variants must be >= 0");
    if (!(p.r_max > 0.0)) throw ValidationError("params.r_max must be positive");
    if (!(p.negative_ratio >= 0.0)) throw ValidationError("params.negative_ratio must be >= 0");
    if (p.channels == 0) throw ValidationError("params.channels must be positive");
}

Manifest parse_manifest(std::istream& in, std::filesystem::path base_dir) {
    Manifest m;
    m.base_dir = std::move(base_dir);
    try {
        const json doc = json::parse(in);
        if (doc.value("format", std::string("vocscan-manifest")) != "vocscan-manifest")
            throw ParseError("not a vocscan manifest");
        if (doc.value("version", 1) != 1) throw ParseError("unsupported manifest version");
        if (doc.contains("params")) {
            const auto& j = doc.at("params");
            auto& p = m.params;
            p.delta = j.value("delta", p.delta);
            p.gamma = j.value("gamma", p.gamma);
            if (j.contains("shifts")) {
                p.shift_min = j.at("shifts").at("min").get<int>();
                p.shift_max = j.at("shifts").at("max").get<int>();
            }
            p.intensity_variants = j.value("intensity_variants", p.intensity_variants);
            p.r_max = j.value("r_max", p.r_max);
            p.intensity_sigma_fraction = j.value("intensity_sigma_fraction", p.intensity_sigma_fraction);
            p.negative_ratio = j.value("negative_ratio", p.negative_ratio);
            p.channels = j.value("channels", p.channels);
            p.seed = j.value("seed", p.seed);
        }
        for (const auto& v : doc.value("voc_table", json::array()))
            m.voc_table.push_back({v.at("label").get<VocLabel>(), v.value("name", std::string())});
        for (const auto& s : doc.value("samples", json::array())) {
            SampleEntry e;
            e.sample_id = s.at("sample_id").get<std::string>();
            e.matrix_path = s.at("matrix").get<std::string>();
            if (s.contains("annotations") && !s.at("annotations").is_null())
                e.annotation_path = s.at("annotations").get<std::string>();
            e.participant_id = s.value("participant", e.sample_id);
            e.column_epoch = s.value("column_epoch", 1);
            const auto split = s.value("split", std::string("train"));
            if (split == "train") {
                e.split = Split::train;
            } else if (split == "test") {
                e.split = Split::test;
            } else {
                throw ParseError("sample '" + e.sample_id + "': split must be train or test");
            }
            m.samples.push_back(std::move(e));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("manifest: ") + e.what());
    }
    validate(m);
    return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open manifest " + path.string());
    return parse_manifest(in, path.parent_path());
}

void emit_manifest(std::ostream& out, const Manifest& m) {
    const auto& p = m.params;
    json doc;
    doc["format"] = "vocscan-manifest";
    doc["version"] = 1;
    doc["params"] = {{"delta", p.delta},
                     {"gamma", p.gamma},
                     {"shifts", {{"min", p.shift_min}, {"max", p.shift_max}}},
                     {"intensity_variants", p.intensity_variants},
                     {"r_max", p.r_max},
                     {"intensity_sigma_fraction", p.intensity_sigma_fraction},
                     {"negative_ratio", p.negative_ratio},
                     {"channels", p.channels},
                     {"seed", p.seed}};
    doc["voc_table"] = json::array();
    for (const auto& v : m.voc_table) doc["voc_table"].push_back({{"label", v.label}, {"name", v.name}});
    doc["samples"] = json::array();
    for (const auto& s : m.samples) {
        json e = {{"sample_id", s.sample_id},
                  {"matrix", s.matrix_path.generic_string()},
                  {"participant", s.participant_id},
                  {"column_epoch", s.column_epoch},
                  {"split", to_string(s.split)}};
        e["annotations"] = s.annotation_path ? json(s.annotation_path->generic_string()) : json(nullptr);
        doc["samples"].push_back(std::move(e));
    }
    out << doc.dump(2) << '\n';
}

}  // namespace vocscan
