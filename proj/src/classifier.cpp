#include "vocscan/classifier.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "vocscan/convnet.hpp"
#include "vocscan/errors.hpp"

namespace vocscan {

ProbVector::ProbVector(std::vector<double> p) : p_(std::move(p)) {
    if (p_.empty()) throw ContractError("empty probability vector");
    double sum = 0.0;
    for (double v : p_) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0)
            throw ContractError("probability outside [0, 1]");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ContractError("probabilities do not sum to 1");
}

ProbVector softmax(std::span<const double> logits) {
    if (logits.empty()) throw ContractError("softmax of an empty vector");
    double m = logits[0];
    for (double x : logits) {
        if (!std::isfinite(x)) throw ContractError("softmax input is not finite");
        m = std::max(m, x);
    }
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - m);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return ProbVector(std::move(p));
}

Classification classify(const ProbVector& p) {
    Classification c{0, p[0]};
    for (std::size_t i = 1; i < p.size(); ++i) {
        if (p[i] > c.confidence) c = {static_cast<VocLabel>(i), p[i]};
    }
    return c;
}

ClassifiedWindow classify(const Classifier& model, MatrixView normalized) {
    const auto& info = model.info();
    if (normalized.rows != info.window_rows || normalized.cols != info.channels)
        throw ContractError("window is " + std::to_string(normalized.rows) + " x " +
                            std::to_string(normalized.cols) + ", model expects " +
                            std::to_string(info.window_rows) + " x " + std::to_string(info.channels));
    ProbVector p = model.predict(normalized);
    return {classify(p), std::move(p)};
}

ClassifiedWindow classify(const Classifier& model, const DataPoint& normalized) {
    return classify(model, normalized.view());
}

CentroidClassifier::CentroidClassifier(ModelInfo info, std::vector<std::vector<double>> centroids)
    : info_(std::move(info)), centroids_(std::move(centroids)) {
    info_.kind = "centroid";
    if (centroids_.size() != info_.num_classes || centroids_.size() < 2)
        throw ContractError("centroid model needs one centroid per class (at least 2)");
    for (const auto& c : centroids_)
        if (c.size() != info_.window_rows * info_.channels)
            throw ContractError("centroid size does not match the window shape");
}

ProbVector CentroidClassifier::predict(MatrixView x) const {
    std::vector<double> logits(centroids_.size());
    for (std::size_t k = 0; k < centroids_.size(); ++k) {
        double d2 = 0.0;
        const auto& c = centroids_[k];
        for (std::size_t i = 0; i < c.size(); ++i) {
            const double d = x.data[i] - c[i];
            d2 += d * d;
        }
        logits[k] = -std::sqrt(d2);
    }
    return softmax(logits);
}

namespace {

nlohmann::json info_json(const ModelInfo& info) {
    return {{"num_classes", info.num_classes}, {"window_rows", info.window_rows}, {"channels", info.channels}};
}

}  // namespace

void CentroidClassifier::save(std::ostream& out) const {
    nlohmann::json doc;
    doc["format"] = "vocscan-model";
    doc["version"] = kModelFormatVersion;
    doc["kind"] = "centroid";
    doc["info"] = info_json(info_);
    doc["centroids"] = centroids_;
    out << doc.dump() << '\n';
}

std::unique_ptr<CentroidClassifier> train_centroid(const TrainingSource& data, std::size_t num_classes) {
    if (data.size() == 0) throw TrainingError("empty training set");
    if (num_classes == 0) num_classes = static_cast<std::size_t>(data.max_label()) + 1;
    const std::size_t n = data.rows() * data.cols();
    std::vector<std::vector<double>> sums(num_classes, std::vector<double>(n, 0.0));
    std::vector<std::size_t> counts(num_classes, 0);
    std::vector<double> buf(n);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const VocLabel label = data.label(i);
        if (label < 0 || static_cast<std::size_t>(label) >= num_classes)
            throw TrainingError("label " + std::to_string(label) + " outside the class range");
        data.materialize(i, buf);
        auto& s = sums[static_cast<std::size_t>(label)];
        for (std::size_t j = 0; j < n; ++j) s[j] += buf[j];
        ++counts[static_cast<std::size_t>(label)];
    }
    for (std::size_t k = 0; k < num_classes; ++k) {
        if (counts[k] == 0) throw TrainingError("class " + std::to_string(k) + " has no training points");
        for (double& v : sums[k]) v /= static_cast<double>(counts[k]);
    }
    ModelInfo info{num_classes, data.rows(), data.cols(), "centroid"};
    return std::make_unique<CentroidClassifier>(info, std::move(sums));
}

std::unique_ptr<Classifier> load_model(std::istream& in) {
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model file: ") + e.what());
    }
    if (doc.value("format", std::string()) != "vocscan-model") throw ParseError("not a vocscan model file");
    if (doc.value("version", 0) != kModelFormatVersion) throw ParseError("unsupported model version");
    const auto kind = doc.value("kind", std::string());
    if (kind == "convnet") return ConvNet::from_json_text(text);
    if (kind == "centroid") {
        try {
            const auto& j = doc.at("info");
            ModelInfo info{j.at("num_classes").get<std::size_t>(), j.at("window_rows").get<std::size_t>(),
                           j.at("channels").get<std::size_t>(), "centroid"};
            return std::make_unique<CentroidClassifier>(
                info, doc.at("centroids").get<std::vector<std::vector<double>>>());
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("centroid model: ") + e.what());
        }
    }
    throw ParseError("unknown model kind '" + kind + "'");
}

std::unique_ptr<Classifier> load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open model file " + path.string());
    return load_model(in);
}

void save_model(const Classifier& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write model file " + path.string());
    model.save(out);
}

}  // namespace vocscan
