#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "vocscan/classifier.hpp"
#include "vocscan/errors.hpp"

using namespace vocscan;

TEST_CASE("softmax stays finite and normalized at the extremes") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> wide(-1e3, 1e3);
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<double> z(2 + trial % 12);
        for (auto& v : z) v = trial % 3 == 0 ? (wide(rng) > 0 ? 1e3 : -1e3) : wide(rng);
        const auto p = softmax(z);
        double sum = 0.0;
        for (double v : p.values()) {
            REQUIRE(std::isfinite(v));
            sum += v;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
    CHECK_THROWS_AS((void)softmax(std::vector<double>{1.0, NAN}), ContractError);
    CHECK_THROWS_AS((void)softmax(std::vector<double>{1.0, INFINITY}), ContractError);
}

TEST_CASE("argmax is invariant to logit shifts") {
    const std::vector<double> z{0.3, 2.0, -1.0, 1.9};
    auto shifted = z;
    for (auto& v : shifted) v += 500.0;
    CHECK(classify(softmax(z)).label == classify(softmax(shifted)).label);
    CHECK(classify(softmax(z)).label == 1);
}

TEST_CASE("probability vector contract") {
    CHECK_NOTHROW(ProbVector({0.25, 0.75}));
    CHECK_THROWS_AS(ProbVector({0.5, 0.6}), ContractError);
    CHECK_THROWS_AS(ProbVector({-0.1, 1.1}), ContractError);
    const auto c = classify(ProbVector({0.4, 0.2, 0.4}));
    CHECK(c.label == 0);
    CHECK(c.confidence == 0.4);
}

namespace {

DataPoint point(std::vector<double> v, VocLabel label) {
    DataPoint p;
    p.values = std::move(v);
    p.rows = 2;
    p.cols = 2;
    p.label = label;
    return p;
}

}  // namespace

TEST_CASE("centroid baseline trains, predicts and round-trips") {
    LabeledDataset data;
    data.add(point({0, 0, 0, 0}, 0));
    data.add(point({0.1, 0, 0, 0}, 0));
    data.add(point({1, 1, 0, 0}, 1));
    data.add(point({0.9, 1, 0, 0}, 1));
    data.add(point({0, 0, 1, 1}, 2));
    const auto model = train_centroid(data);
    CHECK(model->info().num_classes == 3);
    const std::vector<double> probe{0.95, 0.9, 0.05, 0};
    CHECK(classify(*model, MatrixView{probe, 2, 2}).result.label == 1);

    std::stringstream buf;
    model->save(buf);
    const auto back = load_model(buf);
    CHECK(back->info().kind == "centroid");
    const auto a = model->predict(MatrixView{probe, 2, 2});
    const auto b = back->predict(MatrixView{probe, 2, 2});
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);

    const std::vector<double> wrong(6, 0.0);
    CHECK_THROWS_AS((void)classify(*model, MatrixView{wrong, 3, 2}), ContractError);

    LabeledDataset gap;
    gap.add(point({0, 0, 0, 0}, 0));
    gap.add(point({1, 1, 1, 1}, 2));
    CHECK_THROWS_AS((void)train_centroid(gap), TrainingError);
}

TEST_CASE("unknown model files are rejected") {
    std::istringstream in(R"({"format": "vocscan-model", "version": 1, "kind": "forest"})");
    CHECK_THROWS_AS((void)load_model(in), ParseError);
}
