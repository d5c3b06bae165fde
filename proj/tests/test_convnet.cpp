#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "vocscan/convnet.hpp"
#include "vocscan/errors.hpp"

using namespace vocscan;

namespace {

ConvNetConfig tiny_config() {
    ConvNetConfig c;
    c.blocks = {{3, 3, 2}, {4, 3, 2}};
    c.dense = {5};
    c.seed = 3;
    return c;
}

std::vector<double> random_input(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

// Peak of width 3 in one channel, centred, on a noisy floor.
DataPoint toy_point(std::mt19937_64& rng, VocLabel label, std::size_t rows, std::size_t cols) {
    std::uniform_real_distribution<double> noise(0.0, 0.2);
    DataPoint p;
    p.rows = rows;
    p.cols = cols;
    p.label = label;
    p.values.resize(rows * cols);
    for (auto& v : p.values) v = noise(rng);
    if (label > 0) {
        const std::size_t ch = static_cast<std::size_t>(label) * 2 - 1;
        for (std::size_t r = rows / 2 - 1; r <= rows / 2 + 1; ++r) p.values[r * cols + ch] = 1.0;
    }
    return p;
}

LabeledDataset toy_dataset(std::uint64_t seed, std::size_t per_class) {
    std::mt19937_64 rng(seed);
    LabeledDataset d;
    for (std::size_t i = 0; i < per_class; ++i)
        for (VocLabel l = 0; l <= 2; ++l) d.add(toy_point(rng, l, 16, 5));
    return d;
}

}  // namespace

TEST_CASE("layer shapes and parameter count") {
    const ConvNet net(tiny_config(), 20, 6, 3);
    // conv1: 3*6*3+3, conv2: 3*3*4+4, rows 20 -> 18 -> 9 -> 7 -> 3, dense 12*5+5, out 5*3+3
    CHECK(net.parameter_count() == (54 + 3) + (36 + 4) + (60 + 5) + (15 + 3));
    CHECK(net.first_conv_offset() == 0);
    CHECK_THROWS_AS(ConvNet(tiny_config(), 6, 6, 3), ConfigError);
    auto bad = tiny_config();
    bad.blocks[0].kernel = 0;
    CHECK_THROWS_AS(ConvNet(bad, 20, 6, 3), ConfigError);
}

TEST_CASE("analytic gradient matches central differences") {
    ConvNet net(tiny_config(), 20, 6, 3);
    std::mt19937_64 rng(5);
    const double h = 1e-5;
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        const auto x = random_input(rng, 20 * 6);
        const MatrixView view{x, 20, 6};
        const VocLabel label = trial % 3;
        std::vector<double> grad(net.parameter_count(), 0.0);
        (void)net.loss_and_gradient(std::span(&view, 1), std::span(&label, 1), grad);
        auto params = net.parameters();
        for (std::size_t i = 0; i < params.size(); ++i) {
            std::vector<double> unused(net.parameter_count());
            const double keep = params[i];
            params[i] = keep + h;
            const double up = net.loss_and_gradient(std::span(&view, 1), std::span(&label, 1), unused);
            params[i] = keep - h;
            const double down = net.loss_and_gradient(std::span(&view, 1), std::span(&label, 1), unused);
            params[i] = keep;
            const double numeric = (up - down) / (2 * h);
            const double scale = std::max({std::abs(numeric), std::abs(grad[i]), 1e-6});
            worst = std::max(worst, std::abs(numeric - grad[i]) / scale);
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("permuting input channels together with first-layer weights keeps predictions") {
    ConvNet net(tiny_config(), 20, 6, 3);
    ConvNet permuted = net;
    const std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};  // channel c moves to perm[c]
    const std::size_t filters = 3, channels = 6, kernel = 3;
    auto src = net.parameters();
    auto dst = permuted.parameters();
    for (std::size_t j = 0; j < kernel; ++j)
        for (std::size_t c = 0; c < channels; ++c)
            for (std::size_t f = 0; f < filters; ++f)
                dst[(j * channels + perm[c]) * filters + f] = src[(j * channels + c) * filters + f];

    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const auto x = random_input(rng, 20 * 6);
        std::vector<double> y(x.size());
        for (std::size_t r = 0; r < 20; ++r)
            for (std::size_t c = 0; c < channels; ++c) y[r * channels + perm[c]] = x[r * channels + c];
        const auto a = net.logits(MatrixView{x, 20, 6});
        const auto b = permuted.logits(MatrixView{y, 20, 6});
        for (std::size_t k = 0; k < a.size(); ++k) CHECK(b[k] == doctest::Approx(a[k]).epsilon(1e-12));
        CHECK(classify(net.predict(MatrixView{x, 20, 6})).label ==
              classify(permuted.predict(MatrixView{y, 20, 6})).label);
    }
}

TEST_CASE("separable toy problem is learned to full accuracy") {
    const auto data = toy_dataset(1, 40);
    auto cfg = tiny_config();
    cfg.blocks = {{4, 3, 2}};
    cfg.dense = {8};
    cfg.epochs = 50;
    cfg.batch_size = 8;
    cfg.learning_rate = 0.01;
    TrainingReport report;
    const auto net = train_convnet(data, cfg, &report);
    CHECK(report.epoch_loss.size() == 50);
    CHECK(report.epoch_loss.back() < report.epoch_loss.front());
    CHECK(report.final_accuracy == 1.0);
    CHECK(accuracy(*net, toy_dataset(2, 20)) == 1.0);
}

TEST_CASE("training is deterministic and independent of the worker count") {
    const auto data = toy_dataset(3, 15);
    auto cfg = tiny_config();
    cfg.epochs = 3;
    cfg.batch_size = 7;
    cfg.workers = 1;
    const auto a = train_convnet(data, cfg);
    cfg.workers = 3;
    const auto b = train_convnet(data, cfg);
    const auto pa = a->parameters();
    const auto pb = b->parameters();
    CHECK(std::equal(pa.begin(), pa.end(), pb.begin(), pb.end()));
}

TEST_CASE("model file round-trip keeps predictions bit-identical") {
    const ConvNet net(tiny_config(), 20, 6, 3);
    std::stringstream buf;
    net.save(buf);
    const auto back = load_model(buf);
    CHECK(back->info().kind == "convnet");
    std::mt19937_64 rng(4);
    const auto x = random_input(rng, 120);
    const auto a = net.predict(MatrixView{x, 20, 6});
    const auto b = back->predict(MatrixView{x, 20, 6});
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("training rejects unnormalized points and diverging runs") {
    LabeledDataset raw;
    DataPoint p;
    p.rows = 16;
    p.cols = 5;
    p.values.assign(80, 3.0);
    raw.add(p);
    p.label = 1;
    raw.add(p);
    CHECK_THROWS_AS((void)train_convnet(raw, tiny_config()), ContractError);

    auto cfg = tiny_config();
    cfg.learning_rate = 1e300;
    cfg.epochs = 20;
    CHECK_THROWS_AS((void)train_convnet(toy_dataset(5, 10), cfg), TrainingError);
}

TEST_CASE("activation pattern tracks ReLU states and pooling winners") {
    ConvNet net(tiny_config(), 20, 6, 3);
    std::mt19937_64 rng(12);
    const auto x = random_input(rng, 20 * 6);
    const MatrixView view{x, 20, 6};
    // conv1: 18x3 mask + 9x3 argmax, conv2: 7x4 mask + 3x4 argmax, dense: 5 mask
    const auto p = net.activation_pattern(view);
    CHECK(p.size() == 54 + 27 + 28 + 12 + 5);
    CHECK(net.activation_pattern(view) == p);

    // pushing every bias far below zero switches all ReLUs off
    for (const auto& l : net.layers())
        for (std::size_t i = l.bias_offset; i < l.bias_offset + l.out_width; ++i) net.parameters()[i] = -1e6;
    const auto off = net.activation_pattern(view);
    CHECK(off != p);
    CHECK(std::all_of(off.begin(), off.begin() + 54, [](std::uint32_t v) { return v == 0; }));
    CHECK_THROWS_AS((void)net.activation_pattern(MatrixView{x, 10, 12}), ContractError);
}
