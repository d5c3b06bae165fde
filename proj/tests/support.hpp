#pragma once

// Shared fixtures and brute-force oracles for the unit and acceptance tests.

#include <algorithm>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "vocscan/core.hpp"
#include "vocscan/detector.hpp"
#include "vocscan/errors.hpp"

namespace vocscan::testing {

inline AbundanceMatrix make_matrix(std::size_t rows, std::size_t cols,
                                   const std::function<double(std::size_t, std::size_t)>& fill,
                                   double rt_start = 1.0, double step = 0.01, std::string id = "m") {
    std::vector<double> data(rows * cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) data[r * cols + c] = fill(r, c);
    return AbundanceMatrix(std::move(id), RtAxis::uniform(rows, rt_start, step), cols, std::move(data));
}

inline AbundanceMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                                     double rt_start = 1.0, double step = 0.01, std::string id = "m") {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    return make_matrix(rows, cols, [&](std::size_t, std::size_t) { return u(rng); }, rt_start, step, std::move(id));
}

/// Collects warnings for the lifetime of the guard.
class WarningCapture {
public:
    WarningCapture() {
        previous_ = set_warning_handler([this](std::string_view m) { messages.emplace_back(m); });
    }
    ~WarningCapture() { set_warning_handler(previous_); }
    WarningCapture(const WarningCapture&) = delete;
    WarningCapture& operator=(const WarningCapture&) = delete;

    std::vector<std::string> messages;

private:
    WarningHandler previous_;
};

// ---- brute-force oracles -------------------------------------------------

/// Every (l, n) with a constant positive label, n >= gamma, not extendable on either side.
inline std::vector<Detection> brute_duration(const ScanResult& s, std::size_t gamma) {
    std::vector<Detection> out;
    const std::size_t N = s.size();
    for (std::size_t l = 0; l < N; ++l) {
        for (std::size_t n = gamma; l + n <= N; ++n) {
            const VocLabel j = s.labels[l];
            if (j <= 0) continue;
            bool constant = true;
            for (std::size_t k = l; k < l + n; ++k) constant = constant && s.labels[k] == j;
            if (!constant) continue;
            const bool left_max = l == 0 || s.labels[l - 1] != j;
            const bool right_max = l + n == N || s.labels[l + n] != j;
            if (!left_max || !right_max) continue;
            double best = -1.0;
            for (std::size_t a = l; a + gamma <= l + n; ++a) {
                double sum = 0.0;
                for (std::size_t b = 0; b < gamma; ++b) sum += s.confidences[a + b];
                best = std::max(best, sum / static_cast<double>(gamma));
            }
            Detection d;
            d.label = j;
            d.start_index = l;
            d.run_length = n;
            d.start_rt = s.window_rts[l];
            d.end_rt = s.window_rts[l + n - 1];
            d.confidence = best;
            d.sample_id = s.sample_id;
            out.push_back(d);
        }
    }
    return out;
}

/// Literal set formula: three witnesses with distinct labels on the wrong
/// side of f, chained in retention time.
inline std::vector<Detection> brute_order(const std::vector<Detection>& D) {
    std::vector<Detection> out;
    const std::size_t n = D.size();
    for (std::size_t f = 0; f < n; ++f) {
        bool remove = false;
        for (std::size_t i = 0; i < n && !remove; ++i)
            for (std::size_t j = 0; j < n && !remove; ++j)
                for (std::size_t k = 0; k < n && !remove; ++k) {
                    const auto &df = D[f], &di = D[i], &dj = D[j], &dk = D[k];
                    const bool distinct = di.label != dj.label && dj.label != dk.label && di.label != dk.label;
                    if (!distinct) continue;
                    const bool lower_follow = di.label < df.label && dj.label < df.label && dk.label < df.label &&
                                              df.start_rt <= di.start_rt && di.start_rt <= dj.start_rt &&
                                              dj.start_rt <= dk.start_rt;
                    const bool higher_precede = di.label > df.label && dj.label > df.label &&
                                                dk.label > df.label && di.start_rt <= dj.start_rt &&
                                                dj.start_rt <= dk.start_rt && dk.start_rt <= df.start_rt;
                    remove = lower_follow || higher_precede;
                }
        if (!remove) out.push_back(D[f]);
    }
    return out;
}

/// d survives when no other detection of its label beats it.
inline std::vector<Detection> brute_unique(const std::vector<Detection>& D) {
    std::vector<Detection> out;
    for (std::size_t a = 0; a < D.size(); ++a) {
        bool beaten = false;
        for (std::size_t b = 0; b < D.size(); ++b) {
            if (a == b || D[a].label != D[b].label) continue;
            const auto &x = D[a], &y = D[b];
            if (y.confidence > x.confidence) beaten = true;
            else if (y.confidence == x.confidence && y.start_rt < x.start_rt) beaten = true;
            else if (y.confidence == x.confidence && y.start_rt == x.start_rt && y.start_index < x.start_index)
                beaten = true;
            else if (y.confidence == x.confidence && y.start_rt == x.start_rt && y.start_index == x.start_index &&
                     b < a)
                beaten = true;
        }
        if (!beaten) out.push_back(D[a]);
    }
    std::stable_sort(out.begin(), out.end(), [](const Detection& x, const Detection& y) {
        return x.start_rt < y.start_rt || (x.start_rt == y.start_rt && x.label < y.label);
    });
    return out;
}

/// Random scan made of label runs; confidences in (0, 1].
inline ScanResult random_scan(std::mt19937_64& rng, std::size_t max_len = 200, int max_label = 5) {
    ScanResult s;
    s.sample_id = "r";
    std::uniform_int_distribution<std::size_t> len_dist(1, max_len);
    std::uniform_int_distribution<int> label_dist(0, max_label);
    std::uniform_int_distribution<std::size_t> run_dist(1, 12);
    std::uniform_real_distribution<double> conf(0.0, 1.0);
    const std::size_t n = len_dist(rng);
    while (s.labels.size() < n) {
        const int label = label_dist(rng);
        const std::size_t run = run_dist(rng);
        for (std::size_t k = 0; k < run && s.labels.size() < n; ++k) s.labels.push_back(label);
    }
    for (std::size_t i = 0; i < n; ++i) {
        // coarse values make equal moving averages (ties) common
        s.confidences.push_back(std::max(0.1, std::round(conf(rng) * 10.0) / 10.0));
        s.window_rts.push_back(1.0 + 0.01 * static_cast<double>(i));
    }
    return s;
}

/// Random detection set with coarse retention times and confidences so ties occur.
inline std::vector<Detection> random_detections(std::mt19937_64& rng, std::size_t max_count = 10,
                                                int max_label = 8) {
    std::uniform_int_distribution<std::size_t> count(0, max_count);
    std::uniform_int_distribution<int> label(1, max_label);
    std::uniform_int_distribution<int> rt(0, 15);
    std::uniform_int_distribution<int> conf(1, 5);
    std::vector<Detection> out;
    const std::size_t n = count(rng);
    for (std::size_t i = 0; i < n; ++i) {
        Detection d;
        d.label = label(rng);
        d.start_rt = 1.0 + 0.5 * rt(rng);
        d.end_rt = d.start_rt + 0.2;
        d.confidence = 0.2 * conf(rng);
        d.start_index = i;
        d.run_length = 20;
        d.sample_id = "r";
        out.push_back(d);
    }
    return out;
}

}  // namespace vocscan::testing
