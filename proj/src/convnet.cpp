#include "vocscan/convnet.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

#include "json.hpp"
#include "vocscan/errors.hpp"
#include "vocscan/parallel.hpp"
#include "vocscan/random.hpp"

namespace vocscan {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using StridedConstMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;
using VecMap = Eigen::Map<RowVec>;
using ConstVecMap = Eigen::Map<const RowVec>;

// Gradient buffers are summed in this fixed number of shards per batch so
// results do not depend on how many threads run them.
constexpr std::size_t kShards = 4;

}  // namespace

void ConvNetConfig::validate(std::size_t rows) const {
    if (blocks.empty()) throw ConfigError("convnet needs at least one conv block");
    std::size_t r = rows;
    for (const auto& b : blocks) {
        if (b.filters == 0 || b.kernel == 0 || b.pool == 0)
            throw ConfigError("conv block filters, kernel and pool must be >= 1");
        if (b.kernel > r) throw ConfigError("conv kernel longer than its input (" + std::to_string(r) + " rows)");
        r = (r - b.kernel + 1) / b.pool;
        if (r == 0) throw ConfigError("pooling leaves no rows");
    }
    for (std::size_t w : dense)
        if (w == 0) throw ConfigError("dense layer width must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must be in [0, 1)");
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
}

struct ConvNet::Workspace {
    std::vector<std::vector<double>> conv;    // conv output after ReLU (conv_rows x width)
    std::vector<std::vector<double>> out;     // layer output (pooled / dense activations)
    std::vector<std::vector<std::uint32_t>> argmax;
    std::vector<double> grad_out;
    std::vector<double> grad_in;
    std::vector<double> grad_conv;
    std::vector<double> probs;

    explicit Workspace(const std::vector<ConvNet::Layer>& layers) {
        for (const auto& l : layers) {
            conv.emplace_back(l.conv ? l.conv_rows * l.out_width : 0);
            out.emplace_back(l.out_rows * l.out_width);
            argmax.emplace_back(l.conv ? l.out_rows * l.out_width : 0);
        }
    }
};

ConvNet::ConvNet(const ConvNetConfig& config, std::size_t window_rows, std::size_t channels,
                 std::size_t num_classes)
    : config_(config), info_{num_classes, window_rows, channels, "convnet"} {
    config_.validate(window_rows);
    if (num_classes < 2) throw ConfigError("convnet needs at least 2 classes");
    if (channels == 0) throw ConfigError("convnet needs at least one channel");
    config_.num_classes = num_classes;

    std::size_t offset = 0;
    std::size_t rows = window_rows;
    std::size_t width = channels;
    for (const auto& b : config_.blocks) {
        Layer l;
        l.conv = true;
        l.in_rows = rows;
        l.in_width = width;
        l.out_width = b.filters;
        l.kernel = b.kernel;
        l.conv_rows = rows - b.kernel + 1;
        l.pool = b.pool;
        l.out_rows = l.conv_rows / b.pool;
        l.weight_offset = offset;
        offset += l.kernel * l.in_width * l.out_width;
        l.bias_offset = offset;
        offset += l.out_width;
        layers_.push_back(l);
        rows = l.out_rows;
        width = l.out_width;
    }
    std::size_t features = rows * width;
    auto add_dense = [&](std::size_t out, bool relu) {
        Layer l;
        l.conv = false;
        l.in_width = features;
        l.out_width = out;
        l.relu = relu;
        l.weight_offset = offset;
        offset += features * out;
        l.bias_offset = offset;
        offset += out;
        layers_.push_back(l);
        features = out;
    };
    for (std::size_t w : config_.dense) add_dense(w, true);
    add_dense(num_classes, false);

    params_.assign(offset, 0.0);
    Rng rng(derive_seed(config_.seed, "init"));
    for (const auto& l : layers_) {
        const double fan_in = static_cast<double>(l.conv ? l.kernel * l.in_width : l.in_width);
        const double limit = std::sqrt((l.relu ? 6.0 : 3.0) / fan_in);
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (std::size_t i = l.weight_offset; i < l.bias_offset; ++i) params_[i] = dist(rng);
    }
}

std::size_t ConvNet::first_conv_offset() const noexcept { return layers_.front().weight_offset; }

void ConvNet::forward(MatrixView input, Workspace& ws) const {
    const double* in = input.data.data();
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        const Layer& l = layers_[li];
        const double* p = params_.data();
        if (l.conv) {
            StridedConstMap x(in, static_cast<Eigen::Index>(l.conv_rows),
                              static_cast<Eigen::Index>(l.kernel * l.in_width),
                              Eigen::OuterStride<>(static_cast<Eigen::Index>(l.in_width)));
            ConstMatMap w(p + l.weight_offset, static_cast<Eigen::Index>(l.kernel * l.in_width),
                          static_cast<Eigen::Index>(l.out_width));
            ConstVecMap b(p + l.bias_offset, static_cast<Eigen::Index>(l.out_width));
            MatMap y(ws.conv[li].data(), static_cast<Eigen::Index>(l.conv_rows),
                     static_cast<Eigen::Index>(l.out_width));
            y.noalias() = x * w;
            y.rowwise() += b;
            y = y.cwiseMax(0.0);
            double* pooled = ws.out[li].data();
            auto* arg = ws.argmax[li].data();
            for (std::size_t t = 0; t < l.out_rows; ++t) {
                for (std::size_t f = 0; f < l.out_width; ++f) {
                    std::size_t best = t * l.pool;
                    double v = ws.conv[li][best * l.out_width + f];
                    for (std::size_t q = 1; q < l.pool; ++q) {
                        const std::size_t r = t * l.pool + q;
                        const double c = ws.conv[li][r * l.out_width + f];
                        if (c > v) {
                            v = c;
                            best = r;
                        }
                    }
                    pooled[t * l.out_width + f] = v;
                    arg[t * l.out_width + f] = static_cast<std::uint32_t>(best);
                }
            }
        } else {
            ConstVecMap x(in, static_cast<Eigen::Index>(l.in_width));
            ConstMatMap w(p + l.weight_offset, static_cast<Eigen::Index>(l.in_width),
                          static_cast<Eigen::Index>(l.out_width));
            ConstVecMap b(p + l.bias_offset, static_cast<Eigen::Index>(l.out_width));
            VecMap y(ws.out[li].data(), static_cast<Eigen::Index>(l.out_width));
            y.noalias() = x * w;
            y += b;
            if (l.relu) y = y.cwiseMax(0.0);
        }
        in = ws.out[li].data();
    }
}

std::vector<std::uint32_t> ConvNet::activation_pattern(MatrixView input) const {
    if (input.rows != info_.window_rows || input.cols != info_.channels)
        throw ContractError("input shape does not match the network");
    Workspace ws(layers_);
    forward(input, ws);
    std::vector<std::uint32_t> pattern;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        const Layer& l = layers_[li];
        if (l.conv) {
            for (double v : ws.conv[li]) pattern.push_back(v > 0.0);
            pattern.insert(pattern.end(), ws.argmax[li].begin(), ws.argmax[li].end());
        } else if (l.relu) {
            for (double v : ws.out[li]) pattern.push_back(v > 0.0);
        }
    }
    return pattern;
}

std::vector<double> ConvNet::logits(MatrixView input) const {
    if (input.rows != info_.window_rows || input.cols != info_.channels)
        throw ContractError("convnet input shape mismatch");
    Workspace ws(layers_);
    forward(input, ws);
    return ws.out.back();
}

ProbVector ConvNet::predict(MatrixView normalized) const { return softmax(logits(normalized)); }

double ConvNet::forward_backward(MatrixView input, VocLabel label, Workspace& ws, double* grad) const {
    forward(input, ws);
    const auto& logit = ws.out.back();
    const double m = *std::max_element(logit.begin(), logit.end());
    double sum = 0.0;
    ws.probs.resize(logit.size());
    for (std::size_t i = 0; i < logit.size(); ++i) {
        ws.probs[i] = std::exp(logit[i] - m);
        sum += ws.probs[i];
    }
    const auto target = static_cast<std::size_t>(label);
    const double loss = -(logit[target] - m - std::log(sum));

    ws.grad_out.resize(logit.size());
    for (std::size_t i = 0; i < logit.size(); ++i) ws.grad_out[i] = ws.probs[i] / sum;
    ws.grad_out[target] -= 1.0;

    for (std::size_t li = layers_.size(); li-- > 0;) {
        const Layer& l = layers_[li];
        const double* in = li == 0 ? input.data.data() : ws.out[li - 1].data();
        const double* p = params_.data();
        const bool need_input_grad = li > 0;
        if (!l.conv) {
            VecMap dy(ws.grad_out.data(), static_cast<Eigen::Index>(l.out_width));
            if (l.relu) {
                const double* y = ws.out[li].data();
                for (std::size_t i = 0; i < l.out_width; ++i)
                    if (!(y[i] > 0.0)) dy[static_cast<Eigen::Index>(i)] = 0.0;
            }
            ConstVecMap x(in, static_cast<Eigen::Index>(l.in_width));
            MatMap dw(grad + l.weight_offset, static_cast<Eigen::Index>(l.in_width),
                      static_cast<Eigen::Index>(l.out_width));
            VecMap db(grad + l.bias_offset, static_cast<Eigen::Index>(l.out_width));
            dw.noalias() += x.transpose() * dy;
            db += dy;
            if (need_input_grad) {
                ConstMatMap w(p + l.weight_offset, static_cast<Eigen::Index>(l.in_width),
                              static_cast<Eigen::Index>(l.out_width));
                ws.grad_in.resize(l.in_width);
                VecMap dx(ws.grad_in.data(), static_cast<Eigen::Index>(l.in_width));
                dx.noalias() = dy * w.transpose();
                std::swap(ws.grad_out, ws.grad_in);
            }
        } else {
            // route pooled gradients back to the max rows, then through ReLU
            ws.grad_conv.assign(l.conv_rows * l.out_width, 0.0);
            const auto* arg = ws.argmax[li].data();
            for (std::size_t t = 0; t < l.out_rows; ++t)
                for (std::size_t f = 0; f < l.out_width; ++f)
                    ws.grad_conv[arg[t * l.out_width + f] * l.out_width + f] += ws.grad_out[t * l.out_width + f];
            const double* y = ws.conv[li].data();
            for (std::size_t i = 0; i < ws.grad_conv.size(); ++i)
                if (!(y[i] > 0.0)) ws.grad_conv[i] = 0.0;

            ConstMatMap dy(ws.grad_conv.data(), static_cast<Eigen::Index>(l.conv_rows),
                           static_cast<Eigen::Index>(l.out_width));
            StridedConstMap x(in, static_cast<Eigen::Index>(l.conv_rows),
                              static_cast<Eigen::Index>(l.kernel * l.in_width),
                              Eigen::OuterStride<>(static_cast<Eigen::Index>(l.in_width)));
            MatMap dw(grad + l.weight_offset, static_cast<Eigen::Index>(l.kernel * l.in_width),
                      static_cast<Eigen::Index>(l.out_width));
            VecMap db(grad + l.bias_offset, static_cast<Eigen::Index>(l.out_width));
            dw.noalias() += x.transpose() * dy;
            db += dy.colwise().sum();
            if (need_input_grad) {
                ws.grad_in.assign(l.in_rows * l.in_width, 0.0);
                MatMap dx(ws.grad_in.data(), static_cast<Eigen::Index>(l.in_rows),
                          static_cast<Eigen::Index>(l.in_width));
                for (std::size_t j = 0; j < l.kernel; ++j) {
                    ConstMatMap wj(p + l.weight_offset + j * l.in_width * l.out_width,
                                   static_cast<Eigen::Index>(l.in_width), static_cast<Eigen::Index>(l.out_width));
                    dx.middleRows(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l.conv_rows))
                        .noalias() += dy * wj.transpose();
                }
                std::swap(ws.grad_out, ws.grad_in);
            }
        }
    }
    return loss;
}

double ConvNet::loss_and_gradient(std::span<const MatrixView> inputs, std::span<const VocLabel> labels,
                                  std::span<double> grad) const {
    if (inputs.size() != labels.size() || inputs.empty())
        throw ContractError("loss_and_gradient needs matching, non-empty inputs and labels");
    if (grad.size() != params_.size()) throw ContractError("gradient buffer has the wrong size");
    Workspace ws(layers_);
    std::vector<double> local(params_.size(), 0.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (inputs[i].rows != info_.window_rows || inputs[i].cols != info_.channels)
            throw ContractError("convnet input shape mismatch");
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= info_.num_classes)
            throw ContractError("label outside the class range");
        loss += forward_backward(inputs[i], labels[i], ws, local.data());
    }
    const double scale = 1.0 / static_cast<double>(inputs.size());
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += local[i] * scale;
    return loss * scale;
}

void ConvNet::save(std::ostream& out) const {
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& b : config_.blocks) blocks.push_back({b.filters, b.kernel, b.pool});
    nlohmann::json doc;
    doc["format"] = "vocscan-model";
    doc["version"] = kModelFormatVersion;
    doc["kind"] = "convnet";
    doc["info"] = {{"num_classes", info_.num_classes},
                   {"window_rows", info_.window_rows},
                   {"channels", info_.channels}};
    doc["config"] = {{"blocks", blocks},
                     {"dense", config_.dense},
                     {"learning_rate", config_.learning_rate},
                     {"momentum", config_.momentum},
                     {"batch_size", config_.batch_size},
                     {"epochs", config_.epochs},
                     {"seed", config_.seed}};
    doc["parameters"] = params_;
    out << doc.dump() << '\n';
}

std::unique_ptr<ConvNet> ConvNet::from_json_text(const std::string& text) {
    try {
        const auto doc = nlohmann::json::parse(text);
        const auto& c = doc.at("config");
        ConvNetConfig cfg;
        cfg.blocks.clear();
        for (const auto& b : c.at("blocks"))
            cfg.blocks.push_back({b.at(0).get<std::size_t>(), b.at(1).get<std::size_t>(), b.at(2).get<std::size_t>()});
        cfg.dense = c.at("dense").get<std::vector<std::size_t>>();
        cfg.learning_rate = c.at("learning_rate").get<double>();
        cfg.momentum = c.at("momentum").get<double>();
        cfg.batch_size = c.at("batch_size").get<std::size_t>();
        cfg.epochs = c.at("epochs").get<std::size_t>();
        cfg.seed = c.at("seed").get<std::uint64_t>();
        const auto& i = doc.at("info");
        auto net = std::make_unique<ConvNet>(cfg, i.at("window_rows").get<std::size_t>(),
                                             i.at("channels").get<std::size_t>(),
                                             i.at("num_classes").get<std::size_t>());
        const auto params = doc.at("parameters").get<std::vector<double>>();
        if (params.size() != net->params_.size())
            throw ParseError("convnet model has " + std::to_string(params.size()) + " parameters, expected " +
                             std::to_string(net->params_.size()));
        net->params_ = params;
        return net;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("convnet model: ") + e.what());
    }
}

double accuracy(const Classifier& model, const TrainingSource& data, std::size_t workers) {
    if (data.size() == 0) return 0.0;
    std::vector<char> correct(data.size(), 0);
    const std::size_t n = data.rows() * data.cols();
    constexpr std::size_t kChunk = 64;
    const std::size_t chunks = (data.size() + kChunk - 1) / kChunk;
    parallel_for(chunks, workers, [&](std::size_t c) {
        std::vector<double> buf(n);
        for (std::size_t i = c * kChunk; i < std::min(data.size(), (c + 1) * kChunk); ++i) {
            data.materialize(i, buf);
            const auto r = classify(model, MatrixView{buf, data.rows(), data.cols()});
            correct[i] = r.result.label == data.label(i);
        }
    });
    return static_cast<double>(std::count(correct.begin(), correct.end(), 1)) / static_cast<double>(data.size());
}

std::unique_ptr<ConvNet> train_convnet(const TrainingSource& data, const ConvNetConfig& config,
                                       TrainingReport* report) {
    const auto t0 = std::chrono::steady_clock::now();
    if (data.size() == 0) throw TrainingError("empty training set");
    const std::size_t num_classes =
        config.num_classes ? config.num_classes : static_cast<std::size_t>(data.max_label()) + 1;
    auto net = std::make_unique<ConvNet>(config, data.rows(), data.cols(), num_classes);
    const std::size_t np = net->parameter_count();
    const std::size_t n_in = data.rows() * data.cols();

    std::vector<double> velocity(np, 0.0);
    std::vector<std::vector<double>> shard_grad(kShards, std::vector<double>(np));
    std::vector<std::vector<double>> shard_input(kShards, std::vector<double>(n_in));
    std::vector<ConvNet::Workspace> shard_ws;
    for (std::size_t s = 0; s < kShards; ++s) shard_ws.emplace_back(net->layers_);
    std::vector<double> shard_loss(kShards);

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    TrainingReport local_report;
    local_report.points = data.size();

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        Rng rng(derive_seed(config.seed, "epoch", epoch));
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
            const std::size_t len = std::min(config.batch_size, order.size() - begin);
            const double scale = 1.0 / static_cast<double>(len);
            parallel_for(kShards, config.workers, [&](std::size_t s) {
                auto& g = shard_grad[s];
                std::fill(g.begin(), g.end(), 0.0);
                shard_loss[s] = 0.0;
                const std::size_t lo = begin + len * s / kShards;
                const std::size_t hi = begin + len * (s + 1) / kShards;
                auto& buf = shard_input[s];
                for (std::size_t k = lo; k < hi; ++k) {
                    const std::size_t idx = order[k];
                    data.materialize(idx, buf);
                    if (!std::all_of(buf.begin(), buf.end(), [](double v) { return v >= 0.0 && v <= 1.0; }))
                        throw ContractError("training points must be normalized to [0, 1]");
                    const VocLabel label = data.label(idx);
                    if (label < 0 || static_cast<std::size_t>(label) >= num_classes)
                        throw TrainingError("label " + std::to_string(label) + " outside the class range");
                    shard_loss[s] += net->forward_backward(MatrixView{buf, data.rows(), data.cols()}, label,
                                                           shard_ws[s], g.data());
                }
            });
            double batch_loss = 0.0;
            for (std::size_t s = 0; s < kShards; ++s) batch_loss += shard_loss[s];
            if (!std::isfinite(batch_loss))
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch starting at " +
                                    std::to_string(begin) + " (learning_rate " + std::to_string(config.learning_rate) +
                                    ")");
            epoch_loss += batch_loss;
            auto& params = net->params_;
            bool finite = true;
            for (std::size_t i = 0; i < np; ++i) {
                double g = 0.0;
                for (std::size_t s = 0; s < kShards; ++s) g += shard_grad[s][i];
                velocity[i] = config.momentum * velocity[i] - config.learning_rate * g * scale;
                params[i] += velocity[i];
                finite = finite && std::isfinite(params[i]);
            }
            if (!finite)
                throw TrainingError("parameters diverged at epoch " + std::to_string(epoch) +
                                    " (learning_rate " + std::to_string(config.learning_rate) + ")");
        }
        local_report.epoch_loss.push_back(epoch_loss / static_cast<double>(order.size()));
    }
    if (config.report_final_accuracy) local_report.final_accuracy = accuracy(*net, data, config.workers);
    local_report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (report) *report = std::move(local_report);
    return net;
}

}  // namespace vocscan
