// Copyright 2026 The ncbir Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ncbir/head.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ncbir/adam.hpp"
#include "ncbir/error.hpp"
#include "ncbir/rng.hpp"

namespace ncbir {

namespace {

// Activations of one sample through the head.
struct Trace {
    std::vector<double> hidden_pre;
    std::vector<double> hidden;
    std::array<double, kEmbeddingDim> embed_pre{};
    std::array<double, kEmbeddingDim> embed{};
    std::array<double, kOutputDim> output{};
};

void affine(const DenseLayer& layer, std::span<const double> in, std::span<double> out) {
    for (std::size_t r = 0; r < layer.outputs; ++r) {
        const double* row = layer.weight.data() + r * layer.inputs;
        double acc = layer.bias[r];
        for (std::size_t c = 0; c < layer.inputs; ++c) {
            acc += row[c] * in[c];
        }
        out[r] = acc;
    }
}

void run(const HeadParams& p, std::span<const double> x, Trace& t) {
    t.hidden_pre.resize(p.hidden.outputs);
    t.hidden.resize(p.hidden.outputs);
    affine(p.hidden, x, t.hidden_pre);
    for (std::size_t i = 0; i < t.hidden.size(); ++i) t.hidden[i] = std::max(0.0, t.hidden_pre[i]);
    affine(p.embed, t.hidden, t.embed_pre);
    for (std::size_t i = 0; i < kEmbeddingDim; ++i) t.embed[i] = std::max(0.0, t.embed_pre[i]);
    affine(p.output, t.embed, t.output);
}

void check_feature(const HeadModel& model, std::span<const double> feature) {
    if (feature.size() != model.config.input_dim) {
        fail(ErrorCategory::Shape, "feature length " + std::to_string(feature.size()) +
                                       " does not match model input_dim " +
                                       std::to_string(model.config.input_dim));
    }
}

void init_layer(DenseLayer& layer, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.inputs));
    for (double& w : layer.weight) w = rng.uniform(-bound, bound);
    for (double& b : layer.bias) b = rng.uniform(-bound, bound);
}

// Adds the batch-mean gradient contribution of every sample into grads and
// returns the batch-mean loss.
double accumulate(const HeadModel& model, std::span<const Sample> batch, HeadParams* grads) {
    const HeadParams& p = model.params;
    const double scale = 2.0 / (static_cast<double>(kOutputDim) * static_cast<double>(batch.size()));
    Trace t;
    std::vector<double> d_hidden(p.hidden.outputs);
    double loss_sum = 0.0;
    for (const Sample& s : batch) {
        check_feature(model, s.feature);
        run(p, s.feature, t);
        loss_sum += mse_loss(t.output, s.target);
        if (grads == nullptr) continue;

        std::array<double, kOutputDim> d_out;
        for (std::size_t o = 0; o < kOutputDim; ++o) d_out[o] = scale * (t.output[o] - s.target[o]);

        std::array<double, kEmbeddingDim> d_embed{};
        for (std::size_t o = 0; o < kOutputDim; ++o) {
            grads->output.bias[o] += d_out[o];
            for (std::size_t e = 0; e < kEmbeddingDim; ++e) {
                grads->output.w(o, e) += d_out[o] * t.embed[e];
                d_embed[e] += p.output.w(o, e) * d_out[o];
            }
        }
        for (std::size_t e = 0; e < kEmbeddingDim; ++e) {
            if (t.embed_pre[e] <= 0.0) d_embed[e] = 0.0;
        }

        std::fill(d_hidden.begin(), d_hidden.end(), 0.0);
        for (std::size_t e = 0; e < kEmbeddingDim; ++e) {
            const double g = d_embed[e];
            if (g == 0.0) continue;
            grads->embed.bias[e] += g;
            for (std::size_t h = 0; h < p.embed.inputs; ++h) {
                grads->embed.w(e, h) += g * t.hidden[h];
                d_hidden[h] += p.embed.w(e, h) * g;
            }
        }

        for (std::size_t h = 0; h < p.hidden.outputs; ++h) {
            if (t.hidden_pre[h] <= 0.0) continue;
            const double g = d_hidden[h];
            grads->hidden.bias[h] += g;
            double* row = grads->hidden.weight.data() + h * p.hidden.inputs;
            for (std::size_t i = 0; i < p.hidden.inputs; ++i) row[i] += g * s.feature[i];
        }
    }
    return loss_sum / static_cast<double>(batch.size());
}

std::vector<double> flatten(const HeadParams& p) {
    std::vector<double> out;
    out.reserve(p.parameter_count());
    p.for_each([&](double v) { out.push_back(v); });
    return out;
}

void unflatten(std::span<const double> flat, HeadParams& p) {
    std::size_t i = 0;
    p.for_each([&](double& v) { v = flat[i++]; });
}

} // namespace

void HeadConfig::validate() const {
    if (input_dim < 1 || hidden_dim < 1) {
        fail(ErrorCategory::Config, "head dimensions must be >= 1");
    }
    if (batch_size < 1) {
        fail(ErrorCategory::Config, "batch_size must be >= 1");
    }
    if (!std::isfinite(learning_rate) || learning_rate < 0.0) {
        fail(ErrorCategory::Config, "learning_rate must be finite and >= 0");
    }
}

HeadParams HeadParams::zeros(std::size_t input_dim, std::size_t hidden_dim) {
    return {DenseLayer(input_dim, hidden_dim), DenseLayer(hidden_dim, kEmbeddingDim),
            DenseLayer(kEmbeddingDim, kOutputDim)};
}

std::size_t HeadParams::parameter_count() const {
    std::size_t n = 0;
    for_each([&](double) { ++n; });
    return n;
}

HeadModel HeadModel::initialize(const HeadConfig& config) {
    config.validate();
    HeadModel model{config, HeadParams::zeros(config.input_dim, config.hidden_dim)};
    Rng rng(config.seed);
    init_layer(model.params.hidden, rng);
    init_layer(model.params.embed, rng);
    init_layer(model.params.output, rng);
    return model;
}

void HeadModel::validate() const {
    config.validate();
    const auto expect = [](const DenseLayer& l, std::size_t in, std::size_t out, const char* name) {
        if (l.inputs != in || l.outputs != out || l.weight.size() != in * out || l.bias.size() != out) {
            fail(ErrorCategory::Shape, std::string("layer ") + name + " shape inconsistent with config");
        }
    };
    expect(params.hidden, config.input_dim, config.hidden_dim, "hidden");
    expect(params.embed, config.hidden_dim, kEmbeddingDim, "embed");
    expect(params.output, kEmbeddingDim, kOutputDim, "output");
    params.for_each([](double v) {
        if (!std::isfinite(v)) fail(ErrorCategory::Domain, "non-finite model parameter");
    });
}

ForwardResult forward(const HeadModel& model, std::span<const double> feature) {
    check_feature(model, feature);
    Trace t;
    run(model.params, feature, t);
    ForwardResult r;
    r.embedding = model.config.tap == EmbeddingTap::PostActivation ? t.embed : t.embed_pre;
    r.raw_prediction = t.output;
    RatingVector::Values clamped;
    for (std::size_t o = 0; o < kOutputDim; ++o) clamped[o] = std::clamp(t.output[o], 0.0, 1.0);
    r.prediction = RatingVector::normalized(clamped);
    return r;
}

double mse_loss(std::span<const double> prediction, std::span<const double> target) {
    if (prediction.size() != target.size() || prediction.empty()) {
        fail(ErrorCategory::Shape, "mse_loss needs equal, non-zero lengths");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < prediction.size(); ++i) {
        const double d = prediction[i] - target[i];
        sum += d * d;
    }
    return sum / static_cast<double>(prediction.size());
}

HeadParams gradients(const HeadModel& model, std::span<const Sample> batch) {
    if (batch.empty()) {
        fail(ErrorCategory::Argument, "gradients of an empty batch");
    }
    HeadParams grads = HeadParams::zeros(model.config.input_dim, model.config.hidden_dim);
    accumulate(model, batch, &grads);
    return grads;
}

double batch_loss(const HeadModel& model, std::span<const Sample> batch) {
    if (batch.empty()) {
        fail(ErrorCategory::Argument, "loss of an empty batch");
    }
    return accumulate(model, batch, nullptr);
}

std::vector<Sample> make_samples(const Dataset& dataset) {
    std::vector<Sample> samples;
    samples.reserve(dataset.size());
    for (const auto& r : dataset.records()) {
        const RatingVector target = normalize_rating(consensus(r.annotations));
        samples.push_back({r.feature, target.values()});
    }
    return samples;
}

TrainResult train(const Dataset& dataset, const HeadConfig& config) {
    if (config.input_dim != dataset.feature_dim()) {
        fail(ErrorCategory::Config, "config input_dim " + std::to_string(config.input_dim) +
                                        " does not match dataset feature_dim " +
                                        std::to_string(dataset.feature_dim()));
    }
    HeadModel model = HeadModel::initialize(config);
    const std::vector<Sample> samples = make_samples(dataset);

    // Shuffles draw from a stream separate from initialization.
    Rng shuffle_rng(derive_seed(config.seed, 1));
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::vector<double> flat = flatten(model.params);
    Adam adam(flat.size(), config.learning_rate);
    HeadParams grads = HeadParams::zeros(config.input_dim, config.hidden_dim);
    std::vector<Sample> batch;
    batch.reserve(config.batch_size);

    TrainReport report;
    report.seed = config.seed;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_rng.shuffle(std::span<std::size_t>(order));
        double epoch_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            batch.clear();
            for (std::size_t i = start; i < end; ++i) batch.push_back(samples[order[i]]);

            grads.for_each([](double& g) { g = 0.0; });
            const double loss = accumulate(model, batch, &grads);
            epoch_sum += loss * static_cast<double>(batch.size());

            const std::vector<double> flat_grads = flatten(grads);
            adam.step(flat, flat_grads);
            unflatten(flat, model.params);
        }
        const double epoch_loss = epoch_sum / static_cast<double>(samples.size());
        if (!std::isfinite(epoch_loss)) {
            fail(ErrorCategory::Divergence, "training loss became non-finite at epoch " +
                                                std::to_string(epoch + 1));
        }
        report.epoch_loss.push_back(epoch_loss);
    }
    report.epochs_run = config.epochs;
    report.final_loss = report.epoch_loss.empty() ? batch_loss(model, samples) : report.epoch_loss.back();
    return {std::move(model), std::move(report)};
}

std::vector<Embedding> embed_all(const HeadModel& model, const Dataset& dataset) {
    std::vector<Embedding> out;
    out.reserve(dataset.size());
    for (const auto& r : dataset.records()) {
        out.push_back({r.nodule_id, forward(model, r.feature).embedding});
    }
    return out;
}

} // namespace ncbir
