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

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ncbir/dataset.hpp"

namespace ncbir {

inline constexpr std::size_t kEmbeddingDim = 10;
inline constexpr std::size_t kOutputDim = kNumCharacteristics;

// Which activation of the second layer is exported as the embedding.
enum class EmbeddingTap { PostActivation, PreActivation };

struct HeadConfig {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 64;
    double learning_rate = 1e-3;
    std::size_t epochs = 200;
    std::size_t batch_size = 32;
    std::uint64_t seed = 42;
    EmbeddingTap tap = EmbeddingTap::PostActivation;

    void validate() const;
};

/// Fully connected layer, weight stored row-major as (outputs x inputs).
struct DenseLayer {
    std::size_t inputs = 0;
    std::size_t outputs = 0;
    std::vector<double> weight;
    std::vector<double> bias;

    DenseLayer() = default;
    DenseLayer(std::size_t in, std::size_t out)
        : inputs(in), outputs(out), weight(in * out, 0.0), bias(out, 0.0) {}

    double& w(std::size_t row, std::size_t col) { return weight[row * inputs + col]; }
    double w(std::size_t row, std::size_t col) const { return weight[row * inputs + col]; }

    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

// Parameters of the three-layer head:
//   hidden = relu(W1 x + b1), embed = relu(W2 hidden + b2), out = W3 embed + b3.
// Gradients share this shape, so the same type carries both.
struct HeadParams {
    DenseLayer hidden;
    DenseLayer embed;
    DenseLayer output;

    static HeadParams zeros(std::size_t input_dim, std::size_t hidden_dim);

    std::size_t parameter_count() const;

    // Visits every scalar in a fixed order: each layer's weights then bias.
    template <typename Fn>
    void for_each(Fn&& fn) {
        for (DenseLayer* layer : {&hidden, &embed, &output}) {
            for (double& v : layer->weight) fn(v);
            for (double& v : layer->bias) fn(v);
        }
    }
    template <typename Fn>
    void for_each(Fn&& fn) const {
        for (const DenseLayer* layer : {&hidden, &embed, &output}) {
            for (double v : layer->weight) fn(v);
            for (double v : layer->bias) fn(v);
        }
    }

    friend bool operator==(const HeadParams&, const HeadParams&) = default;
};

struct HeadModel {
    HeadConfig config;
    HeadParams params;

    // Seeded uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization.
    static HeadModel initialize(const HeadConfig& config);

    void validate() const;
};

struct Embedding {
    std::string nodule_id;
    std::array<double, kEmbeddingDim> values{};
};

struct ForwardResult {
    std::array<double, kEmbeddingDim> embedding{};
    std::array<double, kOutputDim> raw_prediction{};
    RatingVector prediction = RatingVector::filled(0.0, RatingScale::Normalized); // clamped to [0,1]
};

ForwardResult forward(const HeadModel& model, std::span<const double> feature);

double mse_loss(std::span<const double> prediction, std::span<const double> target);

struct Sample {
    std::span<const double> feature;
    std::array<double, kOutputDim> target{};
};

/// Exact gradient of the mean batch MSE with respect to every parameter.
/// The relu subgradient at zero is taken as zero.
HeadParams gradients(const HeadModel& model, std::span<const Sample> batch);

/// Mean batch MSE of the unclamped outputs.
double batch_loss(const HeadModel& model, std::span<const Sample> batch);

struct TrainReport {
    std::vector<double> epoch_loss;
    double final_loss = 0.0;
    std::size_t epochs_run = 0;
    std::uint64_t seed = 0;
};

struct TrainResult {
    HeadModel model;
    TrainReport report;
};

// Targets are normalize(consensus(annotations)) per nodule.
std::vector<Sample> make_samples(const Dataset& dataset);

/// Mini-batch Adam on the head parameters. Serial and fully determined by
/// config.seed: initialization and the per-epoch shuffles both draw from it.
TrainResult train(const Dataset& dataset, const HeadConfig& config);

std::vector<Embedding> embed_all(const HeadModel& model, const Dataset& dataset);

} // namespace ncbir
