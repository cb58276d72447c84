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

struct TsneConfig {
    double perplexity = 30.0;
    std::size_t iterations = 1000;
    double learning_rate = 200.0;
    double initial_momentum = 0.5;
    double final_momentum = 0.8;
    std::size_t momentum_switch_iter = 250;
    double exaggeration = 12.0;
    std::size_t exaggeration_iters = 250;
    std::uint64_t seed = 42;
    // Iterations (1-based) after which the KL divergence is recorded.
    std::vector<std::size_t> kl_checkpoints = {250, 1000};
};

// Row-major n x n joint affinity matrix.
struct Affinities {
    std::size_t n = 0;
    std::vector<double> p;
    std::vector<double> row_entropy_bits; // H(P_i) of the conditional rows after calibration
    std::vector<double> beta;             // 1 / (2 sigma_i^2)

    double operator()(std::size_t i, std::size_t j) const { return p[i * n + j]; }
};

inline constexpr double kEntropyTolerance = 1e-5;
inline constexpr std::size_t kMaxBisectionSteps = 50;

/// Calibrates per-point Gaussian bandwidths by bisection so each conditional
/// row has entropy log2(perplexity), then symmetrizes to
/// P = (P_cond + P_cond^T) / (2n).
Affinities joint_affinities(std::span<const std::vector<double>> points, double perplexity);

/// KL(P || Q) for a 2-D layout with Student-t affinities Q.
double kl_divergence(const Affinities& affinities, std::span<const std::array<double, 2>> layout);

struct TsneResult {
    std::vector<std::array<double, 2>> layout;
    std::vector<std::pair<std::size_t, double>> kl_trace; // (iteration, KL)
};

/// Exact t-SNE to two dimensions.
TsneResult tsne(std::span<const std::vector<double>> points, const TsneConfig& config);

struct ProjectedPoint {
    std::string nodule_id;
    std::array<double, 2> xy{};
    MalignancyClass malignancy = MalignancyClass::Benign;
};

/// Tags each projected point with its record's malignancy class.
std::vector<ProjectedPoint> color_by_malignancy(std::span<const std::string> nodule_ids,
                                                std::span<const std::array<double, 2>> layout,
                                                const Dataset& dataset);

} // namespace ncbir
