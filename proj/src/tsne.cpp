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

#include "ncbir/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ncbir/error.hpp"
#include "ncbir/rng.hpp"

namespace ncbir {

namespace {

constexpr double kMinProbability = 1e-12;
constexpr double kMinGain = 0.01;

// Fills row with exp(-beta * (d - d_min)) normalized, returns entropy in bits.
double conditional_row(std::span<const double> sq_dist, std::size_t self, double beta, std::span<double> row) {
    double d_min = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < sq_dist.size(); ++j) {
        if (j != self) d_min = std::min(d_min, sq_dist[j]);
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < sq_dist.size(); ++j) {
        row[j] = j == self ? 0.0 : std::exp(-beta * (sq_dist[j] - d_min));
        sum += row[j];
    }
    double entropy = 0.0;
    for (std::size_t j = 0; j < sq_dist.size(); ++j) {
        row[j] /= sum;
        if (row[j] > 0.0) entropy -= row[j] * std::log2(row[j]);
    }
    return entropy;
}

} // namespace

Affinities joint_affinities(std::span<const std::vector<double>> points, double perplexity) {
    const std::size_t n = points.size();
    if (n < 5) {
        fail(ErrorCategory::Argument, "t-SNE needs at least 5 points");
    }
    if (!(perplexity > 1.0) || !(perplexity < static_cast<double>(n - 1) / 3.0)) {
        fail(ErrorCategory::Argument, "perplexity " + std::to_string(perplexity) + " infeasible for " +
                                          std::to_string(n) + " points (needs 1 < perplexity < (n-1)/3)");
    }
    const std::size_t dim = points.front().size();
    std::vector<double> sq(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (points[i].size() != dim) fail(ErrorCategory::Shape, "t-SNE input over mixed dimensions");
        for (std::size_t j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < dim; ++c) {
                const double d = points[i][c] - points[j][c];
                s += d * d;
            }
            sq[i * n + j] = sq[j * n + i] = s;
        }
    }

    const double target = std::log2(perplexity);
    Affinities out;
    out.n = n;
    out.row_entropy_bits.resize(n);
    out.beta.resize(n);
    std::vector<double> cond(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        std::span<const double> dist(sq.data() + i * n, n);
        std::span<double> row(cond.data() + i * n, n);
        // Bisection on log(beta): entropy falls monotonically as beta grows.
        double lo = -50.0;
        double hi = 50.0;
        double log_beta = 0.0;
        double entropy = conditional_row(dist, i, 1.0, row);
        for (std::size_t step = 0; step < kMaxBisectionSteps && std::abs(entropy - target) >= kEntropyTolerance;
             ++step) {
            if (entropy > target) {
                lo = log_beta;
            } else {
                hi = log_beta;
            }
            log_beta = 0.5 * (lo + hi);
            entropy = conditional_row(dist, i, std::exp(log_beta), row);
        }
        out.row_entropy_bits[i] = entropy;
        out.beta[i] = std::exp(log_beta);
    }

    out.p.assign(n * n, 0.0);
    const double denom = 2.0 * static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            out.p[i * n + j] = (cond[i * n + j] + cond[j * n + i]) / denom;
        }
    }
    return out;
}

double kl_divergence(const Affinities& affinities, std::span<const std::array<double, 2>> layout) {
    const std::size_t n = affinities.n;
    if (layout.size() != n) {
        fail(ErrorCategory::Shape, "layout size does not match the affinity matrix");
    }
    double z = 0.0;
    std::vector<double> num(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = layout[i][0] - layout[j][0];
            const double dy = layout[i][1] - layout[j][1];
            const double q = 1.0 / (1.0 + dx * dx + dy * dy);
            num[i * n + j] = num[j * n + i] = q;
            z += 2.0 * q;
        }
    }
    double kl = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double p = affinities(i, j);
            if (i == j || p <= 0.0) continue;
            const double q = std::max(num[i * n + j] / z, kMinProbability);
            kl += p * std::log(p / q);
        }
    }
    return kl;
}

TsneResult tsne(std::span<const std::vector<double>> points, const TsneConfig& config) {
    if (config.iterations < 1) {
        fail(ErrorCategory::Argument, "t-SNE iterations must be >= 1");
    }
    const Affinities affinities = joint_affinities(points, config.perplexity);
    const std::size_t n = points.size();

    Rng rng(config.seed);
    std::vector<std::array<double, 2>> y(n);
    for (auto& p : y) {
        p[0] = rng.normal(0.0, 1e-4);
        p[1] = rng.normal(0.0, 1e-4);
    }
    std::vector<std::array<double, 2>> velocity(n, {0.0, 0.0});
    std::vector<std::array<double, 2>> gains(n, {1.0, 1.0});
    std::vector<std::array<double, 2>> grad(n);
    std::vector<double> num(n * n, 0.0);

    TsneResult result;
    for (std::size_t iter = 1; iter <= config.iterations; ++iter) {
        const bool exaggerate = iter <= config.exaggeration_iters;
        const double factor = exaggerate ? config.exaggeration : 1.0;
        const double momentum = iter <= config.momentum_switch_iter ? config.initial_momentum : config.final_momentum;

        double z = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const double dx = y[i][0] - y[j][0];
                const double dy = y[i][1] - y[j][1];
                const double q = 1.0 / (1.0 + dx * dx + dy * dy);
                num[i * n + j] = num[j * n + i] = q;
                z += 2.0 * q;
            }
        }
        // dC/dy_i = 4 sum_j (p_ij - q_ij) (1 + |y_i - y_j|^2)^-1 (y_i - y_j)
        for (std::size_t i = 0; i < n; ++i) {
            double gx = 0.0;
            double gy = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                const double w = num[i * n + j];
                const double mult = (factor * affinities(i, j) - w / z) * w;
                gx += mult * (y[i][0] - y[j][0]);
                gy += mult * (y[i][1] - y[j][1]);
            }
            grad[i] = {4.0 * gx, 4.0 * gy};
        }

        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t c = 0; c < 2; ++c) {
                double& g = gains[i][c];
                g = (grad[i][c] > 0.0) != (velocity[i][c] > 0.0) ? g + 0.2 : g * 0.8;
                g = std::max(g, kMinGain);
                velocity[i][c] = momentum * velocity[i][c] - config.learning_rate * g * grad[i][c];
                y[i][c] += velocity[i][c];
            }
        }
        std::array<double, 2> mean{0.0, 0.0};
        for (const auto& p : y) {
            mean[0] += p[0];
            mean[1] += p[1];
        }
        for (auto& p : y) {
            p[0] -= mean[0] / static_cast<double>(n);
            p[1] -= mean[1] / static_cast<double>(n);
        }

        if (std::find(config.kl_checkpoints.begin(), config.kl_checkpoints.end(), iter) !=
            config.kl_checkpoints.end()) {
            result.kl_trace.emplace_back(iter, kl_divergence(affinities, y));
        }
    }
    for (const auto& p : y) {
        if (!std::isfinite(p[0]) || !std::isfinite(p[1])) {
            fail(ErrorCategory::Divergence, "t-SNE layout became non-finite");
        }
    }
    result.layout = std::move(y);
    return result;
}

std::vector<ProjectedPoint> color_by_malignancy(std::span<const std::string> nodule_ids,
                                                std::span<const std::array<double, 2>> layout,
                                                const Dataset& dataset) {
    if (nodule_ids.size() != layout.size()) {
        fail(ErrorCategory::Join, "projection ids and coordinates differ in length");
    }
    std::vector<ProjectedPoint> out;
    out.reserve(layout.size());
    for (std::size_t i = 0; i < layout.size(); ++i) {
        std::size_t idx = 0;
        try {
            idx = dataset.index_of(nodule_ids[i]);
        } catch (const Error&) {
            fail(ErrorCategory::Join, "projected nodule " + nodule_ids[i] + " is not in the dataset");
        }
        out.push_back({nodule_ids[i], layout[i], malignancy_class(dataset[idx].annotations)});
    }
    return out;
}

} // namespace ncbir
