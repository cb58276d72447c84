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

// Reference implementations used only by tests. Each is written
// independently of the library code path it checks.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "ncbir/head.hpp"
#include "ncbir/retrieval.hpp"
#include "ncbir/ward.hpp"

namespace ncbir::oracle {

// Plain nested-loop forward pass of the head.
struct Forward {
    std::vector<double> embedding;
    std::vector<double> output;
};

inline Forward forward(const HeadParams& p, const std::vector<double>& x) {
    std::vector<double> h(p.hidden.outputs);
    for (std::size_t r = 0; r < h.size(); ++r) {
        double s = p.hidden.bias[r];
        for (std::size_t c = 0; c < x.size(); ++c) s += p.hidden.weight[r * x.size() + c] * x[c];
        h[r] = s > 0 ? s : 0;
    }
    std::vector<double> e(p.embed.outputs);
    for (std::size_t r = 0; r < e.size(); ++r) {
        double s = p.embed.bias[r];
        for (std::size_t c = 0; c < h.size(); ++c) s += p.embed.weight[r * h.size() + c] * h[c];
        e[r] = s > 0 ? s : 0;
    }
    std::vector<double> y(p.output.outputs);
    for (std::size_t r = 0; r < y.size(); ++r) {
        double s = p.output.bias[r];
        for (std::size_t c = 0; c < e.size(); ++c) s += p.output.weight[r * e.size() + c] * e[c];
        y[r] = s;
    }
    return {e, y};
}

// Loss in extended precision so that finite differences at small steps are
// not swamped by rounding.
inline long double batch_mse(const HeadParams& p, const std::vector<std::vector<double>>& xs,
                             const std::vector<std::array<double, 5>>& targets) {
    using L = long double;
    const auto layer = [](const DenseLayer& l, const std::vector<L>& in, bool relu) {
        std::vector<L> out(l.outputs);
        for (std::size_t r = 0; r < out.size(); ++r) {
            L s = l.bias[r];
            for (std::size_t c = 0; c < in.size(); ++c) s += static_cast<L>(l.weight[r * in.size() + c]) * in[c];
            out[r] = relu && s < 0 ? 0 : s;
        }
        return out;
    };
    L total = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const std::vector<L> x(xs[i].begin(), xs[i].end());
        const auto y = layer(p.output, layer(p.embed, layer(p.hidden, x, true), true), false);
        L s = 0;
        for (std::size_t o = 0; o < 5; ++o) s += (y[o] - targets[i][o]) * (y[o] - targets[i][o]);
        total += s / 5;
    }
    return total / static_cast<L>(xs.size());
}

// Central finite differences of the batch loss, one parameter at a time.
inline std::vector<double> finite_difference_gradient(HeadParams p, const std::vector<std::vector<double>>& xs,
                                                      const std::vector<std::array<double, 5>>& targets,
                                                      double step) {
    std::vector<double*> slots;
    p.for_each([&](double& v) { slots.push_back(&v); });
    std::vector<double> out;
    out.reserve(slots.size());
    for (double* v : slots) {
        const double saved = *v;
        const double hi = saved + step;
        const double lo = saved - step;
        *v = hi;
        const long double up = batch_mse(p, xs, targets);
        *v = lo;
        const long double down = batch_mse(p, xs, targets);
        *v = saved;
        out.push_back(static_cast<double>((up - down) / (static_cast<long double>(hi) - lo)));
    }
    return out;
}

// Full sort of every eligible entry by (distance, id).
inline std::vector<std::pair<std::string, double>> full_sort_top_k(
    const std::vector<std::pair<std::string, std::vector<double>>>& entries, const std::vector<double>& query,
    std::size_t k, Metric metric, const std::string& excluded = {}) {
    std::vector<std::pair<double, std::string>> all;
    for (const auto& [id, v] : entries) {
        if (id == excluded) continue;
        double d = 0.0;
        if (metric == Metric::Euclidean) {
            double s = 0.0;
            for (std::size_t i = 0; i < v.size(); ++i) s += (v[i] - query[i]) * (v[i] - query[i]);
            d = std::sqrt(s);
        } else {
            double dot = 0.0, a = 0.0, b = 0.0;
            for (std::size_t i = 0; i < v.size(); ++i) {
                dot += v[i] * query[i];
                a += v[i] * v[i];
                b += query[i] * query[i];
            }
            d = (a == 0.0 || b == 0.0) ? 1.0 : 1.0 - dot / (std::sqrt(a) * std::sqrt(b));
        }
        all.emplace_back(d, id);
    }
    std::sort(all.begin(), all.end());
    std::vector<std::pair<std::string, double>> out;
    for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.emplace_back(all[i].second, all[i].first);
    return out;
}

// Ward clustering by recomputing every cluster centroid at each step:
// merge cost between A and B is sqrt(2|A||B|/(|A|+|B|)) * |c_A - c_B|.
inline std::vector<Merge> naive_ward(const std::vector<std::vector<double>>& points) {
    struct Cluster {
        std::size_t id;
        std::vector<std::size_t> members;
    };
    const std::size_t n = points.size();
    const std::size_t dim = points.front().size();
    std::vector<Cluster> clusters;
    for (std::size_t i = 0; i < n; ++i) clusters.push_back({i, {i}});
    const auto centroid = [&](const Cluster& c) {
        std::vector<double> m(dim, 0.0);
        for (std::size_t i : c.members)
            for (std::size_t d = 0; d < dim; ++d) m[d] += points[i][d];
        for (double& v : m) v /= static_cast<double>(c.members.size());
        return m;
    };
    std::vector<Merge> merges;
    for (std::size_t step = 0; step + 1 < n; ++step) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t ba = 0, bb = 0;
        std::pair<std::size_t, std::size_t> best_ids{SIZE_MAX, SIZE_MAX};
        for (std::size_t a = 0; a < clusters.size(); ++a) {
            const auto ca = centroid(clusters[a]);
            for (std::size_t b = a + 1; b < clusters.size(); ++b) {
                const auto cb = centroid(clusters[b]);
                double s = 0.0;
                for (std::size_t d = 0; d < dim; ++d) s += (ca[d] - cb[d]) * (ca[d] - cb[d]);
                const double na = static_cast<double>(clusters[a].members.size());
                const double nb = static_cast<double>(clusters[b].members.size());
                const double cost = std::sqrt(2.0 * na * nb / (na + nb) * s);
                const std::pair<std::size_t, std::size_t> ids = std::minmax(clusters[a].id, clusters[b].id);
                if (cost < best || (cost == best && ids < best_ids)) {
                    best = cost;
                    best_ids = ids;
                    ba = a;
                    bb = b;
                }
            }
        }
        Cluster merged{n + step, clusters[ba].members};
        merged.members.insert(merged.members.end(), clusters[bb].members.begin(), clusters[bb].members.end());
        merges.push_back({best_ids.first, best_ids.second, best, merged.members.size()});
        clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bb));
        clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(ba));
        clusters.push_back(std::move(merged));
    }
    return merges;
}

} // namespace ncbir::oracle
