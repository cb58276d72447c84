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

#include "ncbir/ward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ncbir/error.hpp"

namespace ncbir {

std::vector<std::size_t> Dendrogram::members(std::size_t node) const {
    std::vector<std::size_t> out;
    std::vector<std::size_t> stack{node};
    while (!stack.empty()) {
        const std::size_t cur = stack.back();
        stack.pop_back();
        if (is_leaf(cur)) {
            out.push_back(cur);
        } else {
            const Merge& m = this->node(cur);
            stack.push_back(m.cluster_b);
            stack.push_back(m.cluster_a);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

Dendrogram ward_cluster(std::span<const std::vector<double>> points) {
    const std::size_t n = points.size();
    if (n < 2) {
        fail(ErrorCategory::Argument, "ward clustering needs at least 2 points");
    }
    const std::size_t dim = points.front().size();
    for (const auto& p : points) {
        if (p.size() != dim) fail(ErrorCategory::Shape, "ward clustering over mixed dimensions");
    }

    // Squared Ward distances between active slots; slot i holds cluster id[i].
    std::vector<double> d2(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < dim; ++c) {
                const double d = points[i][c] - points[j][c];
                s += d * d;
            }
            d2[i * n + j] = d2[j * n + i] = s;
        }
    }
    std::vector<std::size_t> id(n);
    std::vector<std::size_t> size(n, 1);
    std::vector<bool> active(n, true);
    for (std::size_t i = 0; i < n; ++i) id[i] = i;

    Dendrogram out;
    out.leaves = n;
    out.merges.reserve(n - 1);
    for (std::size_t step = 0; step + 1 < n; ++step) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0;
        std::size_t bj = 0;
        std::pair<std::size_t, std::size_t> best_ids{SIZE_MAX, SIZE_MAX};
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i]) continue;
            for (std::size_t j = i + 1; j < n; ++j) {
                if (!active[j]) continue;
                const double v = d2[i * n + j];
                const std::pair<std::size_t, std::size_t> ids = std::minmax(id[i], id[j]);
                if (v < best || (v == best && ids < best_ids)) {
                    best = v;
                    best_ids = ids;
                    bi = i;
                    bj = j;
                }
            }
        }

        const std::size_t su = size[bi];
        const std::size_t sv = size[bj];
        for (std::size_t w = 0; w < n; ++w) {
            if (!active[w] || w == bi || w == bj) continue;
            const double sw = static_cast<double>(size[w]);
            const double updated =
                ((sw + su) * d2[bi * n + w] + (sw + sv) * d2[bj * n + w] - sw * best) / (sw + su + sv);
            d2[bi * n + w] = d2[w * n + bi] = std::max(0.0, updated);
        }
        out.merges.push_back({best_ids.first, best_ids.second, std::sqrt(best), su + sv});
        active[bj] = false;
        size[bi] = su + sv;
        id[bi] = n + step;
    }
    return out;
}

namespace {

SplitSide summarize(const Dendrogram& dendrogram, std::size_t node, std::span<const NoduleRecord> records) {
    SplitSide side{{}, RatingVector::filled(1.0, RatingScale::Raw)};
    std::vector<RatingVector> member_consensus;
    for (std::size_t leaf : dendrogram.members(node)) {
        side.nodule_ids.push_back(records[leaf].nodule_id);
        member_consensus.push_back(consensus(records[leaf].annotations));
    }
    side.mean_rating = consensus(member_consensus);
    return side;
}

} // namespace

SplitSummary top_splits_summary(const Dendrogram& dendrogram, std::span<const NoduleRecord> records,
                                std::size_t depth) {
    if (dendrogram.leaves < 4) {
        fail(ErrorCategory::InsufficientStructure, "top splits need at least 4 clustered nodules");
    }
    if (records.size() != dendrogram.leaves) {
        fail(ErrorCategory::Join, "dendrogram has " + std::to_string(dendrogram.leaves) + " leaves but " +
                                      std::to_string(records.size()) + " records were given");
    }
    SplitSummary summary;
    std::vector<std::size_t> frontier{dendrogram.root()};
    for (std::size_t s = 0; s < depth; ++s) {
        auto it = std::max_element(frontier.begin(), frontier.end(), [&](std::size_t a, std::size_t b) {
            const double ha = dendrogram.height(a);
            const double hb = dendrogram.height(b);
            return ha < hb || (ha == hb && a < b);
        });
        if (it == frontier.end() || dendrogram.is_leaf(*it)) break;
        const std::size_t node = *it;
        frontier.erase(it);
        const Merge& m = dendrogram.node(node);
        summary.splits.push_back(
            {node, m.height, summarize(dendrogram, m.cluster_a, records), summarize(dendrogram, m.cluster_b, records)});
        frontier.push_back(m.cluster_a);
        frontier.push_back(m.cluster_b);
    }
    return summary;
}

} // namespace ncbir
