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

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ncbir/dataset.hpp"

namespace ncbir {

struct Merge {
    std::size_t cluster_a = 0; // smaller index
    std::size_t cluster_b = 0;
    double height = 0.0;
    std::size_t size = 0;
};

// Leaves are 0..n-1; the i-th merge creates internal node n + i.
struct Dendrogram {
    std::size_t leaves = 0;
    std::vector<Merge> merges;

    std::size_t root() const { return 2 * leaves - 2; }
    bool is_leaf(std::size_t node) const { return node < leaves; }
    const Merge& node(std::size_t internal) const { return merges.at(internal - leaves); }
    double height(std::size_t node) const { return is_leaf(node) ? 0.0 : this->node(node).height; }
    std::vector<std::size_t> members(std::size_t node) const;
};

/// Ward minimum-variance agglomerative clustering on euclidean points.
/// Singleton distances are plain euclidean; merged distances follow the
/// Lance-Williams recurrence on squared distances. Ties go to the smallest
/// (cluster_a, cluster_b) pair.
Dendrogram ward_cluster(std::span<const std::vector<double>> points);

struct SplitSide {
    std::vector<std::string> nodule_ids;
    RatingVector mean_rating; // mean raw consensus of the members
};

struct Split {
    std::size_t node = 0;
    double height = 0.0;
    SplitSide left;
    SplitSide right;
};

struct SplitSummary {
    std::vector<Split> splits;
};

/// Splits the root, then repeatedly the highest remaining internal cluster,
/// `depth` times. `records[i]` is the record behind leaf i.
SplitSummary top_splits_summary(const Dendrogram& dendrogram, std::span<const NoduleRecord> records,
                                std::size_t depth = 3);

} // namespace ncbir
