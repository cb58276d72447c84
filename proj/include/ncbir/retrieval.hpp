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
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ncbir/dataset.hpp"
#include "ncbir/head.hpp"

namespace ncbir {

enum class Metric { Euclidean, Cosine };

std::string_view metric_name(Metric metric);
Metric parse_metric(std::string_view name);

// Euclidean: L2 norm of a - b. Cosine: 1 - a.b / (|a||b|), defined as 1 when
// either side is the zero vector.
double distance(std::span<const double> a, std::span<const double> b, Metric metric);

struct IndexEntry {
    std::string nodule_id;
    std::string scan_id;
    std::vector<double> embedding;
    RatingVector consensus; // raw scale
    MalignancyClass malignancy;
};

struct Neighbor {
    std::string nodule_id;
    double distance = 0.0;

    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

struct RetrievalResult {
    std::string query_id;
    std::size_t k = 0;
    std::vector<Neighbor> neighbors; // ascending (distance, nodule_id)
    bool truncated = false;          // fewer than k eligible entries
};

struct QueryOptions {
    std::set<std::string, std::less<>> exclude_ids;
    std::optional<std::string> exclude_scan;
};

/// Exact, exhaustive nearest-neighbor index. Entries are kept sorted by
/// nodule_id and never mutated after build.
class RetrievalIndex {
public:
    RetrievalIndex(std::vector<IndexEntry> entries, Metric metric);

    Metric metric() const noexcept { return metric_; }
    std::size_t size() const noexcept { return entries_.size(); }
    std::size_t dim() const noexcept { return dim_; }
    const std::vector<IndexEntry>& entries() const noexcept { return entries_; }
    const IndexEntry& entry(std::string_view nodule_id) const;

    RetrievalResult query(std::span<const double> embedding, std::size_t k,
                          const QueryOptions& options = {}, std::string query_id = {}) const;

private:
    std::vector<IndexEntry> entries_;
    Metric metric_;
    std::size_t dim_ = 0;
};

/// Pairs each embedding with its dataset record; the embedding ids must
/// match the dataset records one-to-one in order.
RetrievalIndex build_index(std::span<const Embedding> embeddings, const Dataset& dataset, Metric metric);

RetrievalResult query_top_k(const RetrievalIndex& index, std::span<const double> query, std::size_t k,
                            const QueryOptions& options = {});

/// Unweighted component-wise mean of the retrieved entries' raw consensus.
RatingVector predict_ratings_topk(const RetrievalIndex& index, std::span<const double> query,
                                  std::size_t k, const QueryOptions& options = {});

} // namespace ncbir
