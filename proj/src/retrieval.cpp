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

#include "ncbir/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "ncbir/error.hpp"

namespace ncbir {

std::string_view metric_name(Metric metric) {
    return metric == Metric::Euclidean ? "euclidean" : "cosine";
}

Metric parse_metric(std::string_view name) {
    if (name == "euclidean") return Metric::Euclidean;
    if (name == "cosine") return Metric::Cosine;
    fail(ErrorCategory::Config, "unknown metric '" + std::string(name) + "'");
}

double distance(std::span<const double> a, std::span<const double> b, Metric metric) {
    if (a.size() != b.size()) {
        fail(ErrorCategory::Shape, "distance between vectors of length " + std::to_string(a.size()) +
                                       " and " + std::to_string(b.size()));
    }
    if (metric == Metric::Euclidean) {
        double sum = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = a[i] - b[i];
            sum += d * d;
        }
        return std::sqrt(sum);
    }
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 1.0;
    return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

RetrievalIndex::RetrievalIndex(std::vector<IndexEntry> entries, Metric metric)
    : entries_(std::move(entries)), metric_(metric) {
    std::sort(entries_.begin(), entries_.end(),
              [](const IndexEntry& a, const IndexEntry& b) { return a.nodule_id < b.nodule_id; });
    for (std::size_t i = 1; i < entries_.size(); ++i) {
        if (entries_[i].nodule_id == entries_[i - 1].nodule_id) {
            fail(ErrorCategory::Build, "duplicate nodule_id " + entries_[i].nodule_id + " in index");
        }
    }
    if (!entries_.empty()) dim_ = entries_.front().embedding.size();
    for (const auto& e : entries_) {
        if (e.embedding.size() != dim_) {
            fail(ErrorCategory::Shape, "index entry " + e.nodule_id + " has a different embedding length");
        }
        if (e.consensus.scale() != RatingScale::Raw) {
            fail(ErrorCategory::Build, "index entry " + e.nodule_id + " consensus must be raw scale");
        }
    }
}

const IndexEntry& RetrievalIndex::entry(std::string_view nodule_id) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), nodule_id,
                               [](const IndexEntry& e, std::string_view id) { return e.nodule_id < id; });
    if (it == entries_.end() || it->nodule_id != nodule_id) {
        fail(ErrorCategory::Lookup, "nodule " + std::string(nodule_id) + " is not in the index");
    }
    return *it;
}

RetrievalResult RetrievalIndex::query(std::span<const double> embedding, std::size_t k,
                                      const QueryOptions& options, std::string query_id) const {
    if (k < 1) {
        fail(ErrorCategory::Argument, "k must be >= 1");
    }
    if (!entries_.empty() && embedding.size() != dim_) {
        fail(ErrorCategory::Shape, "query length " + std::to_string(embedding.size()) +
                                       " does not match index dimension " + std::to_string(dim_));
    }
    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const IndexEntry& e = entries_[i];
        if (options.exclude_ids.contains(e.nodule_id)) continue;
        if (options.exclude_scan && e.scan_id == *options.exclude_scan) continue;
        scored.emplace_back(distance(embedding, e.embedding, metric_), i);
    }
    // Entries are id-sorted, so comparing positions breaks ties by nodule_id.
    const std::size_t take = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end());

    RetrievalResult result;
    result.query_id = std::move(query_id);
    result.k = k;
    result.truncated = take < k;
    result.neighbors.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        result.neighbors.push_back({entries_[scored[i].second].nodule_id, scored[i].first});
    }
    return result;
}

RetrievalIndex build_index(std::span<const Embedding> embeddings, const Dataset& dataset, Metric metric) {
    if (embeddings.size() != dataset.size()) {
        fail(ErrorCategory::Build, std::to_string(embeddings.size()) + " embeddings for " +
                                       std::to_string(dataset.size()) + " records");
    }
    std::vector<IndexEntry> entries;
    entries.reserve(embeddings.size());
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
        const NoduleRecord& r = dataset[i];
        if (embeddings[i].nodule_id != r.nodule_id) {
            fail(ErrorCategory::Build, "embedding " + embeddings[i].nodule_id +
                                           " does not align with record " + r.nodule_id);
        }
        entries.push_back({r.nodule_id, r.scan_id,
                           std::vector<double>(embeddings[i].values.begin(), embeddings[i].values.end()),
                           consensus(r.annotations), malignancy_class(r.annotations)});
    }
    return {std::move(entries), metric};
}

RetrievalResult query_top_k(const RetrievalIndex& index, std::span<const double> query, std::size_t k,
                            const QueryOptions& options) {
    return index.query(query, k, options);
}

RatingVector predict_ratings_topk(const RetrievalIndex& index, std::span<const double> query,
                                  std::size_t k, const QueryOptions& options) {
    const RetrievalResult result = index.query(query, k, options);
    if (result.neighbors.empty()) {
        fail(ErrorCategory::Retrieval, "no eligible entries to predict from");
    }
    std::vector<RatingVector> picked;
    picked.reserve(result.neighbors.size());
    for (const auto& n : result.neighbors) picked.push_back(index.entry(n.nodule_id).consensus);
    return consensus(picked);
}

} // namespace ncbir
