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

#include "ncbir/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <utility>

#include "ncbir/error.hpp"
#include "ncbir/rng.hpp"

namespace ncbir {

namespace {

constexpr double kRawMin = 1.0;
constexpr double kRawMax = 5.0;
constexpr double kRawSpan = kRawMax - kRawMin;
constexpr double kFeatureNoise = 0.05;

void check_range(const RatingVector::Values& values, RatingScale scale) {
    const double lo = scale == RatingScale::Raw ? kRawMin : 0.0;
    const double hi = scale == RatingScale::Raw ? kRawMax : 1.0;
    for (std::size_t c = 0; c < kNumCharacteristics; ++c) {
        const double v = values[c];
        if (!(v >= lo && v <= hi)) {
            fail(ErrorCategory::Domain,
                 std::string(kCharacteristicNames[c]) + " = " + std::to_string(v) + " outside " +
                     std::string(scale_name(scale)) + " range [" + std::to_string(lo) + ", " +
                     std::to_string(hi) + "]");
        }
    }
}

std::string numbered_id(char prefix, std::size_t n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%c%05zu", prefix, n);
    return buf;
}

} // namespace

std::string_view scale_name(RatingScale scale) {
    return scale == RatingScale::Raw ? "raw" : "normalized";
}

std::string_view class_name(MalignancyClass cls) {
    return cls == MalignancyClass::Malignant ? "malignant" : "benign";
}

std::string_view provenance_name(Provenance provenance) {
    return provenance == Provenance::Real ? "real" : "synthetic";
}

RatingVector::RatingVector(const Values& values, RatingScale scale) : values_(values), scale_(scale) {
    check_range(values_, scale_);
}

RatingVector RatingVector::filled(double value, RatingScale scale) {
    Values v;
    v.fill(value);
    return {v, scale};
}

RatingVector normalize_rating(const RatingVector& raw) {
    if (raw.scale() != RatingScale::Raw) {
        fail(ErrorCategory::Argument, "normalize_rating expects a raw-scale rating");
    }
    RatingVector::Values out;
    for (std::size_t c = 0; c < kNumCharacteristics; ++c) {
        out[c] = (raw[c] - kRawMin) / kRawSpan;
    }
    return RatingVector::normalized(out);
}

RatingVector denormalize_rating(const RatingVector& normalized) {
    if (normalized.scale() != RatingScale::Normalized) {
        fail(ErrorCategory::Argument, "denormalize_rating expects a normalized rating");
    }
    RatingVector::Values out;
    for (std::size_t c = 0; c < kNumCharacteristics; ++c) {
        // Clamp guards against 1 + 4x rounding a hair past 5.
        out[c] = std::clamp(kRawMin + kRawSpan * normalized[c], kRawMin, kRawMax);
    }
    return RatingVector::raw(out);
}

RatingVector consensus(std::span<const RatingVector> ratings) {
    if (ratings.empty()) {
        fail(ErrorCategory::Argument, "consensus of an empty rating list");
    }
    const RatingScale scale = ratings.front().scale();
    RatingVector::Values sum{};
    for (const auto& r : ratings) {
        if (r.scale() != scale) {
            fail(ErrorCategory::Argument, "consensus over mixed rating scales");
        }
        for (std::size_t c = 0; c < kNumCharacteristics; ++c) {
            sum[c] += r[c];
        }
    }
    const double n = static_cast<double>(ratings.size());
    const double lo = scale == RatingScale::Raw ? kRawMin : 0.0;
    const double hi = scale == RatingScale::Raw ? kRawMax : 1.0;
    for (auto& s : sum) {
        s = std::clamp(s / n, lo, hi);
    }
    return {sum, scale};
}

MalignancyClass malignancy_class(std::span<const RatingVector> raw_ratings) {
    if (raw_ratings.empty()) {
        fail(ErrorCategory::Argument, "malignancy_class of an empty rating list");
    }
    double sum = 0.0;
    for (const auto& r : raw_ratings) {
        if (r.scale() != RatingScale::Raw) {
            fail(ErrorCategory::Argument, "malignancy_class expects raw-scale ratings");
        }
        sum += r[kMalignancyIndex];
    }
    const double mean = sum / static_cast<double>(raw_ratings.size());
    return mean > 3.0 ? MalignancyClass::Malignant : MalignancyClass::Benign;
}

Dataset::Dataset(std::vector<NoduleRecord> records, std::size_t feature_dim, Provenance provenance)
    : records_(std::move(records)), feature_dim_(feature_dim), provenance_(provenance) {
    if (records_.empty()) {
        fail(ErrorCategory::EmptyDataset, "dataset has no records");
    }
    for (std::size_t i = 0; i < records_.size(); ++i) {
        const auto& r = records_[i];
        if (r.feature.size() != feature_dim_) {
            fail(ErrorCategory::Shape, "record " + r.nodule_id + " has feature length " +
                                           std::to_string(r.feature.size()) + ", expected " +
                                           std::to_string(feature_dim_));
        }
        for (double v : r.feature) {
            if (!std::isfinite(v)) {
                fail(ErrorCategory::Domain, "record " + r.nodule_id + " has a non-finite feature");
            }
        }
        if (r.annotations.empty()) {
            fail(ErrorCategory::Argument, "record " + r.nodule_id + " has no annotations");
        }
        for (const auto& a : r.annotations) {
            if (a.scale() != RatingScale::Raw) {
                fail(ErrorCategory::Argument, "record " + r.nodule_id + " stores non-raw annotations");
            }
        }
        if (!by_id_.emplace(r.nodule_id, i).second) {
            fail(ErrorCategory::Build, "duplicate nodule_id " + r.nodule_id);
        }
    }
}

std::size_t Dataset::index_of(std::string_view nodule_id) const {
    auto it = by_id_.find(nodule_id);
    if (it == by_id_.end()) {
        fail(ErrorCategory::Lookup, "unknown nodule_id " + std::string(nodule_id));
    }
    return it->second;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    std::vector<NoduleRecord> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) {
        out.push_back(records_.at(i));
    }
    return {std::move(out), feature_dim_, provenance_};
}

FilterResult filter_dataset(std::vector<NoduleRecord> raw_records, std::size_t feature_dim,
                            Provenance provenance) {
    std::vector<NoduleRecord> kept;
    std::size_t dropped = 0;
    for (auto& r : raw_records) {
        if (r.annotations.size() > kMaxAnnotations) {
            fail(ErrorCategory::Argument, "record " + r.nodule_id + " has " +
                                              std::to_string(r.annotations.size()) +
                                              " annotations; at most 4 are possible");
        }
        if (r.annotations.size() >= kMinAnnotations) {
            kept.push_back(std::move(r));
        } else {
            ++dropped;
        }
    }
    if (kept.empty()) {
        fail(ErrorCategory::EmptyDataset, "no record has at least 3 annotations");
    }
    const std::size_t n_kept = kept.size();
    return {Dataset(std::move(kept), feature_dim, provenance), n_kept, dropped};
}

FoldAssignment::FoldAssignment(std::size_t n_folds, std::uint64_t seed,
                               std::map<std::string, std::size_t> fold_of)
    : n_folds_(n_folds), seed_(seed), fold_of_(std::move(fold_of)) {
    for (const auto& [id, fold] : fold_of_) {
        if (fold >= n_folds_) {
            fail(ErrorCategory::Argument, "fold index out of range for " + id);
        }
    }
}

std::size_t FoldAssignment::fold_of(std::string_view nodule_id) const {
    auto it = fold_of_.find(std::string(nodule_id));
    if (it == fold_of_.end()) {
        fail(ErrorCategory::Lookup, "nodule " + std::string(nodule_id) + " has no fold");
    }
    return it->second;
}

std::vector<std::size_t> FoldAssignment::test_indices(const Dataset& dataset, std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (fold_of(dataset[i].nodule_id) == fold) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> FoldAssignment::train_indices(const Dataset& dataset, std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (fold_of(dataset[i].nodule_id) != fold) out.push_back(i);
    }
    return out;
}

FoldAssignment assign_folds(const Dataset& dataset, std::size_t n_folds, std::uint64_t seed) {
    std::set<std::string> scan_set;
    for (const auto& r : dataset.records()) scan_set.insert(r.scan_id);
    std::vector<std::string> scans(scan_set.begin(), scan_set.end());
    if (n_folds < 2 || n_folds > scans.size()) {
        fail(ErrorCategory::Argument, "n_folds = " + std::to_string(n_folds) + " must lie in [2, " +
                                          std::to_string(scans.size()) + "] (distinct scans)");
    }
    Rng rng(seed);
    rng.shuffle(std::span<std::string>(scans));
    std::map<std::string, std::size_t> fold_of_scan;
    for (std::size_t i = 0; i < scans.size(); ++i) {
        fold_of_scan[scans[i]] = i % n_folds;
    }
    std::map<std::string, std::size_t> fold_of;
    for (const auto& r : dataset.records()) {
        fold_of[r.nodule_id] = fold_of_scan.at(r.scan_id);
    }
    return {n_folds, seed, std::move(fold_of)};
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
    if (spec.n_nodules < 1) {
        fail(ErrorCategory::Argument, "n_nodules must be >= 1");
    }
    if (spec.feature_dim < kNumCharacteristics) {
        fail(ErrorCategory::Argument, "feature_dim must be >= 5");
    }
    if (spec.doctors_per_nodule != 3 && spec.doctors_per_nodule != 4) {
        fail(ErrorCategory::Argument, "doctors_per_nodule must be 3 or 4");
    }
    if (!(spec.noise_sigma >= 0.0) || !std::isfinite(spec.noise_sigma)) {
        fail(ErrorCategory::Argument, "noise_sigma must be finite and >= 0");
    }

    Rng rng(spec.seed);
    const std::size_t dim = spec.feature_dim;
    std::vector<double> mixing(dim * kNumCharacteristics);
    std::vector<double> offset(dim);
    for (auto& a : mixing) a = rng.normal();
    for (auto& b : offset) b = rng.normal();

    std::vector<NoduleRecord> records;
    records.reserve(spec.n_nodules);
    std::size_t scan = 0;
    for (std::size_t n = 0; n < spec.n_nodules; ++n) {
        // Roughly 1.4 nodules per scan, like LIDC.
        if (n > 0 && rng.uniform() < 0.7) ++scan;

        std::array<double, kNumCharacteristics> latent;
        for (auto& z : latent) z = rng.uniform();

        NoduleRecord record;
        record.nodule_id = numbered_id('N', n);
        record.scan_id = numbered_id('S', scan);
        record.feature.resize(dim);
        for (std::size_t d = 0; d < dim; ++d) {
            double v = offset[d];
            for (std::size_t c = 0; c < kNumCharacteristics; ++c) {
                v += mixing[d * kNumCharacteristics + c] * latent[c];
            }
            record.feature[d] = v + rng.normal(0.0, kFeatureNoise);
        }
        for (std::size_t doc = 0; doc < spec.doctors_per_nodule; ++doc) {
            RatingVector::Values raw;
            for (std::size_t c = 0; c < kNumCharacteristics; ++c) {
                const double noise = spec.noise_sigma * rng.normal();
                raw[c] = std::clamp(kRawMin + kRawSpan * latent[c] + noise, kRawMin, kRawMax);
            }
            record.annotations.push_back(RatingVector::raw(raw));
        }
        records.push_back(std::move(record));
    }
    return {std::move(records), dim, Provenance::Synthetic};
}

} // namespace ncbir
