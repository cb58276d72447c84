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
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ncbir {

inline constexpr std::size_t kNumCharacteristics = 5;

// Fixed characteristic order used everywhere ratings are stored or serialized.
inline constexpr std::array<std::string_view, kNumCharacteristics> kCharacteristicNames = {
    "subtlety", "sphericity", "margin", "lobulation", "malignancy"};

inline constexpr std::size_t kMalignancyIndex = 4;

enum class RatingScale { Raw, Normalized };

std::string_view scale_name(RatingScale scale);

/// Five characteristic scores tagged with their scale. Raw scores live in
/// [1, 5], normalized scores in [0, 1]; construction validates the range.
class RatingVector {
public:
    using Values = std::array<double, kNumCharacteristics>;

    RatingVector(const Values& values, RatingScale scale);

    static RatingVector raw(const Values& values) { return {values, RatingScale::Raw}; }
    static RatingVector normalized(const Values& values) { return {values, RatingScale::Normalized}; }
    static RatingVector filled(double value, RatingScale scale);

    const Values& values() const noexcept { return values_; }
    RatingScale scale() const noexcept { return scale_; }
    double operator[](std::size_t i) const { return values_[i]; }

    friend bool operator==(const RatingVector&, const RatingVector&) = default;

private:
    Values values_;
    RatingScale scale_;
};

/// x -> (x - 1) / 4 per component. Throws a domain error naming the
/// offending characteristic when the input is outside [1, 5].
RatingVector normalize_rating(const RatingVector& raw);

/// x -> 1 + 4x per component.
RatingVector denormalize_rating(const RatingVector& normalized);

/// Component-wise mean; the scale tag of the inputs is preserved.
RatingVector consensus(std::span<const RatingVector> ratings);

enum class MalignancyClass { Benign, Malignant };

std::string_view class_name(MalignancyClass cls);

/// Malignant iff the mean raw malignancy score is strictly above 3.
MalignancyClass malignancy_class(std::span<const RatingVector> raw_ratings);

struct NoduleRecord {
    std::string nodule_id;
    std::string scan_id;
    std::vector<RatingVector> annotations; // raw scale
    std::vector<double> feature;
};

enum class Provenance { Real, Synthetic };

std::string_view provenance_name(Provenance provenance);

// Non-empty set of records with unique ids and a uniform, finite feature
// dimension. Immutable after construction.
class Dataset {
public:
    Dataset(std::vector<NoduleRecord> records, std::size_t feature_dim, Provenance provenance);

    const std::vector<NoduleRecord>& records() const noexcept { return records_; }
    std::size_t size() const noexcept { return records_.size(); }
    std::size_t feature_dim() const noexcept { return feature_dim_; }
    Provenance provenance() const noexcept { return provenance_; }
    const NoduleRecord& operator[](std::size_t i) const { return records_[i]; }

    // Index of the record with the given id; lookup error if absent.
    std::size_t index_of(std::string_view nodule_id) const;

    Dataset subset(std::span<const std::size_t> indices) const;

private:
    std::vector<NoduleRecord> records_;
    std::size_t feature_dim_;
    Provenance provenance_;
    std::map<std::string, std::size_t, std::less<>> by_id_;
};

inline constexpr std::size_t kMinAnnotations = 3;
inline constexpr std::size_t kMaxAnnotations = 4;

struct FilterResult {
    Dataset dataset;
    std::size_t kept = 0;
    std::size_t dropped = 0;
};

/// Keeps records annotated by at least three radiologists.
FilterResult filter_dataset(std::vector<NoduleRecord> raw_records, std::size_t feature_dim,
                            Provenance provenance);

class FoldAssignment {
public:
    FoldAssignment(std::size_t n_folds, std::uint64_t seed,
                   std::map<std::string, std::size_t> fold_of);

    std::size_t n_folds() const noexcept { return n_folds_; }
    std::uint64_t seed() const noexcept { return seed_; }
    std::size_t fold_of(std::string_view nodule_id) const;
    const std::map<std::string, std::size_t>& map() const noexcept { return fold_of_; }

    // Dataset indices in (train, test) order for the given held-out fold.
    std::vector<std::size_t> test_indices(const Dataset& dataset, std::size_t fold) const;
    std::vector<std::size_t> train_indices(const Dataset& dataset, std::size_t fold) const;

private:
    std::size_t n_folds_;
    std::uint64_t seed_;
    std::map<std::string, std::size_t> fold_of_;
};

/// Shuffles the distinct scan ids with a seeded generator and deals them
/// round-robin to folds, so nodules of one scan always share a fold.
FoldAssignment assign_folds(const Dataset& dataset, std::size_t n_folds, std::uint64_t seed);

struct SyntheticSpec {
    std::size_t n_nodules = 1200;
    std::size_t feature_dim = 128;
    std::size_t doctors_per_nodule = 4;
    double noise_sigma = 0.5;
    std::uint64_t seed = 42;
};

// Latent z ~ U[0,1]^5 per nodule. Features are A z + b + N(0, 0.05) with A, b
// drawn once per dataset; every doctor rates clamp(1 + 4z + N(0, sigma), 1, 5).
Dataset generate_synthetic(const SyntheticSpec& spec);

} // namespace ncbir
