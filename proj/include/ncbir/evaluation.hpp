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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ncbir/dataset.hpp"
#include "ncbir/head.hpp"
#include "ncbir/lognormal.hpp"
#include "ncbir/retrieval.hpp"
#include "ncbir/rng.hpp"

namespace ncbir {

struct DissentSample {
    std::string subject; // "doctor-<i>" or a method name
    std::string nodule_id;
    double score = 0.0;  // normalized-scale RMSE
};

/// RMSE over the five components between two ratings of the same scale.
double rating_rmse(const RatingVector& a, const RatingVector& b);

/// Dissent of one radiologist: RMSE between their normalized rating and the
/// consensus of the remaining radiologists of the same nodule.
DissentSample doctor_dissent(const NoduleRecord& record, std::size_t doctor_index);

/// Dissent of a normalized prediction against the consensus of all the
/// record's annotations.
DissentSample algorithm_dissent(const RatingVector& prediction, const NoduleRecord& record,
                                std::string subject = "algorithm");

/// Uniformly picks one individual raw annotation from the pool of every
/// annotation in the dataset, ignoring the query.
RatingVector random_baseline_prediction(const Dataset& dataset, Rng& rng);

struct ComponentStats {
    std::array<double, kNumCharacteristics> rmse{};
    std::array<double, kNumCharacteristics> std{};
};

/// Per-component RMSE and population STD of the signed errors
/// (prediction - target), both on the raw [1,5] scale.
ComponentStats rating_rmse_std_per_component(std::span<const RatingVector> predictions,
                                             std::span<const RatingVector> targets);

/// Same, with each record's full consensus as the target.
ComponentStats rating_rmse_std_per_component(std::span<const RatingVector> predictions,
                                             std::span<const NoduleRecord> records);

struct PrecisionQuery {
    std::vector<double> embedding;
    MalignancyClass malignancy;
    QueryOptions options;
};

struct PrecisionResult {
    double precision = 0.0;
    std::size_t hits = 0;
    std::size_t retrieved = 0;
    bool truncated = false;
};

/// Micro-averaged share of retrieved entries whose malignancy class equals
/// the query's.
PrecisionResult retrieval_precision(const RetrievalIndex& index, std::span<const PrecisionQuery> queries,
                                    std::size_t k);

inline const std::vector<std::size_t> kPrecisionKs = {1, 3, 5, 7, 9, 11, 13, 15};

PrecisionResult mean_precision_over_ks(const RetrievalIndex& index, std::span<const PrecisionQuery> queries,
                                       std::span<const std::size_t> ks = kPrecisionKs);

struct CvConfig {
    HeadConfig head;
    std::vector<std::size_t> k_list = {1, 2, 4, 8};
    std::vector<std::size_t> precision_ks = kPrecisionKs;
    Metric metric = Metric::Euclidean;
    // Used for every fold instead of training when present.
    std::optional<HeadModel> pretrained;
};

struct CvPrediction {
    std::string nodule_id;
    RatingVector prediction; // raw scale
};

struct CvResult {
    std::map<std::size_t, std::vector<DissentSample>> dissent;   // per k, sorted by nodule_id
    std::map<std::size_t, std::vector<CvPrediction>> predictions; // per k, sorted by nodule_id
    std::map<std::size_t, PrecisionResult> precision;            // per k (k_list and precision_ks)
    std::vector<double> fold_final_loss;
};

/// For each held-out fold: train on the other folds, embed both sides, index
/// the training side only and score every test nodule's top-k prediction.
CvResult cross_validated_cbir_dissent(const Dataset& dataset, const CvConfig& config,
                                      const FoldAssignment& folds);

struct MethodStats {
    std::string name;
    std::vector<DissentSample> samples;
    double dissent_mean = 0.0;
    double dissent_std = 0.0;
    ComponentStats components;
    std::optional<LogNormalFit> fit;
    std::size_t fit_excluded = 0; // zero-valued samples left out of the fit
    std::optional<double> precision;
};

struct EvaluationSeeds {
    std::uint64_t folds = 42;
    std::uint64_t random_baseline = 42;
    std::uint64_t head = 42;
};

struct EvaluationConfig {
    CvConfig cv;
    std::size_t n_folds = 5;
    EvaluationSeeds seeds;
};

struct EvaluationReport {
    std::vector<MethodStats> methods; // random, doctors, then CBIR k=... in k_list order
    std::map<std::size_t, PrecisionResult> precision;
    PrecisionResult mean_precision;
    std::vector<std::size_t> k_list;
    std::vector<std::size_t> precision_ks;
    std::vector<double> fold_final_loss;
    FoldAssignment folds;
    EvaluationSeeds seeds;
    Metric metric = Metric::Euclidean;
    std::size_t n_nodules = 0;

    const MethodStats& method(std::string_view name) const;
};

std::string cbir_method_name(std::size_t k);

EvaluationReport build_report(const Dataset& dataset, const EvaluationConfig& config);

// Reference row from a radiomics-based rating regressor, shown beside the
// results for comparison. Characteristic order as elsewhere.
struct ReferenceRow {
    std::array<double, kNumCharacteristics> rmse;
    std::array<double, kNumCharacteristics> std;
    double precision;
};
inline constexpr ReferenceRow kRadiomicsReference{
    {0.93, 0.83, 0.94, 0.89, 0.68}, {0.84, 0.47, 0.37, 0.27, 0.84}, 0.75};

} // namespace ncbir
